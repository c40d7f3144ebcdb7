"""Massless TBA for the minimal models M(2,2n+3) on the folded A_{2n}
diagram.

The 2n nodes j = 1/2, 1, ..., n of A_{2n} are identified pairwise by the
Z_2 fold j <-> n + 1/2 - j, leaving n independent nodes j = 1/2, ..., n/2
(a tadpole: chain adjacency with a self-link at the top node). The minimal
closed-form kernel phi_{j j'} already is the fold-collapsed kernel: summing
it over the independent nodes reproduces the resolvent identity
(1 - phi)^{-1} = 1 - s I of the unfolded diagram, which is checked in the
tests at sampled Fourier points.
"""

import math

import numpy as np

from .core import ConvergenceError, RapidityGrid, SampledFunction, convolve
from .kernels import _phi_block, kernel_phi_minimal
from .params import tba_masses


class TbaSystem:
    """Folded A_{2n} TBA data: node labels, masses and adjacency.

    labels are all 2n half-integers 1/2 .. n; reps are the n independent
    ones after the fold (1/2 .. n/2); masses follow the labels and are
    symmetric under the fold. incidence is the n x n adjacency of the
    folded (tadpole) diagram, with a unit diagonal entry at the top node.
    """

    def __init__(self, n, r_scale=1.0):
        if int(n) != n or n < 1:
            raise ValueError("TbaSystem: n must be a positive integer")
        self.n = int(n)
        self.beta2 = 2.0 / (2 * self.n + 3)
        self.xi = self.beta2 / (1.0 - self.beta2)
        self.r_scale = float(r_scale)
        self.labels, self.masses = tba_masses(self.xi, self.n)
        self.reps = self.labels[: self.n]
        inc = np.zeros((self.n, self.n), dtype=int)
        for i in range(self.n - 1):
            inc[i, i + 1] = inc[i + 1, i] = 1
        # the fold makes the top node adjacent to its own image
        inc[self.n - 1, self.n - 1] = 1
        self.incidence = inc

    def fold(self, j):
        return self.n + 0.5 - j


def build_system(n, r_scale=1.0):
    return TbaSystem(n, r_scale)


def _phi_tail_integral(j, jp, x, xi):
    """(1/2pi) Int_x^inf phi_{j j'}(u) du, from the per-block closed form

    Int_x^inf b_a(u) du = -2 sign(s_a) [pi/2 - arctan(sinh x / |s_a|)],
    s_a = sin(pi a xi).
    """
    x = np.asarray(x, dtype=float)
    lo, d = min(j, jp), abs(j - jp)
    a_list = [j + jp, d] + 2 * list(d + k for k in
                                    range(1, int(round(2 * lo))))
    out = np.zeros_like(x)
    for a in a_list:
        sa = math.sin(math.pi * a * xi)
        if abs(sa) < 1e-9:
            continue
        out = out - 2.0 * math.copysign(1.0, sa) * (
            0.5 * math.pi - np.arctan(np.sinh(x) / abs(sa)))
    return out / (2.0 * math.pi)


def _stable_L(eps):
    """log(1 + e^{-eps}) without overflow for very negative eps."""
    out = np.where(eps > 0.0,
                   np.log1p(np.exp(-np.abs(eps))),
                   -np.minimum(eps, 0.0) + np.log1p(np.exp(-np.abs(eps))))
    return out


class TbaSolution:
    """Pseudo-energy family on a grid; epsilon maps every label (including
    fold images) to its samples."""

    def __init__(self, system, grid, epsilon, defect, n_iter):
        self.system = system
        self.grid = grid
        self.epsilon = epsilon
        self.defect = float(defect)
        self.n_iter = int(n_iter)

    def L(self, j):
        return _stable_L(self.epsilon[j])

    def sampled(self, j):
        return SampledFunction(self.grid, self.epsilon[j])


def solve_tba(sys, grid, tol=1e-10, max_iter=500, damping=0.5):
    """Damped fixed-point solution of

    eps_j(theta) = pi m_j r e^theta
                   - sum_{j'} Int dtheta'/2pi phi_{j j'}(theta - theta')
                     log[1 + e^{-eps_{j'}(theta')}]

    over the independent folded nodes. The convolution is cut off at the
    left grid edge; the missing tail is restored analytically with the
    plateau value of L, so the UV plateau is accurate at the edge itself.
    """
    theta = grid.nodes
    h = grid.spacing
    reps = sys.reps
    n = sys.n

    half = (grid.n_points - 1) * h
    kgrid = RapidityGrid(-half, half, 2 * grid.n_points - 1)
    kern = {}
    tail = {}
    for a, j in enumerate(reps):
        for jp in reps[a:]:
            kern[(j, jp)] = SampledFunction(
                kgrid, kernel_phi_minimal(j, jp, kgrid.nodes, sys.xi)
                / (2.0 * math.pi))
            tail[(j, jp)] = _phi_tail_integral(j, jp, theta - theta[0],
                                               sys.xi)

    def pair(j, jp):
        return (j, jp) if (j, jp) in kern else (jp, j)

    drive = [math.pi * sys.masses[a] * sys.r_scale * np.exp(theta)
             for a in range(n)]
    eps = [d.copy() for d in drive]
    defect = math.inf
    for it in range(1, max_iter + 1):
        Ls = [_stable_L(e) for e in eps]
        new = []
        for a, j in enumerate(reps):
            conv = np.zeros_like(theta)
            for b, jp in enumerate(reps):
                kf = kern[pair(j, jp)]
                conv = conv + convolve(kf, SampledFunction(grid, Ls[b])).values
                conv = conv + Ls[b][0] * tail[pair(j, jp)]
            new.append(drive[a] - conv)
        # scale-free defect: the driving term reaches ~e^{theta_max}, so an
        # absolute criterion would bottom out at roundoff of the right edge
        defect = max(float(np.max(np.abs(new[a] - eps[a])
                                  / (1.0 + np.abs(new[a]))))
                     for a in range(n))
        eps = [eps[a] + damping * (new[a] - eps[a]) for a in range(n)]
        if defect < tol:
            break
    else:
        raise ConvergenceError("solve_tba: defect %.3g after %d iterations"
                               % (defect, max_iter))
    family = {}
    for a, j in enumerate(reps):
        family[j] = eps[a]
        family[sys.fold(j)] = eps[a]
    return TbaSolution(sys, grid, family, defect, it)


def stationary_Y(sys, tol=1e-14, max_iter=10000):
    """Positive constant solution of Y_j^2 = (1+Y_{j-1/2})(1+Y_{j+1/2})
    under the fold (boundary 1+Y_0 = 1), by damped iteration in log Y."""
    n = sys.n
    x = np.zeros(n)            # log Y
    for _ in range(max_iter):
        y = np.exp(x)
        target = 0.5 * (sys.incidence @ np.log1p(y))
        if float(np.max(np.abs(target - x))) < tol:
            return np.exp(target)
        x = x + 0.5 * (target - x)
    raise ConvergenceError("stationary_Y: no fixed point after %d iterations"
                           % max_iter)
