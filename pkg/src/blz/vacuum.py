"""Vacuum data of the c < 1 CFT: the Coulomb-gas eigenvalue G2, the
vertex-operator two-point block, vacuum local-IM polynomials, and the first
order of the Coulomb-gas partition function.

All endpoint-singular integrals use Gauss-Jacobi rules that absorb the
(2 sin(u/2))^(-2 beta2) weight exactly, so accuracy is uniform as
beta2 -> 1/2.
"""

import dataclasses
import math

import numpy as np
from scipy import special

from .params import _gamma


@dataclasses.dataclass(frozen=True)
class VacuumPoint:
    """CFT vacuum labelled by (beta2, p); h and c follow from the standard
    relations c = 13 - 6(beta2 + 1/beta2), h = p^2/beta2 + (c-1)/24."""
    beta2: float
    p: float

    def __post_init__(self):
        if not 0.0 < self.beta2 < 0.5:
            raise ValueError("VacuumPoint: beta2 must lie in (0, 1/2)")
        # excluded highest weights: 2p = -beta2 - n, n = 0, 1, ...
        t = -2.0 * self.p - self.beta2
        if t > -1e-9 and abs(t - round(t)) < 1e-9:
            raise ValueError("VacuumPoint: 2p = -beta2 - n excluded")

    @property
    def c(self):
        return 13.0 - 6.0 * (self.beta2 + 1.0 / self.beta2)

    @property
    def h(self):
        return self.p ** 2 / self.beta2 + (self.c - 1.0) / 24.0


def vertex_pair(w, wt, eps, epst, vp):
    """Two-point function of vertex operators on the vacuum,

    <p| V_eps(w) V_epst(wt) |p>
        = e^{-2 i p (epst*w + eps*wt)} |2 sin((w-wt)/2)|^{-2 eps epst beta2},

    with the radially-ordered (modulus) convention for the power, matching
    the Coulomb-gas integrands built from it."""
    if eps not in (1, -1) or epst not in (1, -1):
        raise ValueError("vertex_pair: eps, epst must be +-1")
    ee = eps * epst
    s = abs(2.0 * math.sin(0.5 * (w - wt)))
    if ee == 1 and s < 1e-12:
        raise ValueError("vertex_pair: coincident points with equal charges")
    phase = np.exp(-2j * vp.p * (epst * w + eps * wt))
    return phase * s ** (-2.0 * ee * vp.beta2)


def g2_vacuum(vp, mode="closed", n_nodes=120):
    """Vacuum eigenvalue of the first nonlocal integral of motion.

    closed:     4 pi^2 Gamma(1-2 beta2) /
                (Gamma(1-2p-beta2) Gamma(1+2p-beta2))
    quadrature: the double integral
                Int_0^{2pi} dw Int_0^w dwt
                2 cos(2 pi p + 2p(wt-w)) / [2 sin((w-wt)/2)]^{2 beta2}
                collapsed to one dimension in u = w - wt and integrated
                with a Gauss-Jacobi rule absorbing both endpoint weights.
    """
    b = vp.beta2
    p = vp.p
    if mode == "closed":
        for arg in (1.0 - 2.0 * p - b, 1.0 + 2.0 * p - b):
            if arg < 1e-9 and abs(arg - round(arg)) < 1e-9:
                raise ValueError("g2_vacuum: gamma pole at argument %g"
                                 % arg)
        return (4.0 * math.pi ** 2 * _gamma(1.0 - 2.0 * b)
                / (_gamma(1.0 - 2.0 * p - b) * _gamma(1.0 + 2.0 * p - b)))
    if mode != "quadrature":
        raise ValueError("g2_vacuum: mode must be closed or quadrature")
    # inner w-integral gives the factor (2pi - u):
    #   G2 = Int_0^{2pi} du (2pi - u) 2 cos(2 pi p - 2 p u)
    #        / (2 sin(u/2))^{2 beta2}
    # integrand = u^{-2b} (2pi-u)^{1-2b} * smooth(u)
    x, wts = special.roots_jacobi(n_nodes, 1.0 - 2.0 * b, -2.0 * b)
    u = math.pi * (1.0 + x)
    ratio = (u * (2.0 * math.pi - u) / (2.0 * np.sin(0.5 * u))) ** (2.0 * b)
    smooth = 2.0 * np.cos(2.0 * math.pi * p - 2.0 * p * u) * ratio
    return math.pi ** (2.0 - 4.0 * b) * float(np.sum(wts * smooth))


def vacuum_local_IM(vp, n):
    """Vacuum eigenvalues of the first three local integrals of motion as
    polynomials in (h, c)."""
    h = vp.h
    c = vp.c
    if n == 1:
        return h - c / 24.0
    if n == 2:
        return h ** 2 - (c + 2.0) * h / 12.0 \
            + c * (5.0 * c + 22.0) / (4.0 * math.factorial(6))
    if n == 3:
        return (h ** 3 - (c + 4.0) * h ** 2 / 8.0
                + 5.0 * (c + 2.0) * (3.0 * c + 20.0) * h
                / (4.0 * math.factorial(6))
                - 5.0 * c * (3.0 * c + 14.0) * (7.0 * c + 68.0)
                / (4.0 * math.factorial(9)))
    raise ValueError("vacuum_local_IM: n must be 1, 2 or 3")


def coulomb_first_order(vp, kappa, N, n_nodes=120):
    """First-order (n = 1) term of the Coulomb-gas partition function at
    2p = N:

    kappa^2 Int_0^{2pi} dw dwt / (4 pi^2)
        e^{i N (wt - w)} / |2 sin((w - wt)/2)|^{2 beta2}
    = (kappa^2 / 2 pi) Int_0^{2pi} du cos(N u) (2 sin(u/2))^{-2 beta2}.
    """
    if N != int(N):
        raise ValueError("coulomb_first_order: N must be an integer")
    b = vp.beta2
    x, wts = special.roots_jacobi(n_nodes, -2.0 * b, -2.0 * b)
    u = math.pi * (1.0 + x)
    ratio = (u * (2.0 * math.pi - u) / (2.0 * np.sin(0.5 * u))) ** (2.0 * b)
    smooth = np.cos(N * u) * ratio
    integral = math.pi ** (1.0 - 4.0 * b) * float(np.sum(wts * smooth))
    return kappa ** 2 / (2.0 * math.pi) * integral
