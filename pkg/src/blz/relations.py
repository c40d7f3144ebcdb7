"""Functional relations among T- and Q-functions, checked as numerical
residuals.

The T-functions are built from a Bloch pair (Q_plus, Q_minus) through the
Wronskian-type determinant

    T_j(theta) = pref * [ Q_plus(theta + i pi (2j+1)/(2 alpha))
                          * Q_minus(theta - i pi (2j+1)/(2 alpha))
                        - Q_plus(theta - i pi (2j+1)/(2 alpha))
                          * Q_minus(theta + i pi (2j+1)/(2 alpha)) ],

with the prefactor fixed so that T_0 = 1 whenever the quantum Wronskian of
the pair takes its expected constant value. Two normalizations are exposed:
"l" uses pref = i/(2 cos(pi l)) (Wronskian constant -2i cos(pi l)), "P"
uses pref = 1/(2i sin(2 pi k)) (Wronskian constant +2i sin(2 pi k), the
convention the NLIE-reconstructed pair satisfies).

Everything here consumes plain evaluators wrapped in StripFunction, so the
same checkers serve NLIE-reconstructed Q's, Hadamard-product Q's, spectral
determinants from the linear problem, and synthetic test functions. All
identities are checked pointwise on a caller-supplied theta lattice and
reported as scale-free residuals (normalized by the largest participating
term, since Q grows double-exponentially in Re theta).
"""

import dataclasses
import math

import numpy as np

from .nlie import hadamard_Q, reconstruct_Q


# ---------------------------------------------------------------------------
# evaluator wrapper and residual reports
# ---------------------------------------------------------------------------

class StripFunction:
    """A Q- or T-function evaluable at complex theta within the strip
    |Im theta| <= strip_halfwidth (checked per call; use math.inf for
    entire representations)."""

    def __init__(self, evaluator, strip_halfwidth, label=""):
        self.evaluator = evaluator
        self.strip_halfwidth = float(strip_halfwidth)
        self.label = str(label)

    def __call__(self, theta):
        th = complex(theta)
        if abs(th.imag) > self.strip_halfwidth + 1e-12:
            raise ValueError(
                "StripFunction %s: |Im theta| = %g outside the declared "
                "strip halfwidth %g" % (self.label, abs(th.imag),
                                        self.strip_halfwidth))
        return complex(self.evaluator(th))


@dataclasses.dataclass
class ResidualReport:
    """Scale-free residuals of one functional identity on a theta lattice.

    max_residual and mean_residual are non-negative; details carries
    identity-specific extras (per-j breakdowns, the Wronskian target and
    spread, ...).
    """
    identity: str
    j: object
    theta_lattice: list
    max_residual: float
    mean_residual: float
    details: dict = dataclasses.field(default_factory=dict)

    def to_dict(self):
        return {
            "identity": self.identity,
            "j": self.j,
            "theta_lattice": [[complex(t).real, complex(t).imag]
                              for t in self.theta_lattice],
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
        }


def _report(identity, j, thetas, residuals, details=None):
    res = np.asarray(residuals, dtype=float)
    return ResidualReport(identity=identity, j=j,
                          theta_lattice=list(thetas),
                          max_residual=float(np.max(res)) if res.size else 0.0,
                          mean_residual=float(np.mean(res)) if res.size
                          else 0.0,
                          details=dict(details or {}))


# ---------------------------------------------------------------------------
# T from Q
# ---------------------------------------------------------------------------

def _check_half_integer(j):
    if abs(2.0 * j - round(2.0 * j)) > 1e-9:
        raise ValueError("T_from_Q: j must be a half-integer, got %r" % (j,))


def _prefactor(ps, normalization):
    if normalization == "l":
        den = math.cos(math.pi * ps.l)
        if abs(den) <= 1e-6:
            raise ValueError("T_from_Q: cos(pi l) = %g is degenerate "
                             "(l near +-1/2 not implemented)" % den)
        return 0.5j / den
    if normalization == "P":
        den = math.sin(2.0 * math.pi * ps.k)
        if abs(den) <= 1e-6:
            raise ValueError("T_from_Q: sin(2 pi k) = %g is degenerate"
                             % den)
        return 1.0 / (2.0j * den)
    raise ValueError("T_from_Q: unknown normalization %r" % (normalization,))


def T_from_Q(Qp, Qm, j, theta, ps, normalization="l"):
    """T_j(theta) from the Bloch pair via the Wronskian determinant with
    shifts +-i pi (2j+1)/(2 alpha). Exact conventions: j = 0 returns the
    (rescaled) quantum Wronskian itself, so T_0 = 1 when the pair is
    normalized; j = -1/2 returns 0 identically (coincident shifts)."""
    _check_half_integer(j)
    pref = _prefactor(ps, normalization)
    shift = 1j * math.pi * (2.0 * j + 1.0) / (2.0 * ps.alpha)
    th = complex(theta)
    if shift == 0.0:
        return 0.0 + 0.0j
    return pref * (Qp(th + shift) * Qm(th - shift)
                   - Qp(th - shift) * Qm(th + shift))


def t_family_from_Q(Qp, Qm, ps, j_max, normalization="l"):
    """StripFunctions T_j for j = -1/2, 0, 1/2, ..., j_max, all built by
    T_from_Q. Each T_j's declared strip is the common Q strip shrunk by its
    shift (entire Q's give entire T's)."""
    _check_half_integer(j_max)
    hw = min(Qp.strip_halfwidth, Qm.strip_halfwidth)
    fam = {}
    j = -0.5
    while j <= j_max + 1e-9:
        shift = math.pi * (2.0 * j + 1.0) / (2.0 * ps.alpha)
        hw_j = hw if math.isinf(hw) else hw - shift
        if hw_j > 0.0:
            fam[j] = StripFunction(
                lambda th, jj=j: T_from_Q(Qp, Qm, jj, th, ps, normalization),
                hw_j, label="T_%g" % j)
        j += 0.5
    return fam


# ---------------------------------------------------------------------------
# identity checkers
# ---------------------------------------------------------------------------

def check_quantum_wronskian(Qp, Qm, thetas, ps, target=None):
    """W(theta) = Qp(theta + i pi/(2 alpha)) Qm(theta - i pi/(2 alpha))
    - Qp(...-...) Qm(...+...) compared against its constant target
    (default -2i cos(pi l); pass target=2j*sin(2*pi*k) for the
    k-parameterized convention). Residuals are |W - target|/|target|;
    details records the target, the lattice mean of W and its relative
    spread (W is theta-independent by the identity)."""
    if target is None:
        target = -2.0j * math.cos(math.pi * ps.l)
    shift = 1j * math.pi / (2.0 * ps.alpha)
    W = np.array([Qp(complex(t) + shift) * Qm(complex(t) - shift)
                  - Qp(complex(t) - shift) * Qm(complex(t) + shift)
                  for t in thetas])
    res = np.abs(W - target) / abs(target)
    mean_W = complex(np.mean(W))
    spread = float(np.max(np.abs(W - mean_W)) / abs(mean_W)) if len(W) \
        else 0.0
    return _report("quantum_wronskian", None, thetas, res,
                   {"target": target, "mean_W": mean_W, "spread": spread})


def check_TQ(T, Q, thetas, ps):
    """Baxter relation T(theta) Q(theta) = Q(theta + i pi xi)
    + Q(theta - i pi xi) with T the fundamental (j = 1/2) T-function,
    xi = 1/alpha. Residuals are normalized by the larger shifted-Q term."""
    shift = 1j * math.pi / ps.alpha
    res = []
    for t in thetas:
        t = complex(t)
        qp = Q(t + shift)
        qm = Q(t - shift)
        scale = max(abs(qp), abs(qm), 1e-300)
        res.append(abs(T(t) * Q(t) - qp - qm) / scale)
    return _report("TQ", 0.5, thetas, res)


def _family_get(T_family, j):
    """Family lookup with the conventions T_0 = 1, T_{-1/2} = 0 supplied
    for missing entries."""
    for key in T_family:
        if abs(key - j) < 1e-9:
            return T_family[key]
    if abs(j) < 1e-9:
        return lambda th: 1.0 + 0.0j
    if abs(j + 0.5) < 1e-9:
        return lambda th: 0.0 + 0.0j
    raise KeyError("T-family has no entry for j = %g" % j)


def check_T_system(T_family, thetas, ps, j_max):
    """Hirota rows T_j(theta + i pi xi/2) T_j(theta - i pi xi/2)
    = 1 + T_{j+1/2}(theta) T_{j-1/2}(theta) for j = 1/2, 1, ..., j_max.
    Residuals per row are normalized by the largest of the three products
    and 1; details["per_j"] holds each row's max."""
    _check_half_integer(j_max)
    h = 1j * math.pi / (2.0 * ps.alpha)
    per_j = {}
    all_res = []
    j = 0.5
    while j <= j_max + 1e-9:
        Tj = _family_get(T_family, j)
        Tp = _family_get(T_family, j + 0.5)
        Tm = _family_get(T_family, j - 0.5)
        row = []
        for t in thetas:
            t = complex(t)
            lhs = Tj(t + h) * Tj(t - h)
            rhs = Tp(t) * Tm(t)
            scale = max(abs(lhs), abs(rhs), 1.0)
            row.append(abs(lhs - 1.0 - rhs) / scale)
        per_j[j] = float(np.max(row))
        all_res.extend(row)
        j += 0.5
    return _report("T_system", j_max, thetas, all_res, {"per_j": per_j})


def build_and_check_Y(T_family, thetas, ps):
    """Gauge-invariant combinations Y_j = T_{j-1/2} T_{j+1/2} and their
    Y-system rows Y_j(theta + i pi xi/2) Y_j(theta - i pi xi/2)
    = (1 + Y_{j+1/2}(theta)) (1 + Y_{j-1/2}(theta)), checked for every j
    whose neighbors exist (Y_0 = 0 by the T_{-1/2} convention). Returns
    (y_family, report)."""
    top = max(T_family) if T_family else 0.0
    y_family = {}
    j = 0.5
    while j <= top - 0.5 + 1e-9:
        Tm = _family_get(T_family, j - 0.5)
        Tp = _family_get(T_family, j + 0.5)
        y_family[j] = (lambda th, a=Tm, b=Tp: a(th) * b(th))
        j += 0.5
    h = 1j * math.pi / (2.0 * ps.alpha)

    def y_get(j):
        for key in y_family:
            if abs(key - j) < 1e-9:
                return y_family[key]
        if abs(j) < 1e-9:
            return lambda th: 0.0 + 0.0j
        raise KeyError("Y-family has no entry for j = %g" % j)

    per_j = {}
    all_res = []
    j = 0.5
    while j <= (max(y_family) if y_family else 0.0) - 0.5 + 1e-9:
        Yj = y_get(j)
        Yp = y_get(j + 0.5)
        Ym = y_get(j - 0.5)
        row = []
        for t in thetas:
            t = complex(t)
            lhs = Yj(t + h) * Yj(t - h)
            rhs = (1.0 + Yp(t)) * (1.0 + Ym(t))
            scale = max(abs(lhs), abs(rhs), 1.0)
            row.append(abs(lhs - rhs) / scale)
        per_j[j] = float(np.max(row))
        all_res.extend(row)
        j += 0.5
    return y_family, _report("Y_system", None, thetas, all_res,
                             {"per_j": per_j})


# ---------------------------------------------------------------------------
# Q pairs from the NLIE side
# ---------------------------------------------------------------------------

def _strip_center(ps):
    return 0.5 * math.pi * (ps.alpha + 1.0) / ps.alpha


def nlie_Q_pair(sol_plus, sol_minus):
    """Bloch pair (Q_plus, Q_minus) from two massive NLIE solutions at
    quasi-momenta +-k, as StripFunctions in the centered variable
    u = theta - i pi (alpha+1)/(2 alpha) (the reality line of |Q| sits at
    u real). The declared halfwidth is the reconstruction strip minus the
    contour-offset margin."""
    ps = sol_plus.params
    if sol_minus.params.k != -ps.k:
        raise ValueError("nlie_Q_pair: solutions must sit at opposite "
                         "quasi-momenta")
    E = _strip_center(ps)
    hw = E - 2.0 * max(sol_plus.sub_axis_delta, sol_minus.sub_axis_delta)
    Qp = StripFunction(lambda u: reconstruct_Q(sol_plus, u + 1j * E),
                       hw, label="Qplus")
    Qm = StripFunction(lambda u: reconstruct_Q(sol_minus, u + 1j * E),
                       hw, label="Qminus")
    return Qp, Qm


def entire_Q_pair(zeros_plus, zeros_minus, ps, sol_plus=None, sol_minus=None,
                  match_at=0.3):
    """Entire Bloch pair from Hadamard products over computed zero sets, in
    the same centered variable as nlie_Q_pair. With the NLIE solutions
    supplied each product is rescaled by one constant so that it matches
    the reconstructed Q at u = match_at (the ratio is theta-independent up
    to truncation error, so one matching point normalizes the whole
    function); identities needing arguments outside the reconstruction
    strip can then be checked against the strip-interior normalization."""
    E = _strip_center(ps)
    cal = [1.0 + 0.0j, 1.0 + 0.0j]
    for i, (z, sol) in enumerate(((zeros_plus, sol_plus),
                                  (zeros_minus, sol_minus))):
        if sol is not None:
            th0 = match_at + 1j * E
            cal[i] = reconstruct_Q(sol, th0) / hadamard_Q(z, sol.params, th0)
    Qp = StripFunction(lambda u: cal[0] * hadamard_Q(zeros_plus, ps,
                                                     u + 1j * E),
                       math.inf, label="Qplus")
    ps_m = zeros_minus.params
    Qm = StripFunction(lambda u: cal[1] * hadamard_Q(zeros_minus, ps_m,
                                                     u + 1j * E),
                       math.inf, label="Qminus")
    return Qp, Qm
