"""Model parameters and the closed-form constants relating them.

A single ParamSet carries every equivalent parameterization (coupling,
quasi-momentum, scales) so that the integral-equation side and the
differential-equation side of the toolkit agree on conventions by
construction.
"""

import dataclasses
import math

import numpy as np

from .core import log_gamma


def _gamma(x):
    return math.exp(log_gamma(x).real) if x > 0 else _gamma_reflect(x)


def _gamma_reflect(x):
    # real gamma at negative non-integer arguments via reflection
    if x == int(x):
        raise ValueError("gamma pole at %g" % x)
    return math.pi / (math.sin(math.pi * x) * _gamma(1.0 - x))


def B_coef(alpha):
    """B = 2 sqrt(pi) Gamma(1 + 1/(2 alpha)) / Gamma(3/2 + 1/(2 alpha));
    relates the dimensionless scale r to the field scale s via
    r = B s^(1+alpha)."""
    g = 1.0 / (2.0 * alpha)
    return 2.0 * math.sqrt(math.pi) * _gamma(1.0 + g) / _gamma(1.5 + g)


@dataclasses.dataclass(frozen=True, eq=False)
class ParamSet:
    """Immutable bundle of equivalent model parameters.

    beta2 is the primary coupling, k the quasi-momentum, r = M_sol * R the
    canonical dimensionless scale. mu_tilde2 / mu_hat2 / mu2 are the squared
    couplings of the three equivalent Lagrangian normalizations; the latter
    two are NaN where their conversion factors are singular
    (beta2 in {1/3, 1/2}).
    """
    beta2: float
    xi: float
    alpha: float
    c: float
    k: float
    l: float
    p: float
    h: float
    R: float
    r: float
    s: float
    soliton_mass: float
    mu_tilde2: float
    mu_hat2: float = float("nan")
    mu2: float = float("nan")

    def to_dict(self):
        return dataclasses.asdict(self)

    def __eq__(self, other):
        if not isinstance(other, ParamSet):
            return NotImplemented
        for f in dataclasses.fields(self):
            a = getattr(self, f.name)
            b = getattr(other, f.name)
            if a != b and not (math.isnan(a) and math.isnan(b)):
                return False
        return True


def derive(beta2, k, r, R=1.0):
    """Populate a full ParamSet from (beta2, k, r, R).

    xi = beta2/(1-beta2), alpha = 1/xi = 1/beta2 - 1,
    c = 13 - 6(beta2 + 1/beta2), l = 2|k| - 1/2 (mirror branch for k < 0),
    s from inverting r = B s^(1+alpha), soliton mass M = r/R, and the
    coupling chain mu_tilde2 -> mu_hat2 -> mu2 by inverting the soliton-mass
    formula and dividing out the conversion factors where they are regular.
    """
    if not 0.0 < beta2 <= 0.5:
        raise ValueError("derive: beta2 must lie in (0, 1/2]")
    if abs(k) > 0.5:
        raise ValueError("derive: |k| must be <= 1/2")
    if r < 0.0:
        raise ValueError("derive: r must be >= 0")
    if R <= 0.0:
        raise ValueError("derive: R must be > 0")
    xi = beta2 / (1.0 - beta2)
    alpha = 1.0 / xi
    c = 13.0 - 6.0 * (beta2 + 1.0 / beta2)
    l = 2.0 * abs(k) - 0.5
    p = k * beta2
    h = (p / math.sqrt(beta2)) ** 2 + (c - 1.0) / 24.0
    B = B_coef(alpha)
    s = (r / B) ** (1.0 / (1.0 + alpha)) if r > 0 else 0.0
    msol = r / R

    if msol > 0:
        # invert M = (2/sqrt(pi)) G(xi/2)/G(1/2+xi/2)
        #            * [pi mu_tilde G(1/(1+xi))/G(xi/(1+xi))]^{(1+xi)/2}
        pref = (2.0 / math.sqrt(math.pi)) * _gamma(0.5 * xi) \
            / _gamma(0.5 + 0.5 * xi)
        inner = (msol / pref) ** (2.0 / (1.0 + xi))
        mu_tilde = inner * _gamma(xi / (1.0 + xi)) \
            / (math.pi * _gamma(1.0 / (1.0 + xi)))
        mu_tilde2 = mu_tilde ** 2
    else:
        mu_tilde2 = 0.0

    mu_hat2 = float("nan")
    mu2 = float("nan")
    try:
        f1, f2 = conversion_factors(beta2)
        if abs(f2.imag) < 1e-12 and abs(f1.imag) < 1e-12:
            mu_hat2 = mu_tilde2 / f2.real
            mu2 = mu_hat2 / f1.real
    except ValueError:
        pass

    return ParamSet(beta2=beta2, xi=xi, alpha=alpha, c=c, k=k, l=l, p=p,
                    h=h, R=R, r=r, s=s, soliton_mass=msol,
                    mu_tilde2=mu_tilde2, mu_hat2=mu_hat2, mu2=mu2)


def derive_conformal(beta2, p, R=1.0):
    """Massless (r = 0) parameter point with the CFT vacuum parameter p
    given directly. The induced quasi-momentum k = p/beta2 may lie outside
    the principal window |k| <= 1/2 of derive; that bound belongs to the
    massive equation and is not enforced here."""
    ps = derive(beta2, 0.0, 0.0, R)
    k = p / beta2
    c = ps.c
    return dataclasses.replace(
        ps, k=k, l=2.0 * abs(k) - 0.5, p=p,
        h=(p / math.sqrt(beta2)) ** 2 + (c - 1.0) / 24.0)


def conversion_factors(beta2):
    """The two squared-coupling conversion factors (possibly complex):

    f1 = mu_hat^2/mu^2
       = Gamma^2(1-b)/(pi (1-2b)(3b-1)) [G(3b)G(b)/(G(1-3b)G(1-b))]^{1/2}
    f2 = mu_tilde^2/mu_hat^2
       = (1-2b)(3b-1)/pi [G^3(b) G(1-3b) / (G^3(1-b) G(3b))]^{1/2}

    with b = beta2. Singular at beta2 = 1/2 (factor 1-2b) and beta2 = 1/3
    (factor 3b-1). Their product is (Gamma(b)/pi)^2, regular.
    """
    b = beta2
    sing = (1.0 - 2.0 * b) * (3.0 * b - 1.0)
    if abs(1.0 - 2.0 * b) < 1e-10:
        raise ValueError("conversion_factors: singular factor (1-2 beta2)")
    if abs(3.0 * b - 1.0) < 1e-10:
        raise ValueError("conversion_factors: singular factor (3 beta2 - 1)")
    gb = _gamma(b)
    g1b = _gamma(1.0 - b)
    g3b = _gamma(3.0 * b)
    g13b = _gamma(1.0 - 3.0 * b)
    ratio1 = complex(g3b * gb / (g13b * g1b))
    ratio2 = complex(gb ** 3 * g13b / (g1b ** 3 * g3b))
    f1 = g1b ** 2 / (math.pi * sing) * np.sqrt(ratio1)
    f2 = sing / math.pi * np.sqrt(ratio2)
    return f1, f2


def mu_conversions(ps):
    """Both conversion factors evaluated for ps.beta2, as a dict."""
    f1, f2 = conversion_factors(ps.beta2)
    return {"mu_hat2_over_mu2": f1, "mu_tilde2_over_mu_hat2": f2}


def tba_masses(xi, n, m=None):
    """Bound-state mass list m_j = (2 m / pi) cot(pi xi / 2) sin(pi j xi)
    for j = 1/2, 1, ..., n. With m omitted the overall constant is the
    closed-form coefficient m(xi) of the asymptotic expansion."""
    if m is None:
        m = m_coef(xi)
    js = [0.5 * (i + 1) for i in range(2 * n)]
    cot = math.cos(0.5 * math.pi * xi) / math.sin(0.5 * math.pi * xi)
    return js[: 2 * n], [
        (2.0 * m / math.pi) * cot * math.sin(math.pi * j * xi)
        for j in js[: 2 * n]]


def m_coef(xi):
    """m = 2 sqrt(pi) Gamma(1/2 - xi/2)/Gamma(1 - xi/2)
    * Gamma(1/(1+xi))^(1+xi); leading coefficient of log Lambda."""
    if xi >= 1.0:
        raise ValueError("m_coef: pole at xi >= 1 (Gamma(1/2 - xi/2))")
    return (2.0 * math.sqrt(math.pi) * _gamma(0.5 - 0.5 * xi)
            / _gamma(1.0 - 0.5 * xi) * _gamma(1.0 / (1.0 + xi)) ** (1.0 + xi))


def M_coef(xi):
    """M = (1/sqrt(pi)) Gamma(xi/2) Gamma((1-xi)/2)
    * Gamma(1/(1+xi))^(1+xi); coefficient of the conformal A asymptotics."""
    if xi >= 1.0:
        raise ValueError("M_coef: pole at xi >= 1 (Gamma((1-xi)/2))")
    return (_gamma(0.5 * xi) * _gamma(0.5 * (1.0 - xi)) / math.sqrt(math.pi)
            * _gamma(1.0 / (1.0 + xi)) ** (1.0 + xi))


def C_coefs(xi, n_max):
    """C_1..C_n of the asymptotic expansion, with C_0 = m:

    C_k = (1+xi)/k! (pi xi/(1+xi))^k
          (2/C_0 G(1/2-xi/2)/G(1-xi/2))^{2k-1}
          G[(1+xi)(k-1/2)] / G[1+(k-1/2) xi].
    """
    c0 = m_coef(xi)
    ratio = 2.0 / c0 * _gamma(0.5 - 0.5 * xi) / _gamma(1.0 - 0.5 * xi)
    out = []
    for kk in range(1, n_max + 1):
        out.append((1.0 + xi) / math.factorial(kk)
                   * (math.pi * xi / (1.0 + xi)) ** kk
                   * ratio ** (2 * kk - 1)
                   * _gamma((1.0 + xi) * (kk - 0.5))
                   / _gamma(1.0 + (kk - 0.5) * xi))
    return out


def frakC_coefs(ps, n_max):
    """Proportionality constants between the NLIE tail integrals and the
    physical local integrals of motion,

    frakC_n = (-alpha^2/(alpha+1))^{n-1}
              G(-(2n-1)/(2 alpha)) G((2n-1)(alpha+1)/(2 alpha))
              / (2 sqrt(pi) n!)
              * [2 M_sol sin(pi/(2 alpha)) G((alpha+1)/(2 alpha))
                 G(-1/(2 alpha)) / (8 sqrt(pi))]^{1-2n}.
    """
    a = ps.alpha
    msol = ps.soliton_mass
    if msol <= 0:
        raise ValueError("frakC_coefs: needs a massive point (r > 0)")
    bracket = (2.0 * msol * math.sin(0.5 * math.pi / a)
               * _gamma(0.5 * (a + 1.0) / a) * _gamma(-0.5 / a)
               / (8.0 * math.sqrt(math.pi)))
    out = []
    for n in range(1, n_max + 1):
        q = 2 * n - 1
        out.append((-a * a / (a + 1.0)) ** (n - 1)
                   * _gamma(-0.5 * q / a) * _gamma(0.5 * q * (a + 1.0) / a)
                   / (2.0 * math.sqrt(math.pi) * math.factorial(n))
                   * bracket ** (1 - 2 * n))
    return out


def asymptotic_constants(ps, n_max=3):
    """Every closed-form constant of the asymptotic expansions in one dict:
    m (= C_0), M, B, C_1..C_n and frakC_1..frakC_n (the latter only for
    massive points)."""
    if ps.xi >= 1.0:
        raise ValueError("asymptotic_constants: xi >= 1 hits a gamma pole")
    out = {
        "m": m_coef(ps.xi),
        "M": M_coef(ps.xi),
        "B": B_coef(ps.alpha),
        "C": C_coefs(ps.xi, n_max),
    }
    if ps.soliton_mass > 0:
        out["frakC"] = frakC_coefs(ps, n_max)
    return out
