"""Classical KdV layer: periodic potentials, scalar and matrix monodromy,
classical integrals of motion, the Miura transform, and verification of the
large-lambda expansion of the Floquet trace."""

import math

import numpy as np
from scipy import integrate


class PeriodicPotential:
    """Real or complex 2 pi periodic potential given by Fourier coefficients
    {k: c_k}, U(w) = sum_k c_k e^{i k w}."""

    def __init__(self, coefficients):
        self.coefficients = {int(k): complex(v)
                             for k, v in dict(coefficients).items()}

    @classmethod
    def constant(cls, u0):
        return cls({0: u0})

    @classmethod
    def cosine(cls, a, k=1):
        return cls({0: 0.0, k: 0.5 * a, -k: 0.5 * a})

    def is_real(self, tol=1e-12):
        return all(abs(np.conj(v) - self.coefficients.get(-k, 0.0)) < tol
                   for k, v in self.coefficients.items())

    def __call__(self, w, order=0):
        w = np.asarray(w, dtype=float)
        out = np.zeros(w.shape, dtype=complex)
        for k, c in self.coefficients.items():
            out = out + c * (1j * k) ** order * np.exp(1j * k * w)
        if self.is_real():
            out = out.real
        return out if out.ndim else complex(out) if np.iscomplexobj(out) \
            else float(out)


class MiuraField:
    """phi(w) = i p w + sum_k c_k e^{i k w}; quasi-periodic with
    phi(w + 2 pi) = phi(w) + 2 pi i p by construction."""

    def __init__(self, p, coefficients=None):
        self.p = float(p)
        self.coefficients = {int(k): complex(v)
                             for k, v in dict(coefficients or {}).items()}

    def prime(self, w):
        w = np.asarray(w, dtype=float)
        out = np.full(w.shape, 1j * self.p, dtype=complex)
        for k, c in self.coefficients.items():
            out = out + c * 1j * k * np.exp(1j * k * w)
        return out

    def second(self, w):
        w = np.asarray(w, dtype=float)
        out = np.zeros(w.shape, dtype=complex)
        for k, c in self.coefficients.items():
            out = out - c * k * k * np.exp(1j * k * w)
        return out


def classical_IM(U, n_samples=1024):
    """First three classical integrals of motion,

    I1 = Int U dw/2pi, I3 = Int U^2 dw/2pi,
    I5 = Int [U^3 - (dU/dw)^2 / 2] dw/2pi,

    by the trapezoid rule on the periodic lattice (spectrally accurate)."""
    w = np.linspace(0.0, 2.0 * math.pi, n_samples, endpoint=False)
    u = U(w)
    du = U(w, order=1)
    i1 = np.mean(u)
    i3 = np.mean(u ** 2)
    i5 = np.mean(u ** 3 - 0.5 * du ** 2)
    if U.is_real():
        return float(i1.real), float(i3.real), float(i5.real)
    return complex(i1), complex(i3), complex(i5)


def scalar_monodromy(U, lam, rtol=1e-12, atol=1e-12):
    """Fundamental matrix over one period of psi'' = (lam^2 - U) psi and its
    trace T(lam).

    The period is integrated in segments short enough that each segment
    transfer matrix has O(1) entries; the conservation diagnostic det M is
    the product of the per-segment determinants, which keeps it meaningful
    at large lam (forming det from the full-period matrix would lose all
    digits to cancellation between e^{+2 pi lam} entries)."""
    lam2 = complex(lam) ** 2

    def rhs(w, y):
        u = U(w)
        # y = flattened 2x2 fundamental matrix, rows (psi, psi')
        psi = y[0:2]
        dpsi = y[2:4]
        return np.concatenate([dpsi, (lam2 - u) * psi])

    n_seg = max(4, int(math.ceil(2.0 * abs(complex(lam)))))
    edges = np.linspace(0.0, 2.0 * math.pi, n_seg + 1)
    m = np.eye(2, dtype=complex)
    det = 1.0 + 0.0j
    for i in range(n_seg):
        y0 = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)
        sol = integrate.solve_ivp(rhs, (edges[i], edges[i + 1]), y0,
                                  method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise RuntimeError("scalar_monodromy: integrator failed: "
                               + sol.message)
        seg = sol.y[:, -1].reshape(2, 2)
        det *= seg[0, 0] * seg[1, 1] - seg[0, 1] * seg[1, 0]
        m = seg @ m
    return {"M": m, "T": m[0, 0] + m[1, 1], "det": det}


def check_T_asymptotics(U, lambdas, n_report=3):
    """Fit (1/2pi) log T(lam) - lam against lam^{1-2n} and compare with the
    predicted coefficients -c_n I_{2n-1}, c_n = (2n-3)!!/(2^n n!).

    Two extra basis terms beyond n_report are included to absorb the first
    omitted orders. Returns (fitted, predicted) coefficient lists."""
    lambdas = np.asarray(lambdas, dtype=float)
    vals = []
    for lam in lambdas:
        t = scalar_monodromy(U, lam)["T"]
        vals.append(np.log(complex(t)).real / (2.0 * math.pi) - lam)
    vals = np.array(vals)
    n_fit = n_report + 2
    design = np.column_stack([lambdas ** (1 - 2 * n)
                              for n in range(1, n_fit + 1)])
    cond = np.linalg.cond(design / np.max(np.abs(design), axis=0))
    if cond > 1e12:
        raise ValueError("check_T_asymptotics: ill-conditioned fit "
                         "(cond = %.3g)" % cond)
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    ims = classical_IM(U)

    def c_n(n):
        dfact = 1.0
        for m in range(2 * n - 3, 0, -2):
            dfact *= m
        return dfact / (2 ** n * math.factorial(n))

    predicted = [-c_n(n) * np.real(ims[n - 1]) for n in range(1, n_report + 1)]
    return list(coef[:n_report]), predicted


def miura(phi, n_modes=64):
    """Miura transform -U = (phi')^2 + phi''. The linear i p w part of phi
    contributes the constant p^2; the output is exactly 2 pi periodic."""
    n = 4 * n_modes
    w = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    u = -(phi.prime(w) ** 2) - phi.second(w)
    c = np.fft.fft(u) / n
    coeffs = {}
    for k in range(-n_modes, n_modes + 1):
        val = c[k % n]
        if abs(val) > 1e-14:
            coeffs[k] = val
    return PeriodicPotential(coeffs)


def _expm_traceless(b11, b12, b21):
    """exp of [[b11, b12], [b21, -b11]] in closed form."""
    mu = np.sqrt(complex(b11 * b11 + b12 * b21))
    if abs(mu) < 1e-12:
        ch, shm = 1.0 + mu ** 2 / 2.0, 1.0 + mu ** 2 / 6.0
    else:
        ch, shm = np.cosh(mu), np.sinh(mu) / mu
    return np.array([[ch + shm * b11, shm * b12],
                     [shm * b21, ch - shm * b11]], dtype=complex)


def _ordered_product(phi, lam, n_steps):
    dw = 2.0 * math.pi / n_steps
    mids = (np.arange(n_steps) + 0.5) * dw
    dphi = phi.prime(mids)
    m = np.eye(2, dtype=complex)
    det = 1.0 + 0.0j
    for i in range(n_steps):
        # generator a(w) = [[phi', lam], [lam, -phi']]
        f = _expm_traceless(dphi[i] * dw, lam * dw, lam * dw)
        det *= f[0, 0] * f[1, 1] - f[0, 1] * f[1, 0]
        m = f @ m
    return m, det


def matrix_monodromy(phi, lam, n_steps=4096, check_tol=1e-3):
    """Monodromy of the first-order system dPsi/dw = a(w) Psi with the
    traceless generator a = [[phi', lam], [lam, -phi']], whose first
    component solves psi'' = (lam^2 - U) psi for U = miura(phi).

    Midpoint ordered product with Richardson extrapolation over
    (n_steps, 2 n_steps); the two resolutions must agree within check_tol
    on the trace. The det diagnostic is accumulated factor by factor (each
    closed-form exponential has unit determinant up to roundoff), which
    stays meaningful when the product entries are huge."""
    m1, _ = _ordered_product(phi, lam, n_steps)
    m2, det2 = _ordered_product(phi, lam, 2 * n_steps)
    t1 = m1[0, 0] + m1[1, 1]
    t2 = m2[0, 0] + m2[1, 1]
    if abs(t2 - t1) > check_tol * max(1.0, abs(t2)):
        raise RuntimeError("matrix_monodromy: step-halving disagreement "
                           "%.3g" % abs(t2 - t1))
    m = (4.0 * m2 - m1) / 3.0
    return {"M_half": m, "trace": m[0, 0] + m[1, 1], "det": det2}
