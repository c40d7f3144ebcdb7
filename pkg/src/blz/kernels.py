"""Integral kernels used by the NLIE and TBA solvers.

Every kernel is defined through a Fourier representation or a closed form.
Pole prescriptions are realized as rigid contour shifts with verifiable
offset independence; nothing here does principal-value splitting.

Conventions: f(theta) = (1/2pi) Int dnu fhat(nu) e^{i nu theta}.
"""

import hashlib
import os

import numpy as np
from scipy import integrate


def _lattice_cache(name, scalars, nu):
    """Content-addressed on-disk cache for multiplier lattices, enabled by
    the BLZ_KERNEL_CACHE environment variable. Returns (value-or-None,
    store-callback)."""
    root = os.environ.get("BLZ_KERNEL_CACHE")
    if not root:
        return None, None
    h = hashlib.sha256(name.encode())
    for x in scalars:
        h.update(("%.17g," % float(x)).encode())
    h.update(np.ascontiguousarray(nu, dtype=float).tobytes())
    path = os.path.join(root, h.hexdigest() + ".npy")
    if os.path.exists(path):
        return np.load(path), None

    def store(values):
        os.makedirs(root, exist_ok=True)
        tmp = path + ".tmp.%d" % os.getpid()
        np.save(tmp, values)
        os.replace(tmp, path)

    return None, store


# ---------------------------------------------------------------------------
# Fourier multipliers (vectorized over nu, numerically stable for large |nu|)
# ---------------------------------------------------------------------------

def multiplier_G(nu, alpha, shift=0.0):
    """Fourier multiplier of the massive kernel G.

    G_hat(nu) = sinh(pi nu (1-alpha)/(2 alpha))
                / (2 cosh(pi nu / 2) sinh(pi nu / (2 alpha)))

    which reduces (for x = |nu| > 0) to the overflow-free form

    (e^{-pi x} - e^{-pi x/alpha}) / ((1 + e^{-pi x})(1 - e^{-pi x/alpha})).

    With shift != 0 the multiplier of the displaced kernel
    G(theta + i*shift) is returned, i.e. G_hat(nu) e^{-nu*shift}; this
    needs |shift| < pi/alpha (and < pi) to stay inside the strip of
    analyticity, which is checked.
    """
    if alpha <= 0:
        raise ValueError("multiplier_G: need alpha > 0")
    if abs(shift) >= min(np.pi, np.pi / alpha):
        raise ValueError("multiplier_G: shift outside analyticity strip")
    nu = np.asarray(nu, dtype=float)
    x = np.abs(nu)
    s = -nu * shift
    # all exponents below are <= 0 whenever |shift| < pi/alpha, pi
    num = np.exp(-np.pi * x + s) - np.exp(-np.pi * x / alpha + s)
    den = (1.0 + np.exp(-np.pi * x)) * (1.0 - np.exp(-np.pi * x / alpha))
    tiny = x < 1e-12
    out = np.where(tiny,
                   0.5 * (1.0 - alpha) * np.exp(np.where(tiny, s, 0.0)),
                   num / np.where(tiny, 1.0, den))
    return out


def multiplier_K(nu, xi):
    """K(nu) = sinh(pi nu (1+xi)/2) / (cosh(pi nu/2) sinh(pi nu xi/2)),

    the building block of the conformal kernel: the full conformal kernel
    has multiplier 1 - K(nu). Evaluated as 1 + tanh(pi nu/2)/tanh(pi nu xi/2)
    which is stable for all real nu; K(0) = 1 + 1/xi, K(+-inf) = 2.
    """
    if xi <= 0:
        raise ValueError("multiplier_K: need xi > 0")
    nu = np.asarray(nu, dtype=float)
    t = np.tanh(0.5 * np.pi * nu)
    u = np.tanh(0.5 * np.pi * nu * xi)
    tiny = np.abs(nu) < 1e-300
    return np.where(tiny, 1.0 + 1.0 / xi,
                    1.0 + t / np.where(tiny, 1.0, u))


def multiplier_F(nu, alpha, delta0, shift=0.0):
    """F_hat evaluated on the shifted contour z = nu - i*delta0:

    F_hat(z) = 1 / (4 cosh(pi z/2) sinh(pi z/(2 alpha))).

    The -i0 prescription of the kernel F is realized by this rigid shift;
    results must be independent of delta0 in (0, min(1, alpha)). Stable for
    large |nu| (the value underflows to 0 instead of overflowing).

    With shift != 0 the value F_hat(z) e^{-z*shift} is returned: together
    with pre/post scalings e^{-delta0 t} / e^{+delta0 theta} on the
    convolved function this realizes the multiplier of the displaced kernel
    F(theta + i*shift). Needs |shift| < pi/2 + pi/(2 alpha) (the strip of
    analyticity of F), which is checked.
    """
    if not 0.0 < delta0 < min(1.0, alpha):
        raise ValueError("multiplier_F: delta0 outside (0, min(1, alpha))")
    half_strip = 0.5 * np.pi * (1.0 + 1.0 / alpha)
    if abs(shift) >= half_strip:
        raise ValueError("multiplier_F: shift outside analyticity strip")
    z = np.asarray(nu, dtype=float) - 1j * delta0
    a = 0.5 * np.pi * z
    b = 0.5 * np.pi * z / alpha
    ra = np.abs(a.real)
    rb = np.abs(b.real)
    ca = 0.5 * (np.exp(a - ra) + np.exp(-a - ra))      # cosh(a) e^{-|Re a|}
    sb = 0.5 * (np.exp(b - rb) - np.exp(-b - rb))      # sinh(b) e^{-|Re b|}
    # Re(-ra - rb - z*shift) <= 0 for |shift| inside the strip: safe exp
    return np.exp(-ra - rb - z * shift) / (4.0 * ca * sb)


# ---------------------------------------------------------------------------
# Pointwise kernels
# ---------------------------------------------------------------------------

def kernel_G(theta, alpha):
    """Massive NLIE kernel G(theta), by quadrature of the folded (even)
    Fourier integral. Real, even in theta; identically zero at alpha = 1."""
    if alpha <= 0:
        raise ValueError("kernel_G: need alpha > 0")
    if alpha == 1.0:
        return 0.0
    rate = np.pi * min(1.0, 1.0 / alpha)     # analytic decay of G_hat
    cutoff = 45.0 / rate

    def integrand(nu):
        return float(multiplier_G(nu, alpha)) * np.cos(nu * theta)

    val, _ = integrate.quad(integrand, 0.0, cutoff, limit=400, epsabs=1e-13,
                            epsrel=1e-13)
    return val / np.pi


def kernel_F(theta, alpha, delta0=None):
    """Kernel F(theta) with the nu = 0 pole passed below the contour:

    F(theta) = (1/2pi) Int dz e^{i z theta} /
               (4 cosh(pi z/2) sinh(pi z/(2 alpha))),  z = nu - i delta0.

    theta may be complex with |Im theta| < pi/2 + pi/(2 alpha).
    """
    if alpha <= 0:
        raise ValueError("kernel_F: need alpha > 0")
    if delta0 is None:
        delta0 = 0.3 * min(1.0, alpha)
    theta = complex(theta)
    half_strip = 0.5 * np.pi + 0.5 * np.pi / alpha
    if abs(theta.imag) >= half_strip - 1e-9:
        raise ValueError("kernel_F: |Im theta| = %g outside the strip "
                         "(< %g)" % (abs(theta.imag), half_strip))
    rate = half_strip - abs(theta.imag)
    cutoff = (45.0 + delta0 * abs(theta.real)) / rate

    def integrand(nu):
        z = nu - 1j * delta0
        return multiplier_F(nu, alpha, delta0) * np.exp(1j * z * theta)

    re, _ = integrate.quad(lambda nu: integrand(nu).real, -cutoff, cutoff,
                           limit=800, epsabs=1e-13, epsrel=1e-13)
    im, _ = integrate.quad(lambda nu: integrand(nu).imag, -cutoff, cutoff,
                           limit=800, epsabs=1e-13, epsrel=1e-13)
    return (re + 1j * im) / (2.0 * np.pi)


def soliton_amplitude(theta, xi):
    """Soliton-soliton scattering amplitude

    S(theta) = exp[-i Int dnu/nu sin(nu theta) K(nu)]

    with the non-decaying part of K handled analytically: K -> 2 at
    infinity contributes exp(-2 pi i sgn theta) = 1, so only K - 2 is
    integrated. Unit modulus for real theta, S(theta) S(-theta) = 1.
    """
    if xi <= 0:
        raise ValueError("soliton_amplitude: need xi > 0")
    theta = float(theta)
    if theta == 0.0:
        return 1.0 + 0.0j
    rate = np.pi * min(1.0, xi)
    cutoff = 45.0 / rate

    def integrand(nu):
        if nu == 0.0:
            return (1.0 / xi - 1.0) * theta
        return (float(multiplier_K(nu, xi)) - 2.0) * np.sin(nu * theta) / nu

    phase, _ = integrate.quad(integrand, 0.0, cutoff, limit=800,
                              epsabs=1e-12, epsrel=1e-12)
    return np.exp(-2j * phase)


def kernel_script_G(theta, xi):
    """Smooth part of the conformal kernel, (1/2 pi i) d/dtheta log S(theta),
    evaluated pointwise as the absolutely convergent Fourier integral

    -(1/pi) Int_0^inf dnu (K(nu) - 2) cos(nu theta).

    The delta(theta) piece of the full kernel (and the distributional part
    hidden in the constant tail of K) is never discretized; callers work
    with the exact multiplier 1 - K(nu) instead.
    """
    if xi <= 0:
        raise ValueError("kernel_script_G: need xi > 0")
    rate = np.pi * min(1.0, xi)
    cutoff = 45.0 / rate

    def integrand(nu):
        return (float(multiplier_K(nu, xi)) - 2.0) * np.cos(nu * theta)

    val, _ = integrate.quad(integrand, 0.0, cutoff, limit=800,
                            epsabs=1e-13, epsrel=1e-13)
    return -val / np.pi


def kernel_s_shift(theta, xi):
    """Inverse shift-operator kernel s(theta) = 1/(xi cosh(theta/xi))."""
    if xi <= 0:
        raise ValueError("kernel_s_shift: need xi > 0")
    return 1.0 / (xi * np.cosh(theta / xi))


def _phi_block(a, theta, xi):
    """-i d/dtheta log F_a for F_a = (sinh th + i sin(pi a xi))
    / (sinh th - i sin(pi a xi)); vanishes identically when sin(pi a xi)=0."""
    sa = np.sin(np.pi * a * xi)
    if abs(sa) < 1e-9:
        # an exactly-vanishing block (F_a = 1) up to roundoff of sin(pi n)
        return np.zeros_like(np.asarray(theta, dtype=float))
    th = np.asarray(theta, dtype=float)
    return -2.0 * sa * np.cosh(th) / (np.sinh(th) ** 2 + sa ** 2)


def kernel_phi_minimal(j, jp, theta, xi):
    """TBA kernel phi_{j j'}(theta) = -i d/dtheta log S_{j j'}(theta) for the
    minimal (diagonal) S-matrix

    S_{j j'} = F_{j+j'} F_{|j-j'|} prod_{k=1}^{2 min(j,j')-1} F_{|j-j'|+k}^2,

    assembled analytically from the per-block closed form."""
    if not 0.0 < xi < 1.0:
        raise ValueError("kernel_phi_minimal: need xi in (0,1)")
    for half in (j, jp):
        if abs(2 * half - round(2 * half)) > 1e-12 or half < 0.5:
            raise ValueError("kernel_phi_minimal: j, j' must be "
                             "half-integers >= 1/2")
    lo = min(j, jp)
    d = abs(j - jp)
    out = _phi_block(j + jp, theta, xi) + _phi_block(d, theta, xi)
    for k in range(1, int(round(2 * lo)) - 1 + 1):
        out = out + 2.0 * _phi_block(d + k, theta, xi)
    return out if np.ndim(theta) else float(out)
