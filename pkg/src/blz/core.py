"""Shared numerics: uniform rapidity grids, sampled functions, convolution,
special functions, root finding and asymptotic tail fits."""

import numpy as np
from scipy import special
from scipy import optimize


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class RapidityGrid:

    """
    Uniform grid in the rapidity variable theta.

    Node positions are always recomputed from (theta_min, theta_max, n_points)
    so that repeated constructions give bitwise identical grids.
    """

    def __init__(self, theta_min, theta_max, n_points):
        if not theta_min < theta_max:
            raise ValueError("need theta_min < theta_max")
        if n_points < 16:
            raise ValueError("need n_points >= 16")
        self.theta_min = float(theta_min)
        self.theta_max = float(theta_max)
        self.n_points = int(n_points)

    @property
    def spacing(self):
        return (self.theta_max - self.theta_min) / (self.n_points - 1)

    @property
    def nodes(self):
        return self.theta_min + self.spacing * np.arange(self.n_points)

    def __eq__(self, other):
        return (isinstance(other, RapidityGrid)
                and self.theta_min == other.theta_min
                and self.theta_max == other.theta_max
                and self.n_points == other.n_points)

    def __repr__(self):
        return ("RapidityGrid(theta_min=%r, theta_max=%r, n_points=%r)"
                % (self.theta_min, self.theta_max, self.n_points))


class SampledFunction:

    """
    Complex samples of a function on a RapidityGrid.

    strip_offset records the imaginary part of the line the samples live on,
    i.e. the stored values are f(theta + i*strip_offset) for theta on the
    real grid. metadata carries diagnostic flags set by the producers
    (e.g. a non-decayed-kernel warning from convolve).
    """

    def __init__(self, grid, values, strip_offset=0.0, metadata=None):
        values = np.asarray(values)
        if values.shape != (grid.n_points,):
            raise ValueError("values length must equal grid.n_points")
        self.grid = grid
        self.values = values
        self.strip_offset = float(strip_offset)
        self.metadata = dict(metadata or {})

    def assert_real_on_axis(self, tol=1e-10):
        if self.strip_offset == 0.0:
            m = float(np.max(np.abs(self.values.imag)))
            if m >= tol:
                raise ValueError("declared real on axis but max|Im| = %g" % m)

    def __call__(self, theta):
        """Cubic-ish barycentric evaluation is overkill here; linear
        interpolation on the uniform grid is enough for diagnostics."""
        x = self.grid.nodes
        re = np.interp(theta, x, self.values.real)
        im = np.interp(theta, x, self.values.imag)
        return re + 1j * im


def log_gamma(z):
    """Principal branch of log Gamma(z)."""
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == int(z.real):
        raise ValueError("log_gamma: pole of Gamma at z = %g" % z.real)
    out = special.loggamma(z)
    if complex(z).imag == 0.0 and z.real > 0.0:
        return complex(out.real, 0.0)
    return complex(out)


def convolve(kernel, f, edge_tol=1e-12):
    """
    (kernel * f)(theta) = integral dtheta' kernel(theta - theta') f(theta')
    on f's grid, by trapezoid-weighted FFT.

    kernel must be sampled on a symmetric lattice with the same spacing as
    f's grid and wide enough to cover all differences theta - theta'. If the
    kernel has not decayed below edge_tol at its lattice edges the result is
    still produced but flagged in metadata["kernel_edge_warning"].
    """
    h = f.grid.spacing
    hk = kernel.grid.spacing
    if abs(h - hk) > 1e-13 * max(h, hk):
        raise ValueError("convolve: kernel and f grid spacings differ")
    kv = kernel.values
    fv = f.values
    edge = max(abs(kv[0]), abs(kv[-1]))
    warn = bool(edge > edge_tol)

    # align kernel lattice offsets with the difference lattice of f's grid
    nk = kernel.grid.n_points
    k0 = kernel.grid.theta_min
    # kernel node j corresponds to offset k0 + j*h; we need offsets covering
    # [-(n-1)h, (n-1)h]
    n = f.grid.n_points
    need_lo = -(n - 1) * h
    need_hi = (n - 1) * h
    if k0 > need_lo + 1e-9 * h or k0 + (nk - 1) * h < need_hi - 1e-9 * h:
        raise ValueError("convolve: kernel lattice too narrow for f's grid")

    # index of the kernel node closest to offset 0
    j0 = int(round(-k0 / h))
    idx = j0 + np.arange(-(n - 1), n)      # offsets -(n-1)h .. (n-1)h
    kband = kv[idx]

    # trapezoid weights on f (interior 1, ends 1/2)
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    g = fv * w

    m = 2 * n - 1
    size = 1
    while size < 2 * m:
        size *= 2
    K = np.fft.fft(kband, size)
    G = np.fft.fft(np.concatenate([g, np.zeros(m - n)]), size)
    full = np.fft.ifft(K * G)[: m]
    # result at theta_i picks kernel offsets (i - j): the aligned slice
    out = full[n - 1: 2 * n - 1] * h
    if not (np.iscomplexobj(kv) or np.iscomplexobj(fv)):
        out = out.real
    meta = {"kernel_edge_warning": warn}
    return SampledFunction(f.grid, out, strip_offset=f.strip_offset,
                           metadata=meta)


def find_root_increasing(f, lo, hi, tol=1e-12):
    """
    Root of a scalar function with a sign change on [lo, hi]: bisection to a
    narrow bracket, then a few Newton (secant) polishing steps. Deterministic.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ValueError("find_root_increasing: no sign change on bracket")
    a, b, fa, fb = lo, hi, flo, fhi
    while b - a > max(tol, 1e-15 * max(abs(a), abs(b), 1.0)):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b, fb = mid, fm
    # secant polish inside the final bracket
    x = a - fa * (b - a) / (fb - fa)
    for _ in range(3):
        fx = f(x)
        if fx == 0.0:
            break
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b, fb = x, fx
        denom = fb - fa
        if denom == 0.0:
            break
        x = a - fa * (b - a) / denom
        x = min(max(x, a), b)
    return x


def fit_exponential_tail(f, exponents, window, cond_max=1e12):
    """
    Least-squares fit f(theta) ~ sum_i a_i exp(exponents[i]*theta) over the
    window (lo, hi) of f's grid. Returns (coefficients, residual_norm).
    """
    lo, hi = window
    x = f.grid.nodes
    sel = (x >= lo) & (x <= hi)
    if np.count_nonzero(sel) < len(exponents) + 1:
        raise ValueError("fit window contains too few samples")
    xs = x[sel]
    ys = f.values[sel]
    design = np.exp(np.outer(xs, np.asarray(exponents, dtype=float)))
    # column scaling keeps the condition number meaningful
    scale = np.max(np.abs(design), axis=0)
    cond = np.linalg.cond(design / scale)
    if cond > cond_max:
        raise ValueError("fit_exponential_tail: ill conditioned design "
                         "matrix (cond = %.3g)" % cond)
    coef_scaled, *_ = np.linalg.lstsq(design / scale, ys, rcond=None)
    coef = coef_scaled / scale
    resid = float(np.linalg.norm(design @ coef - ys))
    if not np.iscomplexobj(ys):
        coef = coef.real
    return list(coef), resid


def brentq(f, a, b, tol=1e-14):
    """Thin wrapper kept in one place so solvers share a root engine."""
    return optimize.brentq(f, a, b, xtol=tol, rtol=8.9e-16, maxiter=200)
