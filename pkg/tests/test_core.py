import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blz.core import (RapidityGrid, SampledFunction, brentq, convolve,
                      find_root_increasing, fit_exponential_tail, log_gamma)


def symmetric_kernel_lattice(grid, func):
    """Kernel sampled on the difference lattice of `grid`."""
    n = grid.n_points
    h = grid.spacing
    kg = RapidityGrid(-(n - 1) * h, (n - 1) * h, 2 * n - 1)
    return SampledFunction(kg, func(kg.nodes))


class TestLogGamma:

    def test_gamma_one(self):
        assert log_gamma(1.0) == 0.0

    def test_gamma_half(self):
        assert abs(log_gamma(0.5) - math.log(math.sqrt(math.pi))) < 1e-14

    def test_gamma_five(self):
        assert abs(log_gamma(5.0) - math.log(24.0)) < 1e-13

    def test_pole_raises(self):
        with pytest.raises(ValueError):
            log_gamma(-3.0)

    def test_real_on_positive_axis(self):
        assert log_gamma(7.3).imag == 0.0

    @given(st.floats(min_value=-40, max_value=40),
           st.floats(min_value=-40, max_value=40))
    @settings(max_examples=60, deadline=None)
    def test_recurrence(self, x, y):
        z = complex(x, y)
        if abs(y) < 1e-3 and x <= 0.5:
            return  # stay away from the pole line
        lhs = log_gamma(z + 1) - log_gamma(z)
        # compare exp to avoid branch-cut bookkeeping of the logs
        assert abs(np.exp(lhs) - z) < 1e-9 * max(1.0, abs(z))


class TestConvolve:

    def setup_method(self):
        self.grid = RapidityGrid(-20.0, 20.0, 1024)

    def test_delta_identity(self):
        h = self.grid.spacing
        n = self.grid.n_points
        shift_nodes = 7
        f = SampledFunction(self.grid, np.exp(-self.grid.nodes ** 2))

        def delta(x):
            v = np.zeros_like(x)
            v[np.argmin(np.abs(x - shift_nodes * h))] = 1.0 / h
            return v

        kern = symmetric_kernel_lattice(self.grid, delta)
        out = convolve(kern, f)
        # out(theta) = f(theta - shift); compare away from the edges
        sl = slice(shift_nodes + 2, n - 2)
        expect = f.values[: n - shift_nodes]
        assert np.max(np.abs(out.values[sl]
                             - expect[2: n - shift_nodes - 2])) < 1e-12

    def test_parity(self):
        x = self.grid.nodes
        f = SampledFunction(self.grid, x * np.exp(-x ** 2))
        kern = symmetric_kernel_lattice(self.grid,
                                        lambda t: np.exp(-t ** 2 / 2))
        out = convolve(kern, f).values
        assert np.max(np.abs(out + out[::-1])) < 1e-12

    def test_gaussian_gaussian(self):
        a, b = 0.8, 1.3

        def gauss(t, w):
            return np.exp(-t ** 2 / (2 * w ** 2)) / (w * math.sqrt(2 * math.pi))

        f = SampledFunction(self.grid, gauss(self.grid.nodes, b))
        kern = symmetric_kernel_lattice(self.grid, lambda t: gauss(t, a))
        out = convolve(kern, f)
        w = math.hypot(a, b)
        assert np.max(np.abs(out.values - gauss(self.grid.nodes, w))) < 1e-8

    def test_linearity(self):
        rng = np.random.default_rng(7)
        x = self.grid.nodes
        env = np.exp(-x ** 2 / 9)
        f = SampledFunction(self.grid, rng.standard_normal(x.size) * env)
        g = SampledFunction(self.grid, rng.standard_normal(x.size) * env)
        kern = symmetric_kernel_lattice(self.grid,
                                        lambda t: np.exp(-np.abs(t)))
        af_bg = SampledFunction(self.grid, 2.0 * f.values - 3.5 * g.values)
        lhs = convolve(kern, af_bg).values
        rhs = 2.0 * convolve(kern, f).values - 3.5 * convolve(kern, g).values
        assert np.max(np.abs(lhs - rhs)) < 1e-11 * np.max(np.abs(rhs))

    def test_spacing_mismatch(self):
        f = SampledFunction(self.grid, np.zeros(self.grid.n_points))
        other = RapidityGrid(-5.0, 5.0, 64)
        kern = SampledFunction(other, np.zeros(64))
        with pytest.raises(ValueError):
            convolve(kern, f)

    def test_edge_warning_flag(self):
        f = SampledFunction(self.grid, np.exp(-self.grid.nodes ** 2))
        kern = symmetric_kernel_lattice(self.grid,
                                        lambda t: 1.0 / (1.0 + t ** 2))
        out = convolve(kern, f)
        assert out.metadata["kernel_edge_warning"]


class TestRootFinding:

    def test_sinh(self):
        assert abs(find_root_increasing(math.sinh, -1.0, 2.0)) < 1e-12

    def test_linear(self):
        assert abs(find_root_increasing(lambda x: x - 1.0, 0.0, 3.0)
                   - 1.0) < 1e-12

    def test_asinh_pi(self):
        root = find_root_increasing(lambda x: math.sinh(x) - math.pi,
                                    0.0, 4.0)
        assert abs(root - math.asinh(math.pi)) < 1e-12

    def test_no_sign_change(self):
        with pytest.raises(ValueError):
            find_root_increasing(lambda x: x * x + 1.0, -1.0, 1.0)

    @given(st.floats(min_value=-3, max_value=3))
    @settings(max_examples=40, deadline=None)
    def test_bracket_refinement_stable(self, c):
        f = lambda x: math.tanh(x - c)
        r1 = find_root_increasing(f, c - 2.0, c + 3.0)
        r2 = find_root_increasing(f, c - 0.5, c + 0.25)
        assert abs(r1 - r2) < 1e-10

    def test_brentq_wrapper(self):
        assert abs(brentq(lambda x: x ** 3 - 8.0, 0.0, 5.0) - 2.0) < 1e-12


class TestTailFit:

    def setup_method(self):
        self.grid = RapidityGrid(0.0, 10.0, 512)

    def test_single_exponential(self):
        f = SampledFunction(self.grid, 3.0 * np.exp(-self.grid.nodes))
        coef, resid = fit_exponential_tail(f, [-1.0], (2.0, 8.0))
        assert abs(coef[0] - 3.0) < 1e-10
        assert resid < 1e-10

    def test_two_exponentials(self):
        x = self.grid.nodes
        f = SampledFunction(self.grid, 2.0 * np.exp(x) - 5.0 * np.exp(-x))
        coef, _ = fit_exponential_tail(f, [1.0, -1.0], (1.0, 6.0))
        assert abs(coef[0] - 2.0) < 1e-9
        assert abs(coef[1] + 5.0) < 1e-9

    def test_ill_conditioned(self):
        f = SampledFunction(self.grid, np.exp(-self.grid.nodes))
        with pytest.raises(ValueError):
            # two nearly identical exponents over a short window
            fit_exponential_tail(f, [-1.0, -1.0 + 1e-9], (4.0, 4.5),
                                 cond_max=1e6)
