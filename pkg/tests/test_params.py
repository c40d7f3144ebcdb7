import math

import pytest
from hypothesis import given, settings, strategies as st

from blz.params import (B_coef, M_coef, asymptotic_constants,
                        conversion_factors, derive, frakC_coefs, m_coef,
                        mu_conversions, tba_masses, _gamma)


class TestDerive:

    def test_alpha_two_point(self):
        ps = derive(1.0 / 3.0, 0.1, 1.0)
        assert abs(ps.xi - 0.5) < 1e-14
        assert abs(ps.alpha - 2.0) < 1e-13
        assert abs(ps.c - (13.0 - 6.0 * (1.0 / 3.0 + 3.0))) < 1e-12
        assert abs(ps.c + 7.0) < 1e-12

    def test_alpha_limit_near_half(self):
        ps = derive(0.4999, 0.0, 1.0)
        assert abs(ps.alpha - 1.0) < 1e-3

    def test_s_from_B(self):
        ps = derive(1.0 / 3.0, 0.0, 1.0)
        assert abs(ps.s - (1.0 / B_coef(2.0)) ** (1.0 / 3.0)) < 1e-13

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            derive(0.5, 0.0, 1.0)
        with pytest.raises(ValueError):
            derive(0.6, 0.0, 1.0)
        with pytest.raises(ValueError):
            derive(0.3, 0.7, 1.0)
        with pytest.raises(ValueError):
            derive(0.3, 0.0, -1.0)

    def test_l_mapping(self):
        assert abs(derive(0.3, 0.3, 1.0).l - 0.1) < 1e-14
        # mirror branch for negative k
        assert abs(derive(0.3, -0.3, 1.0).l - 0.1) < 1e-14

    def test_soliton_mass_roundtrip(self):
        ps = derive(0.3, 0.0, 1.7, R=2.0)
        assert abs(ps.soliton_mass - 0.85) < 1e-14
        xi = ps.xi
        mt = math.sqrt(ps.mu_tilde2)
        rebuilt = (2.0 / math.sqrt(math.pi)) * _gamma(xi / 2) \
            / _gamma(0.5 + xi / 2) \
            * (math.pi * mt * _gamma(1 / (1 + xi))
               / _gamma(xi / (1 + xi))) ** ((1 + xi) / 2)
        assert abs(rebuilt - ps.soliton_mass) < 1e-12

    @given(st.floats(min_value=0.06, max_value=0.44),
           st.floats(min_value=-0.5, max_value=0.5),
           st.floats(min_value=0.01, max_value=8.0))
    @settings(max_examples=60, deadline=None)
    def test_roundtrip_and_identities(self, beta2, k, r):
        ps = derive(beta2, k, r)
        again = derive(ps.beta2, ps.k, ps.r, ps.R)
        assert ps == again
        assert abs(ps.xi - beta2 / (1 - beta2)) < 1e-14
        assert abs(ps.alpha - (1.0 / beta2 - 1.0)) < 1e-10
        assert abs(ps.h - (ps.p ** 2 / beta2 + (ps.c - 1) / 24)) < 1e-10
        assert abs(ps.r - B_coef(ps.alpha) * ps.s ** (1 + ps.alpha)) < 1e-10


class TestClosedFormConstants:

    def test_m_at_xi_half(self):
        expect = (2 * math.sqrt(math.pi) * _gamma(0.25) / _gamma(0.75)
                  * _gamma(2.0 / 3.0) ** 1.5)
        assert abs(m_coef(0.5) - expect) < 1e-12

    def test_M_at_xi_half(self):
        expect = (_gamma(0.25) ** 2 / math.sqrt(math.pi)
                  * _gamma(2.0 / 3.0) ** 1.5)
        assert abs(M_coef(0.5) - expect) < 1e-12

    def test_mass_ratio(self):
        xi = 0.4
        _, masses = tba_masses(xi, 1)
        assert abs(masses[1] / masses[0]
                   - 2.0 * math.cos(math.pi * xi / 2)) < 1e-13

    def test_pole_guard(self):
        with pytest.raises(ValueError):
            m_coef(1.2)

    def test_C0_is_m(self):
        ps = derive(1.0 / 3.0, 0.0, 1.0)
        consts = asymptotic_constants(ps, 3)
        assert consts["m"] == m_coef(ps.xi)
        assert len(consts["C"]) == 3
        assert all(math.isfinite(ck) for ck in consts["C"])

    def test_frakC1_finite_nonzero(self):
        ps = derive(1.0 / 3.0, 0.1, 1.0)
        fc = frakC_coefs(ps, 2)
        assert math.isfinite(fc[0]) and fc[0] != 0.0
        assert math.isfinite(fc[1])


class TestMuConversions:

    def test_composition_closed_form(self):
        # f1 * f2 = (Gamma(beta2)/pi)^2, gammas cancel pairwise; below
        # beta2 = 1/3 every square-root argument is positive so the identity
        # holds exactly, above only up to the branch of the two square roots
        for b in (0.2, 0.3):
            f1, f2 = conversion_factors(b)
            assert abs(f1 * f2 - (_gamma(b) / math.pi) ** 2) < 1e-12 * abs(
                f1 * f2)
        f1, f2 = conversion_factors(0.42)
        assert abs(abs(f1 * f2) - (_gamma(0.42) / math.pi) ** 2) < 1e-12

    def test_finite_at_beta2_03(self):
        out = mu_conversions(derive(0.3, 0.0, 1.0))
        for v in out.values():
            assert abs(v) > 0 and abs(v) < float("inf")
        # below beta2 = 1/3 every gamma argument is positive
        for arg in (0.3, 0.9, 0.7, 0.1):
            assert _gamma(arg) > 0

    def test_singularities_detected(self):
        with pytest.raises(ValueError):
            conversion_factors(1.0 / 3.0)
        with pytest.raises(ValueError):
            conversion_factors(0.5 - 1e-14)

    def test_derive_survives_singular_point(self):
        ps = derive(1.0 / 3.0, 0.1, 1.0)
        assert math.isnan(ps.mu_hat2)
        assert ps.mu_tilde2 > 0
