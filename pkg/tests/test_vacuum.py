import math

import numpy as np
import pytest

from blz.params import _gamma
from blz.vacuum import (VacuumPoint, coulomb_first_order, g2_vacuum,
                        vacuum_local_IM, vertex_pair)


class TestVacuumPoint:

    def test_relations(self):
        vp = VacuumPoint(1.0 / 3.0, 0.1)
        assert abs(vp.c + 7.0) < 1e-12
        assert abs(vp.h - (0.01 * 3.0 + (vp.c - 1.0) / 24.0)) < 1e-12

    def test_excluded_weights(self):
        with pytest.raises(ValueError):
            VacuumPoint(0.3, -0.15)       # 2p = -beta2
        with pytest.raises(ValueError):
            VacuumPoint(0.3, -0.65)       # 2p = -beta2 - 1

    def test_beta2_domain(self):
        with pytest.raises(ValueError):
            VacuumPoint(0.6, 0.0)


class TestVertexPair:

    def test_opposite_charges_at_pi(self):
        vp = VacuumPoint(0.3, 0.0)
        got = vertex_pair(math.pi, 0.0, +1, -1, vp)
        assert abs(got - 2.0 ** (2 * 0.3)) < 1e-12

    def test_swap_symmetry(self):
        vp = VacuumPoint(0.25, 0.1)
        a = vertex_pair(1.3, 0.4, +1, -1, vp)
        b = vertex_pair(0.4, 1.3, -1, +1, vp)
        assert abs(a - b) < 1e-12

    def test_conjugation(self):
        vp = VacuumPoint(0.25, 0.1)
        a = vertex_pair(1.3, 0.4, +1, -1, vp)
        b = vertex_pair(0.4, 1.3, +1, -1, vp)
        assert abs(a - np.conj(b)) < 1e-12

    def test_coincident_error(self):
        vp = VacuumPoint(0.25, 0.1)
        with pytest.raises(ValueError):
            vertex_pair(1.0, 1.0, +1, +1, vp)


class TestG2:

    def test_closed_at_p_zero(self):
        b = 0.25
        got = g2_vacuum(VacuumPoint(b, 0.0), "closed")
        assert abs(got - 4.0 * math.pi ** 2 * _gamma(1 - 2 * b)
                   / _gamma(1 - b) ** 2) < 1e-10

    def test_p_symmetry(self):
        vp1 = g2_vacuum(VacuumPoint(0.3, 0.12), "closed")
        vp2 = g2_vacuum(VacuumPoint(0.3, -0.12), "closed")
        assert abs(vp1 - vp2) < 1e-12

    def test_quadrature_matches_closed_lattice(self):
        for b in (0.1, 0.2, 0.3, 0.4):
            pmax = (1.0 - b - 0.05) / 2.0
            for p in np.linspace(-pmax, pmax, 5):
                vp = VacuumPoint(b, float(p))
                cl = g2_vacuum(vp, "closed")
                qd = g2_vacuum(vp, "quadrature")
                assert abs(qd / cl - 1.0) < 1e-6

    def test_pole_error(self):
        with pytest.raises(ValueError):
            g2_vacuum(VacuumPoint(0.3, 0.35), "closed")   # 1-2p-b = 0


class TestLocalIM:

    def test_zero_point(self):
        vp = VacuumPoint.__new__(VacuumPoint)   # bypass to hit (h,c)=(0,0)
        object.__setattr__(vp, "beta2", 0.3)
        object.__setattr__(vp, "p", 0.0)

        class Fake:
            h = 0.0
            c = 0.0
        for n in (1, 2, 3):
            assert vacuum_local_IM(Fake, n) == 0.0

    def test_I1(self):
        class Fake:
            h = 0.5
            c = 0.5
        assert abs(vacuum_local_IM(Fake, 1) - (0.5 - 1.0 / 48.0)) < 1e-14

    def test_I3_constant_term(self):
        class Fake:
            h = 0.0
            c = 2.7
        expect = 2.7 * (5 * 2.7 + 22.0) / (4.0 * math.factorial(6))
        assert abs(vacuum_local_IM(Fake, 2) - expect) < 1e-14

    def test_bad_n(self):
        with pytest.raises(ValueError):
            vacuum_local_IM(VacuumPoint(0.3, 0.0), 4)


class TestCoulombFirstOrder:

    def test_closed_form_oracle(self):
        b = 0.3
        vp = VacuumPoint(b, 0.0)
        for N in (0, 1, 2, 3):
            got = coulomb_first_order(vp, 1.0, N)
            oracle = ((-1) ** N * _gamma(1 - 2 * b)
                      / (_gamma(1 - b + N) * _gamma(1 - b - N)))
            assert abs(got - oracle) < 1e-9

    def test_N0_matches_p0_G2(self):
        b = 0.25
        vp = VacuumPoint(b, 0.0)
        got = coulomb_first_order(vp, 1.0, 0)
        assert abs(got - g2_vacuum(vp, "closed") / (4.0 * math.pi ** 2)) \
            < 1e-9

    def test_kappa_scaling(self):
        vp = VacuumPoint(0.2, 0.0)
        assert abs(coulomb_first_order(vp, 0.5, 1)
                   - 0.25 * coulomb_first_order(vp, 1.0, 1)) < 1e-14

    def test_real(self):
        assert isinstance(coulomb_first_order(VacuumPoint(0.2, 0.0), 1.0, 2),
                          float)

    def test_integer_N_required(self):
        with pytest.raises(ValueError):
            coulomb_first_order(VacuumPoint(0.2, 0.0), 1.0, 0.5)
