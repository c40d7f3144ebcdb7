import math

import numpy as np
import pytest
from scipy.integrate import solve_bvp

from blz.params import derive
from blz import mshg, nlie, relations

BETA2_A2 = 1.0 / 3.0          # alpha = 2


@pytest.fixture(scope="module")
def ps_a2():
    return derive(BETA2_A2, 0.3, 1.0)


@pytest.fixture(scope="module")
def sol_a2(ps_a2):
    return mshg.solve_mshg(ps_a2.alpha, ps_a2.s, ps_a2.l)


@pytest.fixture(scope="module")
def run_04(sol_a2):
    return mshg.integrate_linear_problem(sol_a2, 0.4)


@pytest.fixture(scope="module")
def sol_l0():
    """Self-conjugate point k=1/4, where l = 0 and the Bloch pair is built
    on the same exponent."""
    ps = derive(BETA2_A2, 0.25, 1.0)
    return mshg.solve_mshg(ps.alpha, ps.s, ps.l)


@pytest.fixture(scope="module")
def zeros_a2(sol_a2, ps_a2):
    """Wide scan of Q_plus covering five explicit zeros of each family."""
    return mshg.ode_zeros(sol_a2, (-4.2, 4.2), which="plus", ps=ps_a2)


class TestSolveMshg:

    def test_radial_oracle_s0(self):
        """At s=0, l=0 the angular modes vanish and the zero mode solves
        the radial two-point problem; compare against an independent
        collocation solution of that reduction."""
        sol = mshg.solve_mshg(2.0, 0.0, 0.0)
        M = (sol.modes.shape[1] - 1) // 2
        assert np.max(np.abs(np.delete(sol.modes, M, axis=1))) < 1e-10
        t = sol.t_grid
        a = 2.0

        def rhs(x, y):
            return np.vstack([y[1],
                              4.0 * np.exp(2.0 * x)
                              * (np.exp(2.0 * y[0])
                                 - np.exp(4.0 * a * x) * np.exp(-2.0 * y[0]))])

        def bc(ya, yb):
            return np.array([ya[1], yb[1] - a])

        x0 = np.linspace(t[0], t[-1], 400)
        y0 = np.vstack([np.where(x0 < 0.0, 0.0, a * x0),
                        np.where(x0 < 0.0, 0.0, a)])
        res = solve_bvp(rhs, bc, x0, y0, tol=1e-9, max_nodes=100000)
        dev = np.abs(res.sol(t)[0] - sol.modes[:, M].real)
        assert dev.max() < 5e-6
        # monotone crossover between the two log slopes
        m0 = sol.modes[:, M].real
        assert np.all(np.diff(m0) > -1e-12)
        assert sol.pde_residual < 1e-9

    def test_fold_symmetry_and_reality(self, sol_a2):
        # phi -> -phi symmetry: mode m equals mode -m; reality on top of
        # that leaves every coefficient real
        assert np.max(np.abs(sol_a2.modes - sol_a2.modes[:, ::-1])) < 1e-10
        assert np.max(np.abs(sol_a2.modes.imag)) < 1e-10

    def test_boundary_asymptotics(self, sol_a2):
        M = (sol_a2.modes.shape[1] - 1) // 2
        t1 = sol_a2.t_grid[-1]
        outer = sol_a2.modes[-1, M].real - sol_a2.alpha * t1
        assert abs(outer) < 1e-6
        # inner intercept: eta - 2 l t flat over the innermost decade
        m0 = sol_a2.modes[:, M].real - 2.0 * sol_a2.l * sol_a2.t_grid
        n10 = len(m0) // 10
        assert np.max(np.abs(m0[:n10] - sol_a2.eta0)) < 1e-6

    def test_mode_doubling(self):
        d8 = {"n_t": 1701, "M_modes": 8}
        d16 = {"n_t": 1701, "M_modes": 16}
        e8 = mshg.solve_mshg(2.0, 0.8, 0.1, discretization=d8).eta0
        e16 = mshg.solve_mshg(2.0, 0.8, 0.1, discretization=d16).eta0
        assert abs(e8 - e16) < 1e-7

    def test_residual_invariant(self, sol_a2):
        assert sol_a2.pde_residual < 1e-9

    def test_input_validation(self):
        with pytest.raises(ValueError):
            mshg.solve_mshg(2.0, 0.8, 0.45)
        with pytest.raises(ValueError):
            mshg.solve_mshg(2.0, -0.1, 0.1)
        with pytest.raises(ValueError):
            mshg.solve_mshg(2.0, 0.8, 0.1,
                            discretization={"t_min": math.log(0.8) - 1.0})


class TestLinearRun:

    def test_psi_wronskian(self, sol_a2, run_04):
        target = -1.0 / math.cos(math.pi * sol_a2.l)
        assert abs(run_04.wronskians["psi_pair"] - target) < 1e-6
        assert run_04.wronskians["psi_drift"] < 1e-5 * abs(target)

    def test_xi_wronskian(self, sol_a2, run_04):
        assert abs(run_04.wronskians["xi_pair"] + 2.0j) < 1e-6
        run = mshg.integrate_linear_problem(sol_a2, 1.2)
        assert abs(run.wronskians["xi_pair"] + 2.0j) < 1e-6

    def test_rho_m_domain(self, sol_a2):
        rho_bad = math.exp(sol_a2.t_grid[0] + 0.5)
        with pytest.raises(ValueError):
            mshg.integrate_linear_problem(sol_a2, 0.3, rho_m=rho_bad)

    def test_rho0_halving(self, sol_a2, ps_a2):
        """Initial-data consistency: pushing the inner edge one octave
        deeper leaves Q unchanged at the 1e-6 level."""
        d = {"t_min": math.log(ps_a2.s) - 12.0 - math.log(2.0),
             "n_t": 5101}
        sol2 = mshg.solve_mshg(ps_a2.alpha, ps_a2.s, ps_a2.l,
                               discretization=d)
        q1 = mshg.spectral_Q(sol_a2, 0.4)
        q2 = mshg.spectral_Q(sol2, 0.4)
        for key in ("Qplus", "Qminus"):
            assert abs(q1[key] - q2[key]) / abs(q1[key]) < 1e-6


class TestSpectralQ:

    def test_reality(self, sol_a2):
        for th in (0.0, 0.3, 1.0):
            q = mshg.spectral_Q(sol_a2, th)
            for key in ("Qplus", "Qminus"):
                assert abs(q[key].imag) / abs(q[key]) < 1e-6

    def test_parity(self, sol_a2):
        for th in (0.3, 1.0):
            qp = mshg.spectral_Q(sol_a2, th)["Qplus"]
            qm = mshg.spectral_Q(sol_a2, -th)["Qminus"]
            assert abs(qp - qm) / abs(qp) < 1e-6

    def test_quantum_wronskian(self, sol_a2, ps_a2):
        """Q_+(u-h) Q_-(u+h) - Q_+(u+h) Q_-(u-h) = -2i cos(pi l), with the
        shifted values taken from the rotated-ray line dictionary."""
        shift = 1j * math.pi / (2.0 * sol_a2.alpha)

        def Qp(u):
            return mshg.spectral_Q_line(sol_a2, u)["Qplus"]

        def Qm(u):
            return mshg.spectral_Q_line(sol_a2, u)["Qminus"]

        thetas = [x - shift for x in (0.0, 0.35, 0.8)]
        rep = relations.check_quantum_wronskian(Qm, Qp, thetas, ps_a2)
        assert rep.max_residual < 1e-5

    def test_line_lattice_validation(self, sol_a2):
        with pytest.raises(ValueError):
            mshg.spectral_Q_line(sol_a2, 0.3 - 0.2j)
        with pytest.raises(ValueError):
            mshg.spectral_Q_line(sol_a2,
                                 0.3 + 1j * math.pi / sol_a2.alpha)


class TestSpectralT:

    def test_T0_is_one(self, sol_a2):
        for th in (0.0, 0.4):
            for route in ("xi", "q"):
                T0 = mshg.spectral_T(sol_a2, th, 0.0, route=route)
                assert abs(T0 - 1.0) < 1e-6

    def test_route_agreement(self, sol_a2):
        for th, j in ((0.0, 0.5), (0.4, 0.5), (0.4, 1.0)):
            Ta = mshg.spectral_T(sol_a2, th, j, route="xi")
            Tb = mshg.spectral_T(sol_a2, th, j, route="q")
            assert abs(Ta - Tb) / abs(Ta) < 1e-5

    def test_degenerate_j(self, sol_a2):
        assert mshg.spectral_T(sol_a2, 0.3, -0.5) == 0.0

    def test_validation(self, sol_a2):
        with pytest.raises(ValueError):
            mshg.spectral_T(sol_a2, 0.3, 0.3)
        with pytest.raises(ValueError):
            mshg.spectral_T(sol_a2, 0.3, 0.5, route="bogus")

    def test_t_system_from_zero_continuation(self, sol_a2, ps_a2,
                                             zeros_a2):
        """Entire continuation of the two spectral determinants by Hadamard
        products over the scanned zeros, calibrated at theta=0; the
        T-family built from that pair closes the Hirota system, which
        probes the constancy of the quantum Wronskian off the real
        lattice."""
        q0 = mshg.spectral_Q(sol_a2, 0.0)
        ps_m = derive(BETA2_A2, -ps_a2.k, ps_a2.r)
        zs_m = nlie.ZeroSet(ps_m, {}, dict(zeros_a2.E_minus),
                            dict(zeros_a2.E_plus))
        Qp = relations.StripFunction(
            lambda u: nlie.hadamard_Q(zeros_a2, ps_a2, u,
                                      q_at_zero=q0["Qplus"]),
            math.inf, "Qp_ode")
        Qm = relations.StripFunction(
            lambda u: nlie.hadamard_Q(zs_m, ps_m, u,
                                      q_at_zero=q0["Qminus"]),
            math.inf, "Qm_ode")
        fam = relations.t_family_from_Q(Qm, Qp, ps_a2, 1.5,
                                        normalization="l")
        assert abs(fam[0.0](0.0) - 1.0) < 1e-4
        rep = relations.check_T_system(fam, [-0.3, 0.0, 0.3], ps_a2, 1.0)
        assert rep.max_residual < 1e-4
        # the continued pair reproduces the direct lateral-run T values
        for th, j in ((0.0, 0.5), (0.4, 1.0)):
            shift = 1j * math.pi * (2.0 * j + 1.0) / (2.0 * ps_a2.alpha)
            had = fam[j](th - shift)
            direct = mshg.spectral_T(sol_a2, th, j)
            assert abs(had - direct) / abs(direct) < 1e-4


class TestOdeZeros:

    def test_symmetry_self_conjugate(self, sol_l0):
        """At k=1/4 the two determinants are each other's theta-reflection,
        so the plus scan and the minus scan produce mirrored zero sets."""
        zp = mshg.ode_zeros(sol_l0, (-3.0, 3.0), which="plus")
        zm = mshg.ode_zeros(sol_l0, (-3.0, 3.0), which="minus")
        assert sorted(zp.E_plus) == sorted(zm.E_minus)
        assert sorted(zp.E_minus) == sorted(zm.E_plus)
        for n in zp.E_plus:
            assert abs(zp.E_plus[n] - zm.E_minus[n]) / zp.E_plus[n] < 1e-5
        for n in zp.E_minus:
            assert abs(zp.E_minus[n] - zm.E_plus[n]) / zp.E_minus[n] < 1e-5

    def test_simple_zeros(self, zeros_a2):
        # every detected zero came from a sign change; no flagged minima
        assert zeros_a2.flagged_minima == []
        assert sorted(zeros_a2.E_plus) == list(range(len(zeros_a2.E_plus)))
        assert sorted(zeros_a2.E_minus) == list(range(len(zeros_a2.E_minus)))
        for E in zeros_a2.E_plus.values():
            assert E > 0.0

    def test_spacing_law_n15(self, sol_a2, ps_a2):
        """Bracket the n=15 zero from the asymptotic law alone and check
        the law's accuracy there."""
        a = ps_a2.alpha
        w = 2.0 * a / (a + 1.0)
        s2a = ps_a2.s ** (2.0 * a)
        E_hat = nlie.zero_asymptote(15, ps_a2.k, a)
        th_hat = math.log(E_hat / s2a) / w
        zs = mshg.ode_zeros(sol_a2, (th_hat - 0.1, th_hat + 0.1),
                            which="plus", ps=ps_a2, scan_step=0.02)
        assert 15 in zs.E_plus
        assert abs(zs.E_plus[15] - E_hat) / E_hat < 0.02

    def test_which_validation(self, sol_a2):
        with pytest.raises(ValueError):
            mshg.ode_zeros(sol_a2, (-1.0, 1.0), which="both")


class TestCrossCheck:

    @pytest.fixture(scope="class")
    def nlie_zeros(self, ps_a2):
        sol = nlie.solve_nlie_massive(ps_a2)
        zs = nlie.find_zeros(sol, -2, 2)
        S = nlie.compute_script_S(sol)
        return zs, S

    def test_self_check(self, nlie_zeros, ps_a2):
        zs, S = nlie_zeros
        report = mshg.cross_check(zs, S, zs, S, ps_a2)
        assert report["max_zero_delta"] == 0.0
        assert report["S_rel_delta"] == 0.0
        assert report["passed"]

    def test_alignment_error(self, nlie_zeros, ps_a2):
        zs, S = nlie_zeros
        gap = nlie.ZeroSet(ps_a2, {},
                           {n: E for n, E in zs.E_plus.items() if n != 1},
                           dict(zs.E_minus))
        with pytest.raises(ValueError):
            mshg.cross_check(gap, S, zs, S, ps_a2)

    def test_param_mismatch(self, nlie_zeros, ps_a2):
        zs, S = nlie_zeros
        with pytest.raises(ValueError):
            mshg.cross_check(zs, S, zs, S, derive(BETA2_A2, 0.2, 1.0))


class TestOmegaDictionary:

    def test_generator_invariance(self, sol_a2):
        """The connection matrix is invariant under the simultaneous shift
        phi -> phi + pi/alpha, theta -> theta - i pi/alpha, which is what
        justifies producing every lateral solution by a rotated-ray rerun
        at shifted parameter."""
        a = sol_a2.alpha
        r0 = mshg._get_ray(sol_a2, 0.0)
        r1 = mshg._get_ray(sol_a2, math.pi / a)
        for t in (-8.0, -2.0, 0.0, 2.0, 4.0):
            for th in (0.0, 0.6):
                M0 = r0.generator(t, th)
                M1 = r1.generator(t, th - 1j * math.pi / a)
                scale = np.max(np.abs(M0))
                assert np.max(np.abs(M1 - M0)) / scale < 1e-12
