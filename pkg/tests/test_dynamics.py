import numpy as np
import pytest

from holonomy import dynamics, framegauge, models
from holonomy.cases import make_loop
from holonomy.dynamics import (
    Schedule,
    adiabatic_predict,
    eigenvalue_paths,
    fujikawa_F,
    hamiltonian_flow,
    stroboscopic_evolve,
)
from holonomy.errors import UnsupportedError
from holonomy.matcore import mat_exp
from holonomy.models import SY, SZ, ParamPoint, berry_spin_half, map_spin_half, unitary_at
from holonomy.paths import point_loop

from conftest import norm

PI = np.pi

BERRY = berry_spin_half()
HALF = map_spin_half(q=0, p=1)
HALF_PT = ParamPoint(mu=0.6 * PI, lam=0.0, theta=PI / 3, phi=0.3)
BERRY_PT = ParamPoint(theta=1.1, phi=0.0, B=1.0)


class TestStroboscopic:
    def test_single_kick(self):
        sched = Schedule(point_loop(HALF_PT.replace(lam=0.4)), L=1)
        got = stroboscopic_evolve(HALF, sched)
        assert norm(got - unitary_at(HALF, HALF_PT.replace(lam=0.4))) < 1e-14

    def test_constant_schedule_power(self):
        pt = HALF_PT.replace(lam=0.4)
        sched = Schedule(point_loop(pt), L=7)
        got = stroboscopic_evolve(HALF, sched)
        assert norm(got - np.linalg.matrix_power(unitary_at(HALF, pt), 7)) < 1e-13

    def test_berry_rejected(self):
        with pytest.raises(UnsupportedError):
            stroboscopic_evolve(BERRY, Schedule(point_loop(BERRY_PT), L=2))

    def test_slow_sweep_lands_on_permuted_eigenvector(self):
        # odd p over the lambda loop: each eigenstate flows into its partner
        loop = make_loop(HALF, "C_lam", HALF_PT)
        u_whole = stroboscopic_evolve(HALF, Schedule(loop, L=10_000))
        f0 = models.eigenvectors_at(HALF, HALF_PT).columns
        hol = framegauge.holonomy_matrix(HALF, loop)
        assert hol.permutation == (1, 0)
        for n in range(2):
            final = u_whole @ f0[:, n]
            target = f0[:, hol.permutation[n]]
            assert abs(np.vdot(target, final)) > 0.99


class TestEigenvaluePaths:
    def test_swap_for_odd_p(self):
        loop = make_loop(HALF, "C_lam", HALF_PT)
        _, tracked = eigenvalue_paths(HALF, loop, 1024)
        assert abs(tracked[-1, 0] - tracked[0, 1]) < 1e-8
        assert abs(tracked[-1, 1] - tracked[0, 0]) < 1e-8

    def test_fixed_for_even_p(self):
        m = map_spin_half(q=1, p=0)
        base = ParamPoint(mu=0.6 * PI, lam=0.0, theta=PI / 3, phi=0.3)
        loop = make_loop(m, "C_lam", base)
        _, tracked = eigenvalue_paths(m, loop, 1024)
        assert abs(tracked[-1, 0] - tracked[0, 0]) < 1e-8
        assert abs(tracked[-1, 1] - tracked[0, 1]) < 1e-8


class TestAdiabaticPredict:
    def test_small_l_is_nonadiabatic(self):
        loop = make_loop(HALF, "C_lam", HALF_PT)
        rep = adiabatic_predict(HALF, Schedule(loop, L=10))
        assert rep.deviation > 0.05

    def test_deviation_decreases_with_l(self):
        loop = make_loop(BERRY, "C_phi", BERRY_PT)
        hol = framegauge.holonomy_matrix(BERRY, loop)
        devs = [
            adiabatic_predict(BERRY, Schedule(loop, L=L), holonomy=hol).deviation
            for L in (2**10, 2**16)
        ]
        assert devs[1] < devs[0]

    def test_survival_probability_diagonal_meridian(self):
        # r even: the meridian holonomy is a plain sign,each eigenstate survives
        m = map_spin_half(q=0, p=1)
        at = ParamPoint(mu=0.1 * PI, lam=0.6 * PI, theta=0.0, phi=0.2)
        loop = make_loop(m, "C_theta", at)
        f0 = models.eigenvectors_at(m, at).columns
        u_whole = stroboscopic_evolve(m, Schedule(loop, L=2**14))
        for n in range(2):
            assert abs(np.vdot(f0[:, n], u_whole @ f0[:, n])) > 0.999

    def test_dynamical_factor_unimodular(self):
        loop = make_loop(HALF, "C_lam", HALF_PT)
        rep = adiabatic_predict(HALF, Schedule(loop, L=512))
        d = np.diag(rep.dynamical_factor)
        assert norm(np.abs(d) - 1.0) < 1e-12

    def test_extracted_holonomy_matches_integrator(self):
        # strip the dynamical factor from the exact evolution: what is left
        # in the frame representation is the holonomy matrix
        loop = make_loop(HALF, "C_lam", HALF_PT)
        rep = adiabatic_predict(HALF, Schedule(loop, L=2**14))
        f0 = rep.holonomy.frame_start.columns
        d_inv = np.diag(1.0 / np.diag(rep.dynamical_factor))
        m_extracted = f0.conj().T @ rep.U_whole @ f0 @ d_inv
        assert norm(m_extracted - rep.holonomy.M) < 3 * rep.deviation + 1e-6

    def test_mirrored_mu_loop_evolution(self):
        # loops over mu close only in the half-lambda composition; the
        # evolve path must use it consistently end to end
        m = map_spin_half(q=1, p=0)
        base = ParamPoint(mu=0.0, lam=0.6 * PI, theta=0.4 * PI, phi=0.3)
        loop = make_loop(m, "C_mu", base)
        rep = adiabatic_predict(m, Schedule(loop, L=2**13))
        assert rep.holonomy.permutation == (1, 0)
        assert rep.deviation < 0.02

    def test_breadth_of_convergence_on_bundled_loops(self):
        # spot checks beyond the two acceptance loops
        from holonomy.cases import bundled_cases

        for case in bundled_cases():
            if case.name not in ("half_mu_swap", "threehalf_eta"):
                continue
            devs = [
                adiabatic_predict(case.model, Schedule(case.loop, L=L)).deviation
                for L in (2**10, 2**13)
            ]
            assert devs[1] < devs[0], case.name


class TestHamiltonianFlow:
    def test_static_hamiltonian(self):
        loop = point_loop(BERRY_PT)
        t_total = 3.7
        got = hamiltonian_flow(BERRY, loop, T=t_total, L=64)
        h = models.hamiltonian_at(BERRY, BERRY_PT)
        assert norm(got - mat_exp(h, scale=-1j * t_total)) < 1e-12

    def test_latitude_flow_reproduces_geometric_phase(self):
        # subtracting the dynamical phases leaves exp(-i pi (1-cos) sigma_z)
        base = BERRY_PT.replace(theta=PI / 2)
        loop = make_loop(BERRY, "C_phi", base)
        L = 2**15
        rep = adiabatic_predict(BERRY, Schedule(loop, L=L, T=float(L)))
        assert rep.deviation < 0.01
        expect = mat_exp(SZ, scale=-1j * PI)  # theta = pi/2
        assert norm(rep.holonomy.M - expect) < 1e-5

    def test_first_order_in_step_count(self):
        loop = make_loop(BERRY, "C_phi", BERRY_PT)
        t_total = 200.0
        ref = hamiltonian_flow(BERRY, loop, T=t_total, L=4096)
        errs = [
            norm(hamiltonian_flow(BERRY, loop, T=t_total, L=L) - ref)
            for L in (256, 512)
        ]
        order = np.log2(errs[0] / errs[1])
        assert order > 0.8

    def test_map_rejected(self):
        with pytest.raises(UnsupportedError):
            hamiltonian_flow(HALF, point_loop(HALF_PT), T=1.0, L=4)


class TestFujikawaF:
    def test_static_limit_is_eigenvalue_matrix(self):
        f = fujikawa_F(BERRY, BERRY_PT, "theta", sdot=0.0)
        assert norm(f - np.diag([1.0, -1.0])) < 1e-12

    def test_berry_theta_direction(self):
        f = fujikawa_F(BERRY, BERRY_PT, "theta", sdot=1.0)
        assert norm(f - (np.diag([1.0, -1.0]) - 0.5 * SY)) < 1e-12

    def test_hermitian_at_random_points(self, rng):
        for _ in range(5):
            pt = ParamPoint(
                theta=rng.uniform(0.2, PI - 0.2),
                phi=rng.uniform(0, 2 * PI),
                B=rng.uniform(0.5, 2.0),
            )
            f = fujikawa_F(BERRY, pt, "phi", sdot=rng.uniform(-2, 2))
            assert norm(f - f.conj().T) < 1e-10

    def test_diagonal_part_structure(self):
        # diagonal of F is H^D minus the diagonal connection times sdot
        pt = BERRY_PT
        sdot = 1.7
        f = fujikawa_F(BERRY, pt, "phi", sdot=sdot)
        ad = framegauge.analytic_connection(BERRY, pt, "phi").A_diag
        expect = np.diag([pt["B"], -pt["B"]]) - ad * sdot
        assert norm(np.diag(np.diag(f)) - expect) < 1e-12
