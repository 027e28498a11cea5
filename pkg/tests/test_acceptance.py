"""Acceptance suite: closed-form reproduction, convergence, covariance.

Each test prints one pass line with its measured worst case and wall time;
tolerances are fixed here and match the verification contract.
"""

import time

import numpy as np
import pytest

from holonomy import dynamics, framegauge, models, oracles
from holonomy.cases import bundled_cases, make_loop
from holonomy.dynamics import Schedule, adiabatic_predict, eigenvalue_paths
from holonomy.framegauge import GaugeMap, apply_gauge, connection_at, continue_frame, holonomy_matrix
from holonomy.models import (
    ParamPoint,
    berry_spin_half,
    map_spin_half,
    map_spin_threehalf,
    tau_matrices,
    unitary_at,
)
from holonomy.paths import berry_polygon

from conftest import norm

PI = np.pi


def _report(criterion: str, detail: str, started: float):
    print(f"[acceptance] {criterion}: PASS ({detail}, {time.perf_counter()-started:.1f}s)")


def _margin_values(rng, count, lo=0.07, hi=0.95, margin=0.05, tries=1000):
    """Grid fractions (of pi) whose pairwise sums/differences avoid integers."""
    for _ in range(tries):
        a = np.sort(rng.uniform(lo, hi, count))
        b = np.sort(rng.uniform(lo, hi, count))
        ok = True
        for x in a:
            for y in b:
                for v in (x + y, x - y, x, y):
                    if abs(v - round(v)) < margin:
                        ok = False
        if ok:
            return a, b
    raise RuntimeError("no margin-respecting grid found")


class TestCriterion1BerryReproduction:
    def test_latitude_and_meridian(self, rng):
        started = time.perf_counter()
        model = berry_spin_half()
        worst = 0.0
        for _ in range(10):
            theta = rng.uniform(0.3, PI - 0.3)
            base = ParamPoint(theta=theta, phi=rng.uniform(0, 2 * PI), B=rng.uniform(0.5, 2))
            res = holonomy_matrix(model, make_loop(model, "C_phi", base))
            expect = np.diag(
                [np.exp(-1j * PI * (1 - np.cos(theta))), np.exp(1j * PI * (1 - np.cos(theta)))]
            )
            worst = max(worst, norm(res.M - expect))
        meridian = make_loop(model, "C_theta", ParamPoint(theta=0.0, phi=0.4, B=1.0))
        res = holonomy_matrix(model, meridian)
        worst = max(worst, norm(res.M + np.eye(2)))
        elapsed = time.perf_counter() - started
        assert worst < 1e-5
        assert elapsed < 5.0
        _report("criterion 1 (Berry latitude/meridian)", f"worst |dM|={worst:.2e}", started)


class TestCriterion2SolidAngleLaw:
    def test_random_polygons(self, rng):
        started = time.perf_counter()
        model = berry_spin_half()
        worst = 0.0
        for _ in range(10):
            center_t = rng.uniform(0.8, PI - 0.8)
            center_p = rng.uniform(0.8, 2 * PI - 0.8)
            k = int(rng.integers(3, 6))
            angles = np.sort(rng.uniform(0, 2 * PI, k))
            radius = rng.uniform(0.15, 0.35)
            verts = [
                (center_t + radius * np.cos(a), center_p + radius * np.sin(a))
                for a in angles
            ]
            loop = berry_polygon(verts, B=1.0)
            omega = oracles.solid_angle(verts)
            res = holonomy_matrix(model, loop)
            diff = max(
                abs(res.M[0, 0] - np.exp(-0.5j * omega)),
                abs(res.M[1, 1] - np.exp(0.5j * omega)),
                abs(res.M[0, 1]),
                abs(res.M[1, 0]),
            )
            worst = max(worst, float(diff))
        elapsed = time.perf_counter() - started
        assert worst < 1e-4
        assert elapsed < 10.0
        _report("criterion 2 (solid-angle law)", f"worst eigenphase defect={worst:.2e}", started)


class TestCriterion3ExoticSpinHalf:
    def test_meridian_grid_and_strength_loops(self, rng):
        started = time.perf_counter()
        model = map_spin_half(q=0, p=1)  # B_mu = mu, B_lam = lam/2
        a_frac, b_frac = _margin_values(rng, 5)
        worst = 0.0
        for bm in a_frac:
            for bl in b_frac:
                at = ParamPoint(mu=bm * PI, lam=2 * bl * PI, theta=0.0, phi=0.2)
                res = holonomy_matrix(model, make_loop(model, "C_theta", at))
                pred = oracles.predict(model, "C_theta", at)
                worst = max(worst, norm(res.M - pred.M_expected))
        for q in (0, 1, 3):
            for p in (0, 1, 3):
                m = map_spin_half(q=q, p=p)
                mu0 = 0.6 * PI / (2 - q)
                at = ParamPoint(mu=mu0, lam=0.0, theta=0.4 * PI, phi=0.3)
                res = holonomy_matrix(m, make_loop(m, "C_lam", at))
                pred = oracles.predict(m, "C_lam", at)
                worst = max(worst, norm(res.M - pred.M_expected))
                assert res.permutation == ((1, 0) if p % 2 else (0, 1)), (q, p)
                lam0 = 0.6 * PI / (2 - p)
                at = ParamPoint(mu=0.0, lam=lam0, theta=0.4 * PI, phi=0.3)
                res = holonomy_matrix(m, make_loop(m, "C_mu", at))
                pred = oracles.predict(m, "C_mu", at)
                worst = max(worst, norm(res.M - pred.M_expected))
                assert res.permutation == ((1, 0) if q % 2 else (0, 1)), (q, p)
        elapsed = time.perf_counter() - started
        assert worst < 1e-5
        assert elapsed < 60.0
        _report(
            "criterion 3 (exotic holonomy, spin-1/2 map)",
            f"worst |dM|={worst:.2e} over 25 meridian + 18 strength loops",
            started,
        )


class TestCriterion4EigenvalueAnholonomy:
    def test_swap_parity_over_lambda(self, rng):
        from holonomy.errors import HolonomyError

        started = time.perf_counter()
        count = 0
        for _ in range(200):
            if count >= 10:
                break
            q = int(rng.integers(0, 4))
            p = int(rng.integers(0, 4))
            if p == 2 or q == 2:   # lambda or mu coupling frozen: degenerate sweeps
                continue
            m = map_spin_half(q=q, p=p)
            mu = rng.uniform(0.2, 0.8) * 2 * PI / abs(2 - q)
            at = ParamPoint(mu=mu, lam=0.0, theta=rng.uniform(0.2, PI - 0.2), phi=0.1)
            try:
                _, tracked = eigenvalue_paths(m, make_loop(m, "C_lam", at), 1024)
            except HolonomyError:
                continue
            if p % 2:
                assert abs(tracked[-1, 0] - tracked[0, 1]) < 1e-8
                assert abs(tracked[-1, 1] - tracked[0, 0]) < 1e-8
            else:
                assert abs(tracked[-1, 0] - tracked[0, 0]) < 1e-8
                assert abs(tracked[-1, 1] - tracked[0, 1]) < 1e-8
            count += 1
        assert count == 10
        _report("criterion 4 (eigenvalue anholonomy)", "10 parameter samples", started)


class TestCriterion5KramersSuite:
    def test_clifford_and_kramers_degeneracy(self, rng):
        started = time.perf_counter()
        tau = tau_matrices().generators
        worst = 0.0
        for a in range(5):
            for b in range(5):
                anti = tau[a] @ tau[b] + tau[b] @ tau[a]
                worst = max(worst, norm(anti - 2.0 * (a == b) * np.eye(4)))
        assert worst < 1e-14
        m = map_spin_threehalf(q=1, p=1)
        for _ in range(10):
            at = ParamPoint(
                mu=rng.uniform(0.3, 5.9), lam=rng.uniform(0.3, 5.9),
                theta=rng.uniform(0.2, PI - 0.2), eta=rng.uniform(0, 2 * PI),
                chi=rng.uniform(0, 2 * PI), phi=rng.uniform(0, 2 * PI),
            )
            if models.degeneracy_predicate(m, at) != "clear":
                continue
            phases = np.sort(np.angle(np.linalg.eigvals(unitary_at(m, at))))
            gaps = np.sort(np.diff(np.concatenate([phases, [phases[0] + 2 * PI]])))
            assert gaps[0] < 1e-10 and gaps[1] < 1e-10   # two exact pairs
        _report(
            "criterion 5a (Clifford relations + Kramers degeneracy)",
            f"anticommutator defect={worst:.1e}", started,
        )

    def test_holonomy_grid_all_loops(self, rng):
        started = time.perf_counter()
        m = map_spin_threehalf(q=1, p=1)
        a_frac, b_frac = _margin_values(rng, 3)
        angles = dict(eta=0.8, chi=0.5, phi=0.9)
        worst = 0.0
        runs = 0
        for bm, bl in zip(a_frac, b_frac):
            # strengths: B = mu/2 at q=1, so mu = 2 B_mu
            mu, lam = 2 * bm * PI, 2 * bl * PI
            for kind in ("C_theta", "C_mu", "C_lam", "C_eta", "C_phi", "C_chi"):
                for theta_frac in (0.27, 0.41, 0.62):
                    at = ParamPoint(mu=mu, lam=lam, theta=theta_frac * PI, **angles)
                    if kind == "C_theta":
                        # meridian sweeps theta itself; vary the azimuth instead
                        at = at.replace(theta=0.0, phi=theta_frac * PI)
                    else:
                        coord = kind[2:]
                        at = at.replace(**{coord: 0.0})
                    res = holonomy_matrix(m, make_loop(m, kind, at))
                    pred = oracles.predict(m, kind, at)
                    worst = max(worst, norm(res.M - pred.M_expected))
                    runs += 1
        elapsed = time.perf_counter() - started
        assert worst < 1e-5
        assert elapsed < 120.0
        _report(
            "criterion 5b (spin-3/2 closed forms, chi-loop axis angle "
            "atan2(cos(zen) sin(eta), cos(eta)))",
            f"worst |dM|={worst:.2e} over {runs} loops", started,
        )


class TestCriterion6AdiabaticConvergence:
    @pytest.mark.parametrize(
        "label", ["berry_latitude", "half_lambda"]
    )
    def test_monotone_deviation_and_permutation(self, label):
        started = time.perf_counter()
        if label == "berry_latitude":
            model = berry_spin_half()
            loop = make_loop(model, "C_phi", ParamPoint(theta=1.1, phi=0.0, B=1.0))
        else:
            model = map_spin_half(q=0, p=1)
            loop = make_loop(
                model, "C_lam", ParamPoint(mu=0.6 * PI, lam=0.0, theta=PI / 3, phi=0.3)
            )
        hol = holonomy_matrix(model, loop)
        devs = []
        for L in (2**10, 2**12, 2**14, 2**16):
            rep = adiabatic_predict(model, Schedule(loop, L=L), holonomy=hol)
            devs.append(rep.deviation)
        assert all(d1 > d2 for d1, d2 in zip(devs, devs[1:])), devs
        assert devs[-1] < 0.05
        f0 = hol.frame_start.columns
        u_whole = rep.U_whole
        overlaps = np.abs(f0.conj().T @ u_whole @ f0)
        exact_perm = tuple(int(np.argmax(overlaps[:, n])) for n in range(model.dim))
        assert exact_perm == hol.permutation
        elapsed = time.perf_counter() - started
        assert elapsed < 120.0
        _report(
            f"criterion 6 ({label})",
            "deviation " + " > ".join(f"{d:.1e}" for d in devs) + f", perm={exact_perm}",
            started,
        )


class TestCriterion7GaugeCovariance:
    def test_random_diag_perm_gauges(self, rng):
        started = time.perf_counter()
        model = map_spin_half(q=0, p=1)
        loop = make_loop(model, "C_lam", ParamPoint(mu=0.6 * PI, lam=0.0, theta=PI / 3, phi=0.3))
        n = 512
        res = holonomy_matrix(model, loop, steps=n, auto_refine=False)
        frames = continue_frame(model, loop, steps=n)
        conns = [connection_at(frames[i - 1 : i + 2]) for i in range(1, len(frames) - 1)]
        for _ in range(20):
            perm = rng.permutation(2)
            pmat = np.zeros((2, 2))
            pmat[perm, np.arange(2)] = 1.0
            coeff = rng.standard_normal((2, 3))

            def fn(t, pmat=pmat, coeff=coeff):
                phases = (
                    coeff[:, 0]
                    + coeff[:, 1] * np.sin(2 * PI * t)
                    + coeff[:, 2] * (np.cos(2 * PI * t) - 1.0)
                )
                return pmat @ np.diag(np.exp(1j * phases))

            _, _, nh = apply_gauge(frames, conns, res, GaugeMap(fn, form="diag-times-permutation"))
            before = np.sort(np.angle(np.linalg.eigvals(res.M)))
            after = np.sort(np.angle(np.linalg.eigvals(nh.M)))
            assert norm(before - after) < 1e-6
            inv = np.argsort(perm)
            expected = tuple(int(inv[res.permutation[perm[j]]]) for j in range(2))
            assert nh.permutation == expected
        _report("criterion 7 (gauge covariance)", "20 random diag x perm gauges", started)


class TestCriterion8ParallelTransport:
    def test_identity_on_bundled_loops(self):
        started = time.perf_counter()
        worst_b, worst_mw = 0.0, 0.0
        for case in bundled_cases():
            res = holonomy_matrix(case.model, case.loop)
            worst_b = max(worst_b, norm(res.B - np.eye(case.model.dim)))
            worst_mw = max(worst_mw, norm(res.M - res.W))
        assert worst_b < 1e-6
        assert worst_mw < 1e-6
        _report(
            "criterion 8 (parallel-transport identity)",
            f"|B-I|<={worst_b:.1e}, |M-W|<={worst_mw:.1e} on {len(bundled_cases())} loops",
            started,
        )


class TestCriterion9ConnectionOracle:
    CASES = [
        ("berry", "theta"), ("berry", "phi"),
        ("half", "theta"), ("half", "phi"), ("half", "lam"), ("half", "mu"),
        ("threehalf", "theta"), ("threehalf", "mu"), ("threehalf", "lam"),
        ("threehalf", "eta"), ("threehalf", "phi"), ("threehalf", "chi"),
    ]

    def test_finite_difference_order(self):
        from test_framegauge import _finite_difference_connection

        started = time.perf_counter()
        points = {
            "berry": (berry_spin_half(), ParamPoint(theta=1.1, phi=0.3, B=1.0)),
            "half": (
                map_spin_half(q=0, p=1),
                ParamPoint(mu=0.6 * PI, lam=0.55 * PI, theta=0.4 * PI, phi=0.3),
            ),
            "threehalf": (
                map_spin_threehalf(q=1, p=1),
                ParamPoint(mu=0.55 * PI, lam=0.6 * PI, theta=0.4 * PI, eta=0.8, chi=0.5, phi=0.9),
            ),
        }
        worst_order = np.inf
        for name, direction in self.CASES:
            model, pt = points[name]
            exact = framegauge.analytic_connection(model, pt, direction).A
            errs = [
                norm(_finite_difference_connection(model, pt, direction, h) - exact)
                for h in (2e-3, 1e-3, 5e-4)
            ]
            if max(errs) < 1e-12:
                continue
            orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
            worst_order = min(worst_order, min(orders))
        assert worst_order >= 1.9
        _report(
            "criterion 9 (connection oracle)",
            f"observed convergence order >= {worst_order:.2f}", started,
        )
