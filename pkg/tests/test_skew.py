import numpy as np
import pytest

from trifloq.errors import (ArgumentError, InsufficientSamplingError,
                            IntegrationError, StructureError)
from trifloq.skew import (SkewRHS, TorusBasePoint, bounded_solution_linear,
                          cover_cardinality, difference_quotient_coefficients,
                          fiber_distal_profile, hyperbolicity_check,
                          linearize_along, omega_limit, skew_orbit, skew_step,
                          torus_distance)

HURWITZ = np.array([[-2.0, 1.0], [1.0, -2.0]])
SADDLE = np.array([[0.0, 1.0], [1.0, 0.0]])
OMEGA1 = (np.sqrt(2.0) - 1.0,)


def forced_linear(M, amp=(0.01, 0.0), omega=OMEGA1, name="forced"):
    """x' = M x + amp .* (sin, cos)(2 pi theta), d = 1."""
    M = np.asarray(M, dtype=float)

    def f1(theta, x1, x2):
        return M[0, 0] * x1 + M[0, 1] * x2 + amp[0] * np.sin(2 * np.pi * theta[0])

    def f2(theta, x1, x2):
        return M[1, 0] * x1 + M[1, 1] * x2 + amp[1] * np.cos(2 * np.pi * theta[0])

    parts = [lambda theta, x1, x2: (M[0, 0], M[0, 1]),
             lambda theta, x1, x2: (M[1, 0], M[1, 1])]
    return SkewRHS(2, 1, omega, [f1, f2], eps0=0.5, partials=parts, name=name)


def bistable(coupling=0.3, amp=0.05, omega=OMEGA1):
    """Cubic bistable pair with cooperative coupling and weak forcing."""
    def f1(theta, x1, x2):
        return x1 - x1 ** 3 + coupling * (x2 - x1) + amp * np.sin(2 * np.pi * theta[0])

    def f2(theta, x1, x2):
        return x2 - x2 ** 3 + coupling * (x1 - x2)

    parts = [lambda theta, x1, x2: (1.0 - 3.0 * x1 ** 2 - coupling, coupling),
             lambda theta, x1, x2: (coupling, 1.0 - 3.0 * x2 ** 2 - coupling)]
    return SkewRHS(2, 1, omega, [f1, f2], eps0=0.2, partials=parts, name="bistable")


class TestTorusBase:
    def test_roundtrip_exact(self):
        p = TorusBasePoint.at([0.3, 0.7], [1.0, np.sqrt(2.0)])
        q = p.advance(7.3).advance(-7.3)
        assert np.array_equal(q.phase, p.phase)

    def test_phase_formula(self):
        p = TorusBasePoint.at([0.5], [0.25])
        assert np.allclose(p.advance(2.0).phase, [0.0])

    def test_distance_wraps(self):
        assert torus_distance([0.95], [0.05]) == pytest.approx(0.1)


class TestSkewStep:
    def test_cocycle(self):
        f = forced_linear(HURWITZ, amp=(0.3, 0.2))
        rng = np.random.default_rng(1)
        for _ in range(3):
            t, s = rng.uniform(-3, 3, size=2)
            x0, th0 = rng.standard_normal(2) * 0.3, rng.uniform(0, 1, 1)
            x_ts, th_ts = skew_step(f, x0, th0, t + s)
            x_t, th_t = skew_step(f, x0, th0, t)
            x_s2, th_s2 = skew_step(f, x_t, th_t, s)
            assert np.allclose(x_ts, x_s2, atol=1e-8)
            assert torus_distance(th_ts, th_s2) <= 1e-9

    def test_autonomous_reduces_to_plain_integration(self):
        def f1(theta, x1, x2):
            return -2 * x1 + x2

        def f2(theta, x1, x2):
            return x1 - 2 * x2

        f = SkewRHS(2, 0, (), [f1, f2], eps0=0.5, name="auto")
        x, th = skew_step(f, [1.0, 0.0], (), 1.0)
        import scipy.linalg
        assert np.allclose(x, scipy.linalg.expm(HURWITZ) @ [1.0, 0.0], atol=1e-8)
        assert th.size == 0

    def test_bounded_forced_orbit(self):
        f = forced_linear(HURWITZ, amp=(0.3, 0.3))
        orbit = skew_orbit(f, [0.0, 0.0], [0.0], 0.0, 200.0, bound=5.0)
        assert np.max(np.abs(orbit.traj.states)) < 1.0

    def test_floor_violation_rejected_at_construction(self):
        def f1(theta, x1, x2):
            return -x1 + 0.01 * x2

        def f2(theta, x1, x2):
            return 0.01 * x1 - x2

        with pytest.raises(ArgumentError):
            SkewRHS(2, 1, OMEGA1, [f1, f2], eps0=0.5)


class TestOmegaLimit:
    def test_hurwitz_graph(self):
        f = forced_linear(HURWITZ)
        oset = omega_limit(f, [0.5, -0.5], [0.0], transient=30.0, horizon=300.0,
                           sample_dt=0.05, bound=5.0)
        assert oset.sample_count > 5000
        assert oset.invariance_residual <= 1e-7

    def test_stable_equilibrium_single_point(self):
        def f1(theta, x1, x2):
            return -2 * (x1 - 1.0) + (x2 - 1.0)

        def f2(theta, x1, x2):
            return (x1 - 1.0) - 2 * (x2 - 1.0)

        f = SkewRHS(2, 0, (), [f1, f2], eps0=0.5, name="equilibrium")
        oset = omega_limit(f, [0.3, 1.4], (), transient=40.0, horizon=20.0,
                           sample_dt=0.1, bound=10.0)
        assert oset.diameter() <= 1e-7

    def test_unbounded_aborts(self):
        def f1(theta, x1, x2):
            return x1 + x2

        def f2(theta, x1, x2):
            return x1 + x2

        f = SkewRHS(2, 0, (), [f1, f2], eps0=0.5, name="runaway")
        with pytest.raises(IntegrationError) as err:
            omega_limit(f, [1.0, 1.0], (), transient=1.0, horizon=20.0,
                        sample_dt=0.1, bound=50.0)
        assert err.value.last_state is not None

    def test_circle_coverage(self):
        f = forced_linear(HURWITZ)
        oset = omega_limit(f, [0.0, 0.0], [0.0], transient=20.0, horizon=300.0,
                           sample_dt=0.05, bound=5.0)
        phases = np.sort(oset.thetas[:, 0])
        gaps = np.diff(np.concatenate([phases, [phases[0] + 1.0]]))
        assert np.max(gaps) <= 2.0 * oset.sample_dt * abs(OMEGA1[0]) + 1e-6


class TestLinearize:
    def test_linear_system_recovers_matrix(self):
        f = forced_linear(HURWITZ, amp=(0.2, 0.1))
        orbit = skew_orbit(f, [0.1, 0.2], [0.3], 0.0, 5.0)
        B = linearize_along(f, orbit)
        assert np.allclose(B.matrix(2.0), HURWITZ, atol=1e-12)

    def test_tanh_partials_within_bounds(self):
        def f1(theta, x1, x2):
            return -x1 + np.tanh(x2)

        def f2(theta, x1, x2):
            return np.tanh(x1) - x2

        f = SkewRHS(2, 0, (), [f1, f2], eps0=0.05, check_box=(-1.5, 1.5),
                    name="tanh-skew")
        orbit = skew_orbit(f, [0.5, -0.5], (), 0.0, 3.0)
        B = linearize_along(f, orbit)
        for t in (0.0, 1.0, 2.5):
            _, u, lo = B.bands(t)
            assert 0.05 <= u[0] <= 1.0 and 0.05 <= lo[0] <= 1.0

    def test_difference_quotient_near_jacobian(self):
        f = bistable()
        a = skew_orbit(f, [0.9, 1.1], [0.0], 0.0, 3.0)
        b = skew_orbit(f, [0.92, 1.08], [0.0], 0.0, 3.0)
        Bq = difference_quotient_coefficients(f, a, b)
        B = linearize_along(f, a)
        gap = np.max(np.abs(Bq.matrix(1.0) - B.matrix(1.0)))
        assert gap <= 0.2  # O(|x1 - x2|)


class TestHyperbolicity:
    def test_hurwitz_not_hyperbolic(self):
        f = forced_linear(HURWITZ, amp=(0.3, 0.2))
        oset = omega_limit(f, [0.0, 0.0], [0.0], transient=30.0, horizon=60.0,
                           sample_dt=0.1, bound=5.0)
        rep = hyperbolicity_check(f, oset, horizon=150.0, warmup=30.0,
                                  window_lengths=(10.0, 25.0), bound=5.0)
        assert rep.verdict == "not_hyperbolic"
        assert rep.unstable_dim == 0
        assert not rep.contains_zero

    def saddle_setup(self, M, amp):
        from trifloq.skew import AnalyticOrbit, omega_set_from_orbit

        f = forced_linear(M, amp=(amp, 0.0))
        span = (0.0, 215.0)
        sol = bounded_solution_linear(
            M, lambda t: np.array([amp * np.sin(2 * np.pi * OMEGA1[0] * t), 0.0]),
            span=span)
        orbit = AnalyticOrbit(x_eval=sol, theta_anchor=np.zeros(1), t_anchor=0.0,
                              omega=f.omega, t_span=span)
        oset = omega_set_from_orbit(f, orbit, 0.0, 60.0, 0.1)
        return f, orbit, oset

    def test_saddle_hyperbolic(self):
        # an unstable minimal set cannot be re-traced by forward
        # integration from samples; the analytic orbit carries the check
        f, orbit, oset = self.saddle_setup(SADDLE, 0.2)
        assert oset.invariance_residual <= 1e-7
        rep = hyperbolicity_check(f, oset, horizon=150.0, warmup=30.0,
                                  window_lengths=(10.0, 25.0), orbits=[orbit])
        assert rep.verdict == "hyperbolic"
        assert rep.unstable_dim == 1

    def test_shift_flips_verdict(self):
        # pushing the diagonal up by 1.5 moves the spectrum {-3,-1} to
        # {-1.5, 0.5}: zero enters the unstable side and N becomes 1
        f, orbit, oset = self.saddle_setup(HURWITZ + 1.5 * np.eye(2), 0.05)
        rep = hyperbolicity_check(f, oset, horizon=150.0, warmup=30.0,
                                  window_lengths=(10.0, 25.0), orbits=[orbit])
        assert rep.verdict == "hyperbolic"
        assert rep.unstable_dim == 1


class TestBoundedSolution:
    def test_zero_forcing(self):
        sol = bounded_solution_linear(SADDLE, lambda t: np.zeros(2), span=(0.0, 10.0))
        assert np.max(np.abs(sol.states)) <= 1e-9

    def test_constant_forcing_equilibrium(self):
        b = np.array([1.0, -0.5])
        sol = bounded_solution_linear(HURWITZ, lambda t: b, span=(0.0, 10.0))
        ref = -np.linalg.solve(HURWITZ, b)
        for t in (0.0, 5.0, 10.0):
            assert np.allclose(sol(t), ref, atol=1e-8)

    def test_saddle_periodic_forcing(self):
        sol = bounded_solution_linear(
            SADDLE, lambda t: np.array([np.sin(2 * np.pi * t), 0.0]),
            span=(0.0, 5.0))
        assert sol.residual <= 1e-8
        assert np.allclose(sol(0.0), sol(1.0), atol=1e-7)  # periodic
        assert np.allclose(sol(0.25), sol(1.25), atol=1e-7)

    def test_zero_in_spectrum_rejected(self):
        M = np.array([[0.0, 1.0], [0.0, -1.0]])  # eigenvalues {0, -1}
        with pytest.raises(ArgumentError):
            bounded_solution_linear(M, lambda t: np.zeros(2))


class TestCover:
    def make_set(self, amp=0.01):
        f = forced_linear(HURWITZ, amp=(amp, amp))
        return omega_limit(f, [0.0, 0.0], [0.0], transient=50.0, horizon=300.0,
                           sample_dt=0.05, bound=5.0)

    def test_unique_graph_single_cluster(self):
        oset = self.make_set()
        rep = cover_cardinality(oset, [0.5], cluster_tol=1e-3, r_fiber=5e-3)
        assert rep.cluster_count == 1
        assert max(rep.diameters) <= 1e-3

    def test_two_sheets_detected(self):
        f = bistable()
        up = omega_limit(f, [1.0, 1.0], [0.0], transient=60.0, horizon=300.0,
                         sample_dt=0.05, bound=5.0)
        dn = omega_limit(f, [-1.0, -1.0], [0.0], transient=60.0, horizon=300.0,
                         sample_dt=0.05, bound=5.0)
        from trifloq.skew import OmegaSetApproximation
        merged = OmegaSetApproximation(
            points=np.vstack([up.points, dn.points]),
            thetas=np.vstack([up.thetas, dn.thetas]),
            transient=up.transient, sample_dt=up.sample_dt,
            invariance_residual=max(up.invariance_residual, dn.invariance_residual),
            omega=up.omega)
        rep = cover_cardinality(merged, [0.5], cluster_tol=0.1, r_fiber=1e-2)
        assert rep.cluster_count == 2

    def test_insufficient_sampling(self):
        oset = self.make_set()
        with pytest.raises(InsufficientSamplingError) as err:
            cover_cardinality(oset, [0.5], r_fiber=1e-6)
        assert err.value.count < 30

    def test_degenerate_tolerance_warns(self):
        oset = self.make_set()
        with pytest.warns(UserWarning):
            rep = cover_cardinality(oset, [0.5], cluster_tol=1e3, r_fiber=0.5)
        assert rep.cluster_count == 1


class TestFiberDistal:
    def test_bistable_constant_sigma(self):
        f = bistable()
        # land both orbits on their minimal sets by a long pre-run
        pre = 100.0
        H = 50.0
        th_start = np.mod(np.asarray([0.0]) - OMEGA1[0] * (pre + H), 1.0)
        up = skew_orbit(f, [1.0, 1.0], th_start, -(pre + H), -H)
        dn = skew_orbit(f, [-1.0, -1.0], th_start, -(pre + H), -H)
        th_H = np.mod(th_start + OMEGA1[0] * pre, 1.0)
        rep = fiber_distal_profile(f, (up.x(-H), th_H), (dn.x(-H), th_H),
                                   horizon=H, anchor="start")
        assert rep.profile.values == [0]
        assert rep.forward_gap > 1.0 and rep.backward_gap > 1.0

    def test_attracted_perturbation(self):
        f = forced_linear(HURWITZ, amp=(0.2, 0.1))
        sol = bounded_solution_linear(
            HURWITZ,
            lambda t: np.array([0.2 * np.sin(2 * np.pi * OMEGA1[0] * t),
                                0.1 * np.cos(2 * np.pi * OMEGA1[0] * t)]),
            span=(-15.0, 15.0))
        x_star = sol(0.0)
        rep = fiber_distal_profile(f, (x_star + np.array([1e-4, 0.0]), [0.0]),
                                   (x_star, [0.0]), horizon=10.0, anchor="center")
        assert rep.forward_gap < 1e-8
        assert rep.backward_gap >= 1e-4 / 2

    def test_swap_symmetric(self):
        f = bistable()
        pre, H = 100.0, 20.0
        th_start = np.mod(np.asarray([0.0]) - OMEGA1[0] * (pre + H), 1.0)
        up = skew_orbit(f, [1.0, 1.0], th_start, -(pre + H), -H)
        dn = skew_orbit(f, [-1.0, -1.0], th_start, -(pre + H), -H)
        th_H = np.mod(th_start + OMEGA1[0] * pre, 1.0)
        r1 = fiber_distal_profile(f, (up.x(-H), th_H), (dn.x(-H), th_H),
                                  horizon=H, anchor="start")
        r2 = fiber_distal_profile(f, (dn.x(-H), th_H), (up.x(-H), th_H),
                                  horizon=H, anchor="start")
        assert r1.forward_gap == pytest.approx(r2.forward_gap, rel=1e-9)
        assert r1.profile.values == r2.profile.values

    def test_same_orbit_rejected(self):
        f = bistable()
        with pytest.raises(ArgumentError):
            fiber_distal_profile(f, ([1.0, 1.0], [0.0]), ([1.0, 1.0], [0.0]),
                                 horizon=5.0, anchor="start")

    def test_different_theta_rejected(self):
        f = bistable()
        with pytest.raises(ArgumentError):
            fiber_distal_profile(f, ([1.0, 1.0], [0.0]), ([-1.0, -1.0], [0.5]),
                                 horizon=5.0)
