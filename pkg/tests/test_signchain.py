import numpy as np
import pytest

from trifloq.coeffs import TridiagCoefficients
from trifloq.errors import ArgumentError
from trifloq.integrate import integrate_linear
from trifloq.signchain import in_lambda, lambda_margin, sigma, sigma_profile


def exact_in_lambda(x):
    """Reference predicate, straight from the definition (integer inputs)."""
    if x[0] == 0 or x[-1] == 0:
        return False
    for i in range(1, len(x) - 1):
        if x[i] == 0 and not x[i - 1] * x[i + 1] < 0:
            return False
    return True


def exact_sigma(x):
    return sum(1 for i in range(len(x) - 1) if x[i] == 0 or x[i] * x[i + 1] < 0)


class TestInLambda:
    def test_no_zeros(self):
        assert in_lambda([1, 2, 3]) is True

    def test_interior_zero_same_signs(self):
        assert in_lambda([1, 0, 1]) is False

    def test_zero_endpoint(self):
        assert in_lambda([0, 1, 1]) is False

    def test_interior_zero_opposite_signs(self):
        assert in_lambda([1, 0, -1]) is True

    def test_zero_vector_rejected(self):
        with pytest.raises(ArgumentError):
            in_lambda([0.0, 0.0, 0.0])

    def test_snapping(self):
        # coordinate inside the band counts as zero
        assert in_lambda([1.0, 1e-12, 1.0]) is False
        assert in_lambda([1.0, 1e-12, -1.0]) is True


class TestSigma:
    def test_constant_sign(self):
        assert sigma([3, 2, 1, 0.5]).value == 0

    def test_alternating(self):
        assert sigma([1, -1, 1, -1]).value == 3

    def test_counted_zero(self):
        r = sigma([1, 0, -1])
        assert r.value == 1 and r.defined

    def test_undefined_outside_domain(self):
        r = sigma([1, 0, 1])
        assert not r.defined and r.value == -1

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            x = rng.standard_normal(6)
            r = sigma(x)
            if not r.defined:
                continue
            for a in (2.0, -3.0, 1e-7, -1e5):
                assert sigma(a * x).value == r.value

    def test_ambiguous_flag(self):
        r = sigma([1.0, 1e-12, -1.0])
        assert r.ambiguous and r.defined

    def test_matches_exact_predicate_on_integer_vectors(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            n = rng.integers(2, 9)
            x = rng.integers(-3, 4, size=n)
            if np.all(x == 0):
                continue
            assert in_lambda(x.astype(float)) == exact_in_lambda(x)
            r = sigma(x.astype(float))
            if exact_in_lambda(x):
                assert r.defined and r.value == exact_sigma(x)
            else:
                assert not r.defined


class TestMargin:
    def test_all_ones(self):
        assert lambda_margin([1, 1, 1]) == pytest.approx(1.0)

    def test_zero_with_positive_product(self):
        assert lambda_margin([1, 0, 1]) == 0.0

    def test_sqrt_term(self):
        # max(|0|, sqrt(-(2)(-2))) = 2, min(2, 2, 2) / 2 = 1
        assert lambda_margin([2, 0, -2]) == pytest.approx(1.0)

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = rng.standard_normal(5)
            m = lambda_margin(x)
            assert lambda_margin(7.5 * x) == pytest.approx(m, rel=1e-12)
            assert lambda_margin(-0.002 * x) == pytest.approx(m, rel=1e-12)

    def test_positive_iff_in_domain(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            x = rng.integers(-2, 3, size=5).astype(float)
            if np.all(x == 0):
                continue
            assert (lambda_margin(x) > 0) == exact_in_lambda(x)


def swap_system():
    return TridiagCoefficients.constant(np.array([[0.0, 1.0], [1.0, 0.0]]), eps0=1.0)


class TestSigmaProfile:
    def test_dominant_direction_stays_zero(self):
        traj = integrate_linear(swap_system(), [1.0, 1.0], 0.0, 10.0)
        prof = sigma_profile(traj, max_dt=0.05)
        assert prof.values == [0]
        assert prof.drop_times == []

    def test_subdominant_direction_stays_one(self):
        traj = integrate_linear(swap_system(), [1.0, -1.0], 0.0, 10.0)
        prof = sigma_profile(traj, max_dt=0.05)
        assert prof.values == [1]

    def test_initially_undefined_then_zero(self):
        # x(t) = (sinh t, cosh t): x_1(0) = 0, both coordinates positive after
        traj = integrate_linear(swap_system(), [0.0, 1.0], 0.0, 5.0)
        prof = sigma_profile(traj, max_dt=0.02)
        assert prof.values == [0]
        assert any(t < 0.05 for t in prof.undefined_times)

    def test_generic_drop_localized(self):
        # start with one sign change plus a dominant-mode component:
        # sigma drops 1 -> 0 at a single localized time
        traj = integrate_linear(swap_system(), [1.0, -0.5], 0.0, 10.0)
        prof = sigma_profile(traj, max_dt=0.02)
        assert prof.values == [1, 0]
        assert len(prof.drop_times) == 1
        # x_1(t) + x_2(t) = 0.5 e^t - ... explicit: x(t) = a e^t (1,1) + b e^-t (1,-1)
        # with a = 0.25, b = 0.75; drop when x_2 = 0: tanh t = 1/3... solve:
        # a e^t = b e^-t  =>  t = ln(b/a)/2 = ln(3)/2
        assert prof.drop_times[0] == pytest.approx(np.log(3.0) / 2.0, abs=1e-6)
        assert prof.drop_margins[0] < 1e-4

    def test_zero_trajectory_rejected(self):
        traj = integrate_linear(swap_system(), [1.0, 1.0], 0.0, 1.0)
        traj.states = np.zeros_like(traj.states)

        class Zero:
            times = traj.times

            def __call__(self, t):
                return np.zeros(2)

        with pytest.raises(ArgumentError):
            sigma_profile(Zero())


def random_cooperative(rng, n):
    d = rng.uniform(-1.0, 1.0, size=n)
    u = rng.uniform(0.5, 2.0, size=n - 1)
    lo = rng.uniform(0.5, 2.0, size=n - 1)
    M = np.diag(d) + np.diag(u, 1) + np.diag(lo, -1)
    return TridiagCoefficients.constant(M, eps0=0.5)


class TestMonotonicityProperty:
    def test_sigma_nonincreasing_on_random_systems(self):
        rng = np.random.default_rng(99)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            A = random_cooperative(rng, n)
            x0 = rng.standard_normal(n)
            traj = integrate_linear(A, x0, 0.0, 20.0)
            prof = sigma_profile(traj, max_dt=0.05)  # raises on violation
            vals = prof.values
            assert all(b < a for a, b in zip(vals[:-1], vals[1:]))
