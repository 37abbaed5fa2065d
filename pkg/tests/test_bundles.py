import numpy as np
import pytest
import scipy.linalg

from trifloq.bundles import (angle_between, bundle_along_orbit, dimension_check,
                             floquet_bundle_pushforward,
                             floquet_solution_truncation, frame_evolution)
from trifloq.coeffs import Modulus, TridiagCoefficients, TrigBand, from_trig_bands
from trifloq.errors import ConvergenceError
from trifloq.signchain import sigma

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
SYM3 = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])


def constant(M, eps0=0.5):
    return TridiagCoefficients.constant(np.asarray(M, dtype=float), eps0=eps0)


def quasi_periodic_3(seed=0, amp=0.25):
    """n=3 cooperative system with two-frequency bands."""
    rng = np.random.default_rng(seed)
    freqs = np.array([1.0, np.sqrt(2.0)]) / (2 * np.pi)
    d = TrigBand(const=rng.uniform(-0.5, 0.5, 3),
                 terms=[(rng.uniform(-amp, amp, 3), [1, 0], "sin"),
                        (rng.uniform(-amp, amp, 3), [0, 1], "cos")],
                 frequencies=freqs)
    u = TrigBand(const=rng.uniform(1.0, 1.6, 2),
                 terms=[(rng.uniform(-amp, amp, 2), [1, 0], "cos")],
                 frequencies=freqs)
    lo = TrigBand(const=rng.uniform(1.0, 1.6, 2),
                  terms=[(rng.uniform(-amp, amp, 2), [0, 1], "sin")],
                  frequencies=freqs)
    return from_trig_bands(3, d, u, lo, eps0=0.5,
                           modulus=Modulus.quasi_periodic(freqs), name=f"qp3-{seed}")


def eig_oracle(M):
    """Eigen directions of a constant cooperative tridiagonal matrix,
    ordered by descending eigenvalue, sign-normalized."""
    lam, V = np.linalg.eig(M)
    order = np.argsort(lam.real)[::-1]
    V = V[:, order].real
    for m in range(V.shape[1]):
        V[:, m] /= np.linalg.norm(V[:, m])
        if V[0, m] < 0:
            V[:, m] = -V[:, m]
    return lam.real[order], V


class TestPushforward:
    def test_constant_sym3_matches_eig(self):
        A = constant(SYM3)
        frame = floquet_bundle_pushforward(A, warmup=30.0)
        _, V = eig_oracle(SYM3)
        for m in range(3):
            assert angle_between(frame.vectors[:, m], V[:, m]) <= 1e-8

    def test_dominant_mode_n2(self):
        A = constant(SWAP)
        frame = floquet_bundle_pushforward(A, warmup=25.0)
        assert np.allclose(frame.vectors[:, 0], [1, 1] / np.sqrt(2), atol=1e-8)
        assert np.allclose(frame.vectors[:, 1], [1, -1] / np.sqrt(2), atol=1e-8)

    def test_frame_invariance_over_seeds(self):
        A = quasi_periodic_3(3)
        frames = [floquet_bundle_pushforward(A, warmup=40.0, seed=s)
                  for s in range(4)]
        for f in frames[1:]:
            for m in range(3):
                assert angle_between(f.vectors[:, m], frames[0].vectors[:, m]) <= 1e-8

    def test_sigma_labels(self):
        A = quasi_periodic_3(4)
        frame = floquet_bundle_pushforward(A, warmup=40.0)
        for m in range(3):
            assert sigma(frame.vectors[:, m]).value == m
        assert frame.sigma_ok.all()

    def test_degenerate_intersection_detected(self):
        # warmup far too short for the tiny spectral gap: the intersection
        # cannot be resolved as one-dimensional
        M = np.array([[0.0, 1.0], [1.0, 1e-4]])
        A = constant(M)
        with pytest.raises(ConvergenceError):
            floquet_bundle_pushforward(A, warmup=0.5, max_extensions=1,
                                       qr_interval=0.25)


class TestTruncation:
    def test_constant_sym3_mode1(self):
        A = constant(SYM3)
        v = floquet_solution_truncation(A, 1, k_schedule=(2, 4, 8))
        assert np.allclose(v, [1 / np.sqrt(2), 0.0, -1 / np.sqrt(2)], atol=1e-7)

    def test_scalar_shift_leaves_directions(self):
        # adding s(t) I changes gains only; directions equal the constant case
        def diag(t):
            return 0.1 * np.sin(t) * np.ones(3)

        base = TridiagCoefficients.constant(SYM3, eps0=0.5)
        shifted = TridiagCoefficients(
            3, diag, base._upper, base._lower, eps0=0.5, bound=2.0,
            modulus=Modulus.general())
        _, V = eig_oracle(SYM3)
        for m in range(3):
            v = floquet_solution_truncation(shifted, m, k_schedule=(4, 8, 16))
            assert angle_between(v, V[:, m]) <= 1e-6

    def test_agrees_with_pushforward_quasiperiodic(self):
        for seed in (0, 1):
            A = quasi_periodic_3(seed)
            frame = floquet_bundle_pushforward(A, warmup=40.0)
            for m in range(3):
                v = floquet_solution_truncation(A, m, k_schedule=(8, 16, 32, 64),
                                                dir_tol=1e-7)
                assert angle_between(v, frame.vectors[:, m]) <= 1e-6

    def test_no_convergence_error_carries_gaps(self):
        A = quasi_periodic_3(2)
        with pytest.raises(ConvergenceError) as err:
            floquet_solution_truncation(A, 0, k_schedule=(1, 2), dir_tol=1e-14)
        assert len(err.value.history) >= 1


class TestTransport:
    def test_constant_directions_fixed_gains_exponential(self):
        A = constant(SYM3)
        frame = floquet_bundle_pushforward(A, warmup=30.0)
        lam, _ = eig_oracle(SYM3)
        moved = bundle_along_orbit(A, frame, 2.0)
        for m in range(3):
            assert angle_between(moved.vectors[:, m], frame.vectors[:, m]) <= 1e-7
            assert moved.gains[m] == pytest.approx(lam[m] * 2.0, abs=1e-7)

    def test_roundtrip(self):
        A = quasi_periodic_3(5)
        frame = floquet_bundle_pushforward(A, warmup=40.0)
        fwd = bundle_along_orbit(A, frame, 1.5)
        back = bundle_along_orbit(A, fwd, 0.0)
        for m in range(3):
            assert angle_between(back.vectors[:, m], frame.vectors[:, m]) <= 1e-8

    def test_transport_matches_fresh_pushforward(self):
        A = quasi_periodic_3(6)
        frame = floquet_bundle_pushforward(A, warmup=40.0)
        moved = bundle_along_orbit(A, frame, 2.0)
        fresh = floquet_bundle_pushforward(A, t_center=2.0, warmup=40.0)
        for m in range(3):
            assert angle_between(moved.vectors[:, m], fresh.vectors[:, m]) <= 1e-6

    def test_transport_composes(self):
        A = quasi_periodic_3(7)
        frame = floquet_bundle_pushforward(A, warmup=40.0)
        two_hops = bundle_along_orbit(A, bundle_along_orbit(A, frame, 1.0), 2.5)
        one_hop = bundle_along_orbit(A, frame, 2.5)
        for m in range(3):
            assert angle_between(two_hops.vectors[:, m], one_hop.vectors[:, m]) <= 1e-8


class TestDimension:
    def test_pair_dimension(self):
        A = constant(SYM3)
        frame = floquet_bundle_pushforward(A, warmup=30.0)
        rep = dimension_check(A, 0, 1, frame=frame)
        assert rep.dimension == 2 and rep.ok

    def test_single_mode(self):
        A = constant(SYM3)
        frame = floquet_bundle_pushforward(A, warmup=30.0)
        rep = dimension_check(A, 1, 1, frame=frame)
        assert rep.dimension == 1 and rep.ok

    def test_full_range(self):
        A = quasi_periodic_3(8)
        frame = floquet_bundle_pushforward(A, warmup=40.0)
        rep = dimension_check(A, 0, 2, frame=frame)
        assert rep.dimension == 3 and rep.ok and rep.checked > 100


class TestFrameEvolution:
    def test_constant_frames_static(self):
        A = constant(SYM3)
        ev = frame_evolution(A, np.linspace(0.0, 5.0, 26), warmup=30.0)
        _, V = eig_oracle(SYM3)
        for k in (0, 12, 25):
            for m in range(3):
                assert angle_between(ev.frames[k][:, m], V[:, m]) <= 1e-7

    def test_gains_match_eigenvalues(self):
        A = constant(SYM3)
        ts = np.linspace(0.0, 5.0, 26)
        ev = frame_evolution(A, ts, warmup=30.0)
        lam, _ = eig_oracle(SYM3)
        dt = ts[1] - ts[0]
        assert np.allclose(ev.gains / dt, np.tile(lam, (25, 1)), atol=1e-7)

    def test_drift_small_quasiperiodic(self):
        A = quasi_periodic_3(9)
        ev = frame_evolution(A, np.linspace(0.0, 10.0, 51), warmup=40.0)
        assert ev.drift <= 1e-6
        assert ev.sigma_violations == 0
