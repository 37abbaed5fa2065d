import numpy as np
import pytest
import scipy.linalg

from trifloq.coeffs import Modulus, TridiagCoefficients
from trifloq.errors import ArgumentError, IntegrationError
from trifloq.integrate import (TridiagRHS, difference_trajectory,
                               fundamental_matrix, integrate_linear,
                               integrate_nonlinear)
from trifloq.signchain import sigma_profile


def constant(M, eps0=0.5):
    return TridiagCoefficients.constant(np.asarray(M, dtype=float), eps0=eps0)


SWAP = [[0.0, 1.0], [1.0, 0.0]]


class TestLinear:
    def test_zero_field(self):
        A = TridiagCoefficients(
            2, lambda t: np.zeros(2), lambda t: np.zeros(1), lambda t: np.zeros(1),
            eps0=1.0, bound=1.0, modulus=Modulus.constant(), floor_weakened=True)
        traj = integrate_linear(A, [2.0, -3.0], 0.0, 1.0)
        assert np.allclose(traj.final_state, [2.0, -3.0], atol=1e-12)

    def test_cosh_sinh(self):
        traj = integrate_linear(constant(SWAP), [1.0, 0.0], 0.0, 1.0)
        assert np.allclose(traj.final_state, [np.cosh(1.0), np.sinh(1.0)], rtol=1e-8)

    def test_superposition(self):
        rng = np.random.default_rng(2)
        A = constant(np.diag([-0.5, 0.2, 0.1]) + np.diag([1, 1.5], 1) + np.diag([2, 0.7], -1))
        x0, y0 = rng.standard_normal(3), rng.standard_normal(3)
        a, b = 1.7, -0.3
        fa = integrate_linear(A, x0, 0.0, 3.0).final_state
        fb = integrate_linear(A, y0, 0.0, 3.0).final_state
        fab = integrate_linear(A, a * x0 + b * y0, 0.0, 3.0).final_state
        assert np.allclose(fab, a * fa + b * fb, rtol=1e-8, atol=1e-10)

    def test_backward_forward_roundtrip(self):
        A = constant(SWAP)
        x0 = np.array([0.3, -1.2])
        mid = integrate_linear(A, x0, 0.0, 7.0).final_state
        back = integrate_linear(A, mid, 7.0, 0.0).final_state
        assert np.allclose(back, x0, rtol=1e-6)

    def test_interpolant_matches_grid(self):
        traj = integrate_linear(constant(SWAP), [1.0, 0.5], 0.0, 2.0)
        for t, x in zip(traj.times, traj.states):
            assert np.array_equal(traj(t), x)

    def test_outside_span_rejected(self):
        traj = integrate_linear(constant(SWAP), [1.0, 0.5], 0.0, 2.0)
        with pytest.raises(ArgumentError):
            traj(3.0)


class TestFundamentalMatrix:
    def test_identity_at_start(self):
        fm = fundamental_matrix(constant(SWAP), 0.0, 1.0)
        assert np.allclose(fm(0.0), np.eye(2), atol=1e-12)

    def test_matches_expm(self):
        M = np.diag([-0.2, 0.3, 0.0]) + np.diag([1.0, 0.8], 1) + np.diag([0.9, 1.1], -1)
        fm = fundamental_matrix(constant(M), 0.0, 1.0)
        err = np.linalg.norm(fm.final - scipy.linalg.expm(M)) / np.linalg.norm(scipy.linalg.expm(M))
        assert err <= 1e-8

    def test_cocycle(self):
        def band(t):
            return np.array([1.0 + 0.4 * np.sin(t)])

        A = TridiagCoefficients(2, lambda t: np.array([0.1, -0.2]), band, band,
                                eps0=0.5, bound=2.0, modulus=Modulus.general())
        f20 = fundamental_matrix(A, 0.0, 2.0).final
        f10 = fundamental_matrix(A, 0.0, 1.0).final
        f21 = fundamental_matrix(A, 1.0, 2.0).final
        assert np.allclose(f20, f21 @ f10, rtol=1e-7, atol=1e-9)

    def test_liouville(self):
        M = np.diag([0.5, -0.5]) + np.diag([2.0], 1) + np.diag([2.0], -1)
        fm = fundamental_matrix(constant(M), 0.0, 5.0)
        assert fm.liouville_residual(5.0) < 1e-6


class TestNonlinear:
    def test_linear_consistency(self):
        A = constant(SWAP)
        f = TridiagRHS(
            2,
            [lambda t, x1, x2: x2, lambda t, x1, x2: x1],
            eps0=0.5, name="swap-nl")
        x0 = [0.4, -0.1]
        xa = integrate_linear(A, x0, 0.0, 2.0).final_state
        xb = integrate_nonlinear(f, x0, 0.0, 2.0).final_state
        assert np.allclose(xa, xb, rtol=1e-7, atol=1e-9)

    def test_decoupled_rejected_at_construction(self):
        with pytest.raises(ArgumentError):
            TridiagRHS(
                2,
                [lambda t, x1, x2: x1 * (1 - x1), lambda t, x1, x2: x2 * (1 - x2)],
                eps0=0.5, name="logistic-decoupled")

    def test_forced_hurwitz_bounded(self):
        f = TridiagRHS(
            2,
            [lambda t, x1, x2: -2 * x1 + x2 + np.sin(2 * np.pi * t),
             lambda t, x1, x2: x1 - 2 * x2],
            eps0=0.5, name="hurwitz-forced")
        traj = integrate_nonlinear(f, [0.0, 0.0], 0.0, 100.0, grid_dt=0.1)
        assert np.max(np.abs(traj.states)) <= 1.0

    def test_analytic_partials(self):
        f = TridiagRHS(
            2,
            [lambda t, x1, x2: -x1 + np.tanh(x2), lambda t, x1, x2: np.tanh(x1) - x2],
            eps0=0.1,
            partials=[lambda t, x1, x2: (-1.0, 1.0 / np.cosh(x2) ** 2),
                      lambda t, x1, x2: (1.0 / np.cosh(x1) ** 2, -1.0)],
            check_box=(-1.0, 1.0), name="tanh")
        d, u, lo = f.jacobian_bands(0.0, np.array([0.3, -0.2]))
        assert u[0] == pytest.approx(1.0 / np.cosh(-0.2) ** 2)
        assert lo[0] == pytest.approx(1.0 / np.cosh(0.3) ** 2)

    def test_fd_partials_match_analytic(self):
        fs = [lambda t, x1, x2: -x1 + np.tanh(x2),
              lambda t, x1, x2: np.tanh(x1) - x2]
        fd = TridiagRHS(2, fs, eps0=0.1, check_box=(-1.0, 1.0), name="tanh-fd")
        d, u, lo = fd.jacobian_bands(0.0, np.array([0.3, -0.2]))
        assert u[0] == pytest.approx(1.0 / np.cosh(-0.2) ** 2, rel=1e-7)

    def test_declared_bound_aborts(self):
        f = TridiagRHS(
            2,
            [lambda t, x1, x2: x1 + x2, lambda t, x1, x2: x1 + x2],
            eps0=0.5, name="exploding")
        with pytest.raises(IntegrationError):
            integrate_nonlinear(f, [1.0, 1.0], 0.0, 10.0, bound=10.0)

    def test_difference_sigma_nonincreasing(self):
        f = TridiagRHS(
            3,
            [lambda t, x1, x2: -x1 + np.tanh(x2) + 0.3 * np.sin(t),
             lambda t, x1, x2, x3: np.tanh(x1) - x2 + np.tanh(x3),
             lambda t, x2, x3: np.tanh(x2) - x3],
            eps0=0.1, check_box=(-1.0, 1.0), name="tanh3")
        rng = np.random.default_rng(8)
        a = integrate_nonlinear(f, rng.standard_normal(3) * 0.5, 0.0, 15.0)
        b = integrate_nonlinear(f, rng.standard_normal(3) * 0.5, 0.0, 15.0)
        prof = sigma_profile(difference_trajectory(a, b), max_dt=0.05)
        vals = prof.values
        assert all(y < x for x, y in zip(vals[:-1], vals[1:]))
