"""Nonlinear tridiagonal systems as skew-product flows over torus bases.

The driving signal lives on a d-torus advanced by a linear flow
(quasi-periodic forcing; d = 0 degenerates to an autonomous system, d = 1
to periodic forcing). The fiber maps are coordinate functions with the
tridiagonal stencil and a floor on the off-diagonal partials, checked on
every orbit this module produces. On top of the flow itself: omega-limit
set sampling with fiber queries, linearization along orbits feeding the
spectrum machinery, a three-valued hyperbolicity verdict, bounded
solutions of hyperbolic constant-coefficient systems (the fixture
generator for minimal sets), fiber cardinality estimates and one-sided
fiber distal diagnostics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import signchain
from .coeffs import Modulus, TridiagCoefficients
from .errors import (ArgumentError, InsufficientSamplingError,
                     IntegrationError, StructureError)
from .integrate import (DEFAULT_ABS_TOL, DEFAULT_REL_TOL, Trajectory,
                        TridiagRHS, integrate_nonlinear)
from .spectrum import SpectrumEstimate, sacker_sell_estimate


@dataclass(frozen=True)
class TorusBasePoint:
    """Point of the rotation flow on [0,1)^d.

    The phase is always derived from the anchor and the accumulated
    offset, never by stepping, so advancing by t and then -t returns the
    anchor phase exactly.
    """

    theta0: tuple
    omega: tuple
    offset: float = 0.0

    @staticmethod
    def at(theta, omega):
        return TorusBasePoint(theta0=tuple(float(v) for v in np.atleast_1d(theta)),
                              omega=tuple(float(v) for v in np.atleast_1d(omega)))

    @property
    def d(self):
        return len(self.omega)

    @property
    def phase(self):
        th = np.asarray(self.theta0) + np.asarray(self.omega) * self.offset
        return np.mod(th, 1.0)

    def advance(self, t):
        return TorusBasePoint(self.theta0, self.omega, self.offset + t)


def torus_distance(a, b):
    """Euclidean distance on the torus (coordinatewise wrap)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = np.abs(a - b) % 1.0
    d = np.minimum(d, 1.0 - d)
    return float(np.linalg.norm(d))


class SkewRHS:
    """Quasi-periodically driven tridiagonal right-hand side.

    ``fs`` lists coordinate functions g_i(theta, ...) with the same
    neighbor conventions as the time-domain RHS: g_1(theta, x1, x2),
    interior g_i(theta, x_{i-1}, x_i, x_{i+1}), g_n(theta, x_{n-1}, x_n).
    ``partials``, if given, mirrors that layout. Off-diagonal partials
    are sampled over the torus and the declared box at construction and
    must clear eps0.
    """

    def __init__(self, n, d, omega, fs, eps0, partials=None, name="skew",
                 check_box=(-2.0, 2.0), check_samples=64, seed=4100,
                 skip_floor_check=False):
        if len(fs) != n:
            raise ArgumentError(f"expected {n} coordinate functions, got {len(fs)}")
        self.n = int(n)
        self.d = int(d)
        self.omega = np.atleast_1d(np.asarray(omega, dtype=float)) if d else np.zeros(0)
        if self.omega.size != self.d:
            raise ArgumentError("omega must have length d")
        self.fs = list(fs)
        self.partials = None if partials is None else list(partials)
        self.eps0 = float(eps0)
        self.name = name
        if not skip_floor_check:
            rng = np.random.default_rng(seed)
            thetas = rng.uniform(0.0, 1.0, size=(check_samples, max(self.d, 1)))
            xs = rng.uniform(*check_box, size=(check_samples, n))
            for th, x in zip(thetas, xs):
                self.check_floor(th[: self.d], x, err=ArgumentError)

    def _args(self, i, x):
        if i == 0:
            return (x[0], x[1])
        if i == self.n - 1:
            return (x[self.n - 2], x[self.n - 1])
        return (x[i - 1], x[i], x[i + 1])

    def value(self, theta, x):
        out = np.empty(self.n)
        for i in range(self.n):
            out[i] = self.fs[i](theta, *self._args(i, x))
        return out

    def jacobian_bands(self, theta, x):
        n = self.n
        dd = np.empty(n)
        uu = np.empty(n - 1)
        ll = np.empty(n - 1)
        fd = np.finfo(float).eps ** (1.0 / 3.0)
        for i in range(n):
            args = self._args(i, x)
            if self.partials is not None:
                p = np.asarray(self.partials[i](theta, *args), dtype=float)
            else:
                base = np.asarray(args, dtype=float)
                p = np.empty(len(args))
                for j in range(len(args)):
                    h = fd * max(1.0, abs(base[j]))
                    hi = base.copy(); hi[j] += h
                    lo = base.copy(); lo[j] -= h
                    p[j] = (self.fs[i](theta, *hi) - self.fs[i](theta, *lo)) / (2 * h)
            if i == 0:
                dd[0], uu[0] = p[0], p[1]
            elif i == n - 1:
                ll[n - 2], dd[n - 1] = p[0], p[1]
            else:
                ll[i - 1], dd[i], uu[i] = p[0], p[1], p[2]
        return dd, uu, ll

    def check_floor(self, theta, x, t=None, err=StructureError):
        _, u, lo = self.jacobian_bands(theta, x)
        for which, band in (("upper", u), ("lower", lo)):
            bad = np.flatnonzero(band < self.eps0 - 1e-9)
            if bad.size:
                i = int(bad[0])
                at = f"t={t:.6g}" if t is not None else f"theta={np.asarray(theta)}"
                raise err(
                    f"{self.name}: off-diagonal partial {which}[{i}] = "
                    f"{band[i]:.6g} below floor {self.eps0} at {at}")

    def frozen(self, theta0, t_anchor=0.0) -> TridiagRHS:
        """Time-domain RHS with the phase driven from (theta0 at t_anchor)."""
        theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
        omega = self.omega

        def theta_at(t):
            return np.mod(theta0 + omega * (t - t_anchor), 1.0)

        def wrap(i):
            g = self.fs[i]
            return lambda t, *args: g(theta_at(t), *args)

        partials = None
        if self.partials is not None:
            def wrap_p(i):
                p = self.partials[i]
                return lambda t, *args: p(theta_at(t), *args)
            partials = [wrap_p(i) for i in range(self.n)]
        return TridiagRHS(self.n, [wrap(i) for i in range(self.n)],
                          eps0=self.eps0, partials=partials,
                          name=f"{self.name}@theta", skip_floor_check=True)


@dataclass
class SkewOrbit:
    """Fiber trajectory together with its analytically driven base phase."""

    rhs: SkewRHS
    theta_anchor: np.ndarray
    t_anchor: float
    traj: Trajectory

    def theta(self, t):
        return np.mod(self.theta_anchor + self.rhs.omega * (t - self.t_anchor), 1.0)

    def x(self, t):
        return self.traj(t)

    @property
    def times(self):
        return self.traj.times

    @property
    def span(self):
        return self.traj.span


def skew_orbit(f: SkewRHS, x0, theta0, t0, t1, rel_tol=DEFAULT_REL_TOL,
               abs_tol=DEFAULT_ABS_TOL, grid_dt=None, bound=None,
               floor_checks=32) -> SkewOrbit:
    """Integrate the fiber equation with the phase frozen analytically.

    Samples the off-diagonal partial floor along the orbit; a violation
    is a structure failure naming the band index and time.
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    frozen = f.frozen(theta0, t_anchor=t0)
    traj = integrate_nonlinear(frozen, x0, t0, t1, rel_tol=rel_tol,
                               abs_tol=abs_tol, grid_dt=grid_dt, bound=bound)
    orbit = SkewOrbit(rhs=f, theta_anchor=theta0, t_anchor=t0, traj=traj)
    if floor_checks:
        for t in np.linspace(*traj.span, floor_checks):
            f.check_floor(orbit.theta(t), orbit.x(t), t=t)
    return orbit


def skew_step(f: SkewRHS, x0, theta0, t, **kwargs):
    """Flow the skew product by time t; returns (x, theta_phase)."""
    if t == 0.0:
        return np.asarray(x0, dtype=float), np.mod(
            np.atleast_1d(np.asarray(theta0, dtype=float)), 1.0)
    orbit = skew_orbit(f, x0, theta0, 0.0, t, **kwargs)
    return orbit.x(t), orbit.theta(t)


@dataclass
class AnalyticOrbit:
    """Orbit-like wrapper around a closed-form or precomputed solution.

    Lets the linearization and hyperbolicity machinery run along orbits
    that cannot be recovered by forward re-integration from samples, the
    typical case for a dynamically unstable minimal set (tracking error
    grows like e^(alpha t), so re-integration escapes).
    """

    x_eval: object
    theta_anchor: np.ndarray
    t_anchor: float
    omega: np.ndarray
    t_span: tuple

    def x(self, t):
        return self.x_eval(t)

    def theta(self, t):
        return np.mod(self.theta_anchor + self.omega * (t - self.t_anchor), 1.0)

    @property
    def span(self):
        return self.t_span


@dataclass
class OmegaSetApproximation:
    """(x, theta) samples collected after a transient."""

    points: np.ndarray              # (N, n)
    thetas: np.ndarray              # (N, d)
    transient: float
    sample_dt: float
    invariance_residual: float
    omega: np.ndarray

    @property
    def sample_count(self):
        return self.points.shape[0]

    def fiber_indices(self, theta_probe, r_fiber):
        theta_probe = np.atleast_1d(np.asarray(theta_probe, dtype=float))
        if self.thetas.shape[1] == 0:
            return np.arange(self.sample_count)
        d = np.abs(self.thetas - theta_probe[None, :]) % 1.0
        d = np.minimum(d, 1.0 - d)
        return np.flatnonzero(np.linalg.norm(d, axis=1) <= r_fiber)

    def diameter(self):
        lo = np.min(self.points, axis=0)
        hi = np.max(self.points, axis=0)
        return float(np.linalg.norm(hi - lo))

    def to_record(self):
        return {"sample_count": int(self.sample_count),
                "transient": self.transient,
                "sample_dt": self.sample_dt,
                "invariance_residual": self.invariance_residual}


def omega_set_from_orbit(f: SkewRHS, orbit, t_from, t_to, sample_dt,
                         transient=0.0, residual_tau=None, residual_probes=16,
                         rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL) -> OmegaSetApproximation:
    """Collect (x, theta) samples of an orbit-like object into a set proxy.

    The invariance residual re-integrates a few sampled points for
    ``residual_tau`` and measures the distance to the sample at the
    matching later time; with an exact flow those coincide, so the
    residual isolates integration or sampling inconsistency.
    """
    ts = np.arange(t_from, t_to + 0.5 * sample_dt, sample_dt)
    points = np.asarray([orbit.x(t) for t in ts])
    thetas = np.asarray([orbit.theta(t) for t in ts])
    if thetas.ndim == 1:
        thetas = thetas.reshape(len(ts), -1)

    if residual_tau is None:
        residual_tau = sample_dt
    j = max(1, int(round(residual_tau / sample_dt)))
    tau = j * sample_dt
    residual = 0.0
    stride = max(1, (len(ts) - 1 - j) // residual_probes)
    for k in range(0, len(ts) - j, stride):
        x_new, _ = skew_step(f, points[k], thetas[k], tau,
                             rel_tol=rel_tol, abs_tol=abs_tol)
        residual = max(residual, float(np.linalg.norm(x_new - points[k + j])))
    return OmegaSetApproximation(points=points, thetas=thetas,
                                 transient=float(transient),
                                 sample_dt=float(sample_dt),
                                 invariance_residual=residual,
                                 omega=f.omega.copy())


def omega_limit(f: SkewRHS, x0, theta0, transient, horizon, sample_dt,
                bound=None, residual_tau=None, residual_probes=16,
                rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL) -> OmegaSetApproximation:
    """Sample the forward orbit after a transient as an omega-limit proxy."""
    if horizon <= 0 or transient < 0 or sample_dt <= 0:
        raise ArgumentError("need transient >= 0, horizon > 0, sample_dt > 0")
    t_end = transient + horizon
    orbit = skew_orbit(f, x0, theta0, 0.0, t_end, rel_tol=rel_tol,
                       abs_tol=abs_tol, bound=bound)
    return omega_set_from_orbit(f, orbit, transient, t_end, sample_dt,
                                transient=transient, residual_tau=residual_tau,
                                residual_probes=residual_probes,
                                rel_tol=rel_tol, abs_tol=abs_tol)


def linearize_along(f: SkewRHS, orbit: SkewOrbit, bound_margin=2.0) -> TridiagCoefficients:
    """Jacobian band sampler along an orbit, with the cooperative floor.

    Valid for times inside the orbit span. The declared bound is scanned
    from the orbit samples and padded.
    """
    scan = np.linspace(*orbit.span, 64)
    mx = 0.0
    for t in scan:
        dd, uu, ll = f.jacobian_bands(orbit.theta(t), orbit.x(t))
        mx = max(mx, np.max(np.abs(dd)), np.max(np.abs(uu)), np.max(np.abs(ll)))

    def diag(t):
        return f.jacobian_bands(orbit.theta(t), orbit.x(t))[0]

    def upper(t):
        return f.jacobian_bands(orbit.theta(t), orbit.x(t))[1]

    def lower(t):
        return f.jacobian_bands(orbit.theta(t), orbit.x(t))[2]

    return TridiagCoefficients(
        f.n, diag, upper, lower, eps0=f.eps0,
        bound=float(bound_margin * mx + 1.0), modulus=Modulus.general(),
        name=f"linearized:{f.name}")


def difference_quotient_coefficients(f: SkewRHS, orbit_a: SkewOrbit,
                                     orbit_b: SkewOrbit, quad_points=8) -> TridiagCoefficients:
    """Coefficients governing the difference of two orbits.

    Band entries are the averaged partials along the segment between the
    two states, by fixed Gauss-Legendre quadrature; the difference of the
    two solutions solves the resulting linear system exactly.
    """
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights

    def bands(t):
        xa, xb = orbit_a.x(t), orbit_b.x(t)
        theta = orbit_a.theta(t)
        dd = np.zeros(f.n)
        uu = np.zeros(f.n - 1)
        ll = np.zeros(f.n - 1)
        for s, w in zip(nodes, weights):
            d1, u1, l1 = f.jacobian_bands(theta, (1 - s) * xa + s * xb)
            dd += w * d1
            uu += w * u1
            ll += w * l1
        return dd, uu, ll

    scan = np.linspace(*orbit_a.span, 32)
    mx = max(max(np.max(np.abs(b)) for b in bands(t)) for t in scan)
    return TridiagCoefficients(
        f.n, lambda t: bands(t)[0], lambda t: bands(t)[1], lambda t: bands(t)[2],
        eps0=f.eps0, bound=float(2.0 * mx + 1.0), modulus=Modulus.general(),
        name=f"difference-quotient:{f.name}")


@dataclass
class HyperbolicityReport:
    """Three-valued hyperbolicity verdict for a sampled invariant set."""

    spectrum: SpectrumEstimate
    contains_zero: bool
    unstable_dim: int
    verdict: str                    # "hyperbolic" | "not_hyperbolic" | "undetermined"
    resolution: float
    invariance_residual: float

    def to_record(self):
        return {"spectrum": self.spectrum.to_record(),
                "contains_zero": self.contains_zero,
                "unstable_dim": self.unstable_dim,
                "verdict": self.verdict,
                "resolution": self.resolution,
                "invariance_residual": self.invariance_residual}


def hyperbolicity_check(f: SkewRHS, omega_set: OmegaSetApproximation,
                        probes=1, horizon=200.0, window_lengths=(10.0, 20.0, 50.0),
                        grid_dt=0.5, warmup=50.0, min_resolution=1e-3,
                        bound=None, orbits=None, rel_tol=DEFAULT_REL_TOL,
                        abs_tol=DEFAULT_ABS_TOL) -> HyperbolicityReport:
    """Sacker-Sell verdict of the linearization along set orbits.

    Hyperbolic means zero lies outside every interval (beyond the
    numerical resolution) and the unstable multiplicity is at least one;
    a shift straddling the resolution yields "undetermined", never a
    false positive. The resolution is the endpoint drift between the two
    largest windows, floored at ``min_resolution``. Probe orbits are
    re-integrated from set samples by default; pass ``orbits`` explicitly
    for dynamically unstable sets, where re-integration escapes (each
    must cover [0, horizon + 2 warmup]).
    """
    if omega_set.sample_count == 0:
        raise ArgumentError("empty omega set")

    def classify(est):
        windows = sorted(window_lengths)
        resolution = min_resolution
        if len(windows) >= 2 and est.per_window:
            w1, w2 = float(windows[-1]), float(windows[-2])
            drift = max(max(abs(a1 - a2), abs(b1 - b2))
                        for (a1, b1), (a2, b2) in zip(est.per_window[w1],
                                                      est.per_window[w2]))
            resolution = max(min_resolution, drift)
        dist0 = est.distance(0.0)
        contains_zero = dist0 == 0.0
        N = est.unstable_multiplicity(0.0)
        if not contains_zero and dist0 > resolution:
            verdict = "hyperbolic" if N >= 1 else "not_hyperbolic"
        elif contains_zero:
            inside = next(iv for iv in est.intervals if iv[0] <= 0.0 <= iv[1])
            depth = min(0.0 - inside[0], inside[1] - 0.0)
            verdict = "not_hyperbolic" if depth > resolution else "undetermined"
        else:
            verdict = "undetermined"
        return verdict, N, contains_zero, resolution

    if orbits is None:
        idxs = np.linspace(0, omega_set.sample_count - 1, probes).astype(int)
        orbits = [skew_orbit(f, omega_set.points[k], omega_set.thetas[k],
                             0.0, horizon + 2.0 * warmup, rel_tol=rel_tol,
                             abs_tol=abs_tol, bound=bound) for k in idxs]
    results = []
    for orbit in orbits:
        B = linearize_along(f, orbit)
        est = sacker_sell_estimate(B, window_lengths=window_lengths,
                                   horizon=horizon, grid_dt=grid_dt,
                                   warmup=warmup, t_start=warmup,
                                   rel_tol=rel_tol, abs_tol=abs_tol)
        results.append((est, *classify(est)))

    est, verdict, N, contains_zero, resolution = (
        results[0][0], results[0][1], results[0][2], results[0][3], results[0][4])
    if any(r[1] != verdict for r in results[1:]):
        verdict = "undetermined"
    return HyperbolicityReport(spectrum=est, contains_zero=contains_zero,
                               unstable_dim=N, verdict=verdict,
                               resolution=float(resolution),
                               invariance_residual=omega_set.invariance_residual)


@dataclass
class BoundedSolution:
    """The unique bounded solution of a hyperbolic constant-coefficient
    system under bounded forcing."""

    times: np.ndarray
    states: np.ndarray
    residual: float
    _eval: object = field(repr=False, default=None)

    def __call__(self, t):
        return self._eval(t)


def bounded_solution_linear(A, b, span=(0.0, 20.0), tol=1e-8,
                            rel_tol=1e-10, abs_tol=1e-13,
                            grid_dt=0.05, residual_probes=16) -> BoundedSolution:
    """Green's-function bounded solution of x' = A x + b(t), constant A.

    Works in modal coordinates: stable modes are integrated forward from
    far in the past, unstable modes backward from far in the future, each
    scalar channel separately so nothing leaks across the splitting. The
    padding is sized so the discarded boundary terms are below ``tol``.
    Rejected if some eigenvalue's real part vanishes.
    """
    if isinstance(A, TridiagCoefficients):
        if A.modulus.kind != "constant":
            raise ArgumentError("bounded_solution_linear needs constant coefficients")
        M = A.matrix(0.0)
    else:
        M = np.asarray(A, dtype=float)
    n = M.shape[0]
    lam, V = np.linalg.eig(M)
    if np.max(np.abs(lam.imag)) > 1e-12:
        raise ArgumentError("expected a real spectrum (cooperative tridiagonal)")
    lam = lam.real
    V = V.real
    alpha_min = float(np.min(np.abs(lam)))
    if alpha_min < 1e-9:
        raise ArgumentError("0 in the spectrum: no dichotomy, no bounded solution")
    Vinv = np.linalg.inv(V)
    stable = lam < 0
    pad = (np.log(1.0 / tol) + 5.0) / alpha_min

    t_lo, t_hi = float(span[0]), float(span[1])

    def modal_rhs(mask):
        idx = np.flatnonzero(mask)

        def rhs(t, y):
            c = Vinv @ np.asarray(b(t), dtype=float)
            return lam[idx] * y + c[idx]
        return idx, rhs

    from scipy.integrate import solve_ivp

    sols = []
    for mask, t_from, t_to in ((stable, t_lo - pad, t_hi),
                               (~stable, t_hi + pad, t_lo)):
        idx, rhs = modal_rhs(mask)
        if idx.size == 0:
            sols.append((idx, None))
            continue
        res = solve_ivp(rhs, (t_from, t_to), np.zeros(idx.size), method="RK45",
                        dense_output=True, rtol=rel_tol, atol=abs_tol)
        if not res.success:
            raise IntegrationError(f"bounded-solution sweep failed: {res.message}")
        sols.append((idx, res.sol))

    def evaluate(t):
        y = np.zeros(n)
        for idx, sol in sols:
            if sol is not None:
                y[idx] = sol(t)
        return V @ y

    times = np.arange(t_lo, t_hi + 0.5 * grid_dt, grid_dt)
    states = np.asarray([evaluate(t) for t in times])

    # residual by re-propagation of the full equation over short hops
    h = max(grid_dt, (t_hi - t_lo) / max(residual_probes, 1) / 4.0)
    residual = 0.0
    probes = np.linspace(t_lo, t_hi - h, residual_probes)
    for t in probes:
        res = solve_ivp(lambda s, y: M @ y + np.asarray(b(s), dtype=float),
                        (t, t + h), evaluate(t), method="RK45",
                        rtol=rel_tol, atol=abs_tol)
        if not res.success:
            raise IntegrationError(f"residual probe failed: {res.message}")
        residual = max(residual, float(np.linalg.norm(res.y[:, -1] - evaluate(t + h)) / h))
    if residual > tol:
        raise StructureError(
            f"bounded solution residual {residual:.3e} exceeds {tol}",
            module="skewflow", check="bounded-solution-residual")
    return BoundedSolution(times=times, states=states, residual=residual,
                           _eval=evaluate)


@dataclass
class CoverReport:
    cluster_count: int
    diameters: list
    fiber_count: int
    degenerate_tolerance: bool = False

    def to_record(self):
        return {"cluster_count": self.cluster_count,
                "diameters": self.diameters,
                "fiber_count": self.fiber_count,
                "degenerate_tolerance": self.degenerate_tolerance}


def cover_cardinality(omega_set: OmegaSetApproximation, theta_probe,
                      cluster_tol=1e-3, r_fiber=1e-2, fiber_min=30) -> CoverReport:
    """Estimate the fiber cardinality over a base point.

    Single-linkage clustering of the x-points whose phases fall within
    ``r_fiber`` of the probe; the cluster count approximates how many
    sheets of the set cross that fiber.
    """
    idx = omega_set.fiber_indices(theta_probe, r_fiber)
    if idx.size < fiber_min:
        raise InsufficientSamplingError(
            f"only {idx.size} fiber points within {r_fiber} of {theta_probe} "
            f"(need {fiber_min})", count=int(idx.size))
    pts = omega_set.points[idx]
    degenerate = cluster_tol >= max(omega_set.diameter(), 1e-300)
    if degenerate:
        warnings.warn("cluster tolerance exceeds the set diameter; "
                      "a single cluster is guaranteed", stacklevel=2)

    from scipy.cluster.hierarchy import fcluster, linkage
    from scipy.spatial.distance import pdist

    if len(pts) == 1:
        return CoverReport(1, [0.0], int(idx.size), degenerate)
    dists = pdist(pts)
    labels = fcluster(linkage(dists, method="single"), t=cluster_tol,
                      criterion="distance")
    diameters = []
    for c in sorted(set(labels)):
        sub = pts[labels == c]
        if len(sub) == 1:
            diameters.append(0.0)
        else:
            diameters.append(float(np.max(pdist(sub))))
    return CoverReport(int(labels.max()), diameters, int(idx.size), degenerate)


class _CompositeTrajectory:
    """Trajectory-like view over adjacent legs (for two-sided orbits)."""

    def __init__(self, legs):
        self.legs = sorted(legs, key=lambda tr: tr.span[0])
        ts = np.concatenate([leg.times for leg in self.legs])
        self.times = np.unique(ts)

    def __call__(self, t):
        for leg in self.legs:
            lo, hi = leg.span
            if lo - 1e-12 <= t <= hi + 1e-12:
                return leg(np.clip(t, lo, hi))
        raise ArgumentError(f"time {t} outside composite span")


@dataclass
class FiberDistalReport:
    forward_gap: float
    backward_gap: float
    profile: signchain.SigmaProfile

    def to_record(self):
        return {"forward_gap": self.forward_gap,
                "backward_gap": self.backward_gap,
                "sigma_segments": self.profile.segments,
                "sigma_values": self.profile.values}


def fiber_distal_profile(f: SkewRHS, p1, p2, horizon, anchor="center",
                         sample_dt=0.05, rel_tol=DEFAULT_REL_TOL,
                         abs_tol=DEFAULT_ABS_TOL, bound=None,
                         zero_band=signchain.DEFAULT_ZERO_BAND) -> FiberDistalReport:
    """Distance infima and sign-change profile of two same-fiber orbits.

    ``anchor="center"`` integrates both points forward and backward from
    t = 0 (suitable when backward orbits stay bounded). For strongly
    attracting minimal sets backward integration from sampled points is
    exponentially ill-posed; use ``anchor="start"``, which interprets the
    given points at t = -horizon and integrates forward only, so both
    orbits live on the set up to the sampling accuracy.
    """
    (x1, th1), (x2, th2) = p1, p2
    th1 = np.atleast_1d(np.asarray(th1, dtype=float))
    th2 = np.atleast_1d(np.asarray(th2, dtype=float))
    if th1.shape != th2.shape or np.any(np.abs(th1 - th2) > 1e-12):
        raise ArgumentError("fiber pair must share the base point")
    H = float(horizon)

    def orbit_of(x0):
        if anchor == "center":
            legs = [skew_orbit(f, x0, th1, 0.0, H, rel_tol=rel_tol,
                               abs_tol=abs_tol, bound=bound).traj]
            legs.append(skew_orbit(f, x0, th1, 0.0, -H, rel_tol=rel_tol,
                                   abs_tol=abs_tol, bound=bound).traj)
            return _CompositeTrajectory(legs)
        if anchor == "start":
            return skew_orbit(f, x0, th1, -H, H, rel_tol=rel_tol,
                              abs_tol=abs_tol, bound=bound).traj
        raise ArgumentError(f"unknown anchor {anchor!r}")

    tr1 = orbit_of(np.asarray(x1, dtype=float))
    tr2 = orbit_of(np.asarray(x2, dtype=float))
    ts = np.arange(-H, H + 0.5 * sample_dt, sample_dt)
    diffs = np.asarray([tr1(t) - tr2(t) for t in ts])
    norms = np.linalg.norm(diffs, axis=1)
    if np.max(norms) <= 1e-300:
        raise ArgumentError("the two orbits coincide; no distal profile")
    forward_gap = float(np.min(norms[ts >= 0.0]))
    backward_gap = float(np.min(norms[ts <= 0.0]))

    class _Diff:
        times = ts

        def __call__(self, t):
            return tr1(t) - tr2(t)

    profile = signchain.sigma_profile(_Diff(), zero_band=zero_band)
    return FiberDistalReport(forward_gap=forward_gap, backward_gap=backward_gap,
                             profile=profile)
