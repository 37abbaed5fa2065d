"""Floquet solutions and nested invariant spaces for general time dependence.

Two independent constructions are provided. The truncation route closes
the coefficients into a periodic system of growing period, decomposes each
closure, and requires the resulting directions to be Cauchy along the
schedule. The push-forward route exploits the exponential separation of
the nested space pairs: a generic orthonormal frame pushed forward under
the flow with periodic QR re-orthonormalization aligns its leading columns
with the slow-to-fast filtration, a frame pushed backward aligns with the
fast-to-slow one, and the m-th solution direction is the one-dimensional
intersection of the matching pair, extracted through principal vectors.

``frame_evolution`` runs one forward and one backward sweep over a whole
time grid and intersects at every node, which also yields exact per-node
norm gains of each mode; the spectrum module builds everything on top of
those.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import signchain
from .coeffs import TridiagCoefficients, truncated_periodic
from .errors import ArgumentError, ConvergenceError, StructureError
from .integrate import propagate_frame

DEFAULT_DIR_TOL = 1e-8
DEFAULT_K_SCHEDULE = (4, 8, 16, 32, 64)
DEFAULT_QR_INTERVAL = 1.0
DEFAULT_FRAME_TOL = 1e-6
FALLBACK_WARMUP = 50.0


@dataclass
class BundleFrame:
    """Normalized Floquet directions at one base time.

    Column m of ``vectors`` is unit with positive first coordinate and
    carries sign-change count m; the leading columns l..m span the
    invariant space whose solutions keep their count in [l, m].
    """

    base_time: float
    vectors: np.ndarray
    sigma_ok: np.ndarray
    method: str
    convergence_gap: np.ndarray
    gains: np.ndarray | None = None   # set by transport: log norm gains per mode

    @property
    def n(self):
        return self.vectors.shape[0]

    def min_singular_value(self):
        return float(np.linalg.svd(self.vectors, compute_uv=False)[-1])

    def condition(self):
        s = np.linalg.svd(self.vectors, compute_uv=False)
        return float(s[0] / s[-1])

    def to_record(self):
        return {
            "base_time": self.base_time,
            "vectors": self.vectors.tolist(),
            "sigma_ok": self.sigma_ok.tolist(),
            "method": self.method,
            "convergence_gap": np.asarray(self.convergence_gap).tolist(),
            "condition": self.condition(),
        }


def angle_between(u, v) -> float:
    """Acute angle between two directions (sign-insensitive)."""
    u = np.asarray(u, float); v = np.asarray(v, float)
    c = abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(min(1.0, c)))


def subspace_angles(U, V):
    """Principal angles between the column spans of U and V (ascending)."""
    qu, _ = np.linalg.qr(U)
    qv, _ = np.linalg.qr(V)
    s = np.linalg.svd(qu.T @ qv, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


def _signed_qr(Y):
    Q, R = np.linalg.qr(Y)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s, R * s[:, None]


def _sweep(A, t_start, t_end, Q0, qr_interval, store_times=(),
           rel_tol=1e-9, abs_tol=1e-12):
    """Push Q0 from t_start to t_end with QR at regular stops.

    Returns (Q_final, stored) where stored maps each requested time to
    (Q, R_accum); R_accum is the accumulated triangular factor since the
    previous stored time (identity at the first stored time).
    """
    direction = 1.0 if t_end > t_start else -1.0
    stops = list(np.arange(t_start, t_end, direction * qr_interval)[1:])
    stops.extend(store_times)
    stops.append(t_end)
    stops = sorted(set(float(s) for s in stops), reverse=direction < 0)
    store_set = set(float(s) for s in store_times)

    n = Q0.shape[0]
    Q = Q0.copy()
    R_accum = np.eye(Q0.shape[1])
    stored = {}
    t_prev = t_start
    if float(t_start) in store_set:
        stored[float(t_start)] = (Q.copy(), np.eye(Q0.shape[1]))
        R_accum = np.eye(Q0.shape[1])
    for t in stops:
        if t == t_prev:
            continue
        Y = propagate_frame(A, Q, t_prev, t, rel_tol=rel_tol, abs_tol=abs_tol)
        Q, R = _signed_qr(Y)
        R_accum = R @ R_accum
        if float(t) in store_set:
            stored[float(t)] = (Q.copy(), R_accum.copy())
            R_accum = np.eye(Q0.shape[1])
        t_prev = t
    return Q, stored


def _default_frame(n, seed=0):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q


def _intersect_direction(Uf, Ub, floor_angle=1e-6, ratio=10.0):
    """Unit direction of the (expected 1-D) intersection span(Uf) & span(Ub).

    Principal angles diagnose the dimensionality: the smallest must be
    near zero and the second one must clear both an absolute floor and the
    configured multiple of the smallest, otherwise the separation has not
    converged (or is genuinely degenerate).
    """
    M = Uf.T @ Ub
    U, s, _ = np.linalg.svd(M)
    angles = np.arccos(np.clip(s, -1.0, 1.0))
    if angles.size >= 2:
        second = angles[1]
        if second < max(ratio * angles[0], floor_angle):
            raise ConvergenceError(
                f"intersection not cleanly one-dimensional: principal angles "
                f"{angles[:2].tolist()}; extend the warmup or the separation is degenerate",
                history=angles.tolist())
    x = Uf @ U[:, 0]
    return x / np.linalg.norm(x)


def _sign_fix(v):
    if v[0] < 0:
        return -v
    if v[0] == 0.0:
        raise StructureError(
            "bundle vector has zero first coordinate (left the sigma domain)",
            module="floquet-bundles", check="sign-convention")
    return v


def _check_sigma(vectors, zero_band, strict, where):
    # ambiguity (a coordinate inside the snap band) is tolerated as long
    # as the snapped count is right: exact interior zeros are legitimate
    # members of the domain
    n = vectors.shape[1]
    ok = np.zeros(n, dtype=bool)
    for m in range(n):
        r = signchain.sigma(vectors[:, m], zero_band)
        ok[m] = r.defined and r.value == m
        if not ok[m] and strict:
            got = r.value if r.defined else "undefined"
            raise StructureError(
                f"sigma(x_{m}) = {got}, expected {m} ({where})",
                module="floquet-bundles", check="sigma-labels")
    return ok


def pilot_separation_rate(A, t_center=0.0, pilot_span=10.0, qr_interval=DEFAULT_QR_INTERVAL,
                          rel_tol=1e-9, abs_tol=1e-12, seed=0):
    """Crude smallest gap between consecutive finite-time growth rates."""
    n = A.n
    Q = _default_frame(n, seed)
    t0, t1 = t_center - pilot_span, t_center
    logs = np.zeros(n)
    t_prev = t0
    for t in list(np.arange(t0 + qr_interval, t1, qr_interval)) + [t1]:
        Y = propagate_frame(A, Q, t_prev, t, rel_tol=rel_tol, abs_tol=abs_tol)
        Q, R = _signed_qr(Y)
        logs += np.log(np.abs(np.diag(R)))
        t_prev = t
    rates = logs / pilot_span
    gaps = rates[:-1] - rates[1:]
    return float(np.min(gaps)) if gaps.size else np.inf


def _auto_warmup(A, t_center, rel_tol, abs_tol, seed):
    gamma = pilot_separation_rate(A, t_center, rel_tol=rel_tol, abs_tol=abs_tol, seed=seed)
    if not np.isfinite(gamma) or gamma <= 0.1:
        return FALLBACK_WARMUP
    return float(min(max(20.0 / gamma, 10.0), 200.0))


def floquet_bundle_pushforward(A: TridiagCoefficients, t_center=0.0, warmup=None,
                               dir_tol=DEFAULT_DIR_TOL, qr_interval=DEFAULT_QR_INTERVAL,
                               max_extensions=6, rel_tol=1e-9, abs_tol=1e-12,
                               seed=0, zero_band=signchain.DEFAULT_ZERO_BAND,
                               strict=True, frame_tol=DEFAULT_FRAME_TOL) -> BundleFrame:
    """Full Floquet frame at t_center by forward/backward QR sweeps.

    The sweeps start ``warmup`` time units away on each side (auto-scaled
    from a pilot separation estimate when not given) and the warmup is
    extended geometrically until the frame moves by less than ``dir_tol``
    between extensions.
    """
    n = A.n
    if warmup is None:
        warmup = _auto_warmup(A, t_center, rel_tol, abs_tol, seed)

    prev = None
    gaps = []
    for ext in range(max_extensions):
        W = warmup * (1.5 ** ext)
        Qf, _ = _sweep(A, t_center - W, t_center, _default_frame(n, seed),
                       qr_interval, rel_tol=rel_tol, abs_tol=abs_tol)
        Qb, _ = _sweep(A, t_center + W, t_center, _default_frame(n, seed + 1),
                       qr_interval, rel_tol=rel_tol, abs_tol=abs_tol)
        vectors = np.empty((n, n))
        for m in range(n):
            vectors[:, m] = _sign_fix(
                _intersect_direction(Qf[:, : m + 1], Qb[:, : n - m]))
        if prev is not None:
            gap = max(angle_between(vectors[:, m], prev[:, m]) for m in range(n))
            gaps.append(gap)
            if gap < dir_tol:
                sigma_ok = _check_sigma(vectors, zero_band, strict, "pushforward frame")
                frame = BundleFrame(t_center, vectors, sigma_ok, "pushforward",
                                    np.full(n, gap))
                if frame.min_singular_value() <= frame_tol:
                    raise StructureError(
                        f"frame numerically dependent (smallest singular value "
                        f"{frame.min_singular_value():.3e})",
                        module="floquet-bundles", check="frame-independence")
                return frame
        prev = vectors
    raise ConvergenceError(
        f"pushforward frame did not settle below {dir_tol} after "
        f"{max_extensions} warmup extensions (gaps {gaps})", history=gaps)


def _periodic_filtration(Ak, r, forward, tol, max_periods, qr_interval,
                         rel_tol, abs_tol, seed, Q0=None):
    """Orthonormal basis of the r-dimensional slow (forward) or fast
    (backward) invariant subspace of a periodic system at base time 0.

    Subspace iteration with the period map, applied as one-period QR
    sweeps so the conditioning never exceeds one period's growth. This is
    the stable replacement for eigendecomposing the explicit monodromy
    matrix, whose small modes drown in rounding once the multiplier
    spread passes 1/eps. ``Q0`` warm-starts the iteration (e.g. from the
    previous truncation index).
    """
    T = Ak.period
    Q = _default_frame(Ak.n, seed)[:, :r] if Q0 is None else Q0.copy()
    prev = None
    gaps = []
    plateau_cap = 1e-7
    for _ in range(max_periods):
        t0, t1 = (0.0, T) if forward else (T, 0.0)
        Q, _ = _sweep(Ak, t0, t1, Q, qr_interval, rel_tol=rel_tol, abs_tol=abs_tol)
        if prev is not None:
            gap = float(np.max(subspace_angles(Q, prev)))
            gaps.append(gap)
            if gap < tol:
                return Q
            # integration noise sets a floor; a stalled but tiny gap means
            # the subspace is converged to working accuracy
            if len(gaps) >= 2 and gap < plateau_cap and gap > 0.3 * gaps[-2]:
                return Q
        prev = Q
    raise ConvergenceError(
        f"period-map subspace iteration did not settle below {tol} "
        f"within {max_periods} periods (period {T:g})", history=gaps)


def floquet_frame_truncation(A: TridiagCoefficients, k_schedule=DEFAULT_K_SCHEDULE,
                             dir_tol=DEFAULT_DIR_TOL, rel_tol=1e-9, abs_tol=1e-12,
                             subspace_tol=1e-11, max_periods=60,
                             qr_interval=DEFAULT_QR_INTERVAL, seed=0,
                             zero_band=signchain.DEFAULT_ZERO_BAND,
                             strict=True) -> BundleFrame:
    """All Floquet directions at t = 0 via the truncation family at once.

    One forward and one backward full-frame subspace iteration per
    truncation index serve every mode (the leading QR columns are the
    nested filtrations); the schedule's Cauchy requirement applies to the
    worst mode.
    """
    n = A.n
    prev = None
    gaps = []
    Qf = Qb = None
    for k in k_schedule:
        Ak = truncated_periodic(A, int(k))
        Qf = _periodic_filtration(Ak, n, True, subspace_tol, max_periods,
                                  qr_interval, rel_tol, abs_tol, seed, Q0=Qf)
        Qb = _periodic_filtration(Ak, n, False, subspace_tol, max_periods,
                                  qr_interval, rel_tol, abs_tol, seed + 1, Q0=Qb)
        V = np.empty((n, n))
        for m in range(n):
            V[:, m] = _sign_fix(_intersect_direction(Qf[:, : m + 1], Qb[:, : n - m]))
        if prev is not None:
            gap = max(angle_between(V[:, m], prev[:, m]) for m in range(n))
            gaps.append(gap)
            if gap < dir_tol:
                sigma_ok = _check_sigma(V, zero_band, strict, "truncation frame")
                return BundleFrame(0.0, V, sigma_ok, "truncation", np.full(n, gap))
        prev = V
    raise ConvergenceError(
        f"truncation frame not Cauchy below {dir_tol} over schedule "
        f"{tuple(k_schedule)} (gaps {gaps})", history=gaps)


def floquet_solution_truncation(A: TridiagCoefficients, m, k_schedule=DEFAULT_K_SCHEDULE,
                                dir_tol=DEFAULT_DIR_TOL, rel_tol=1e-9, abs_tol=1e-12,
                                verify_span=3.0, zero_band=signchain.DEFAULT_ZERO_BAND,
                                subspace_tol=1e-11, max_periods=60,
                                qr_interval=DEFAULT_QR_INTERVAL, seed=0) -> np.ndarray:
    """m-th Floquet direction at t = 0 via the periodic truncation family.

    Each k in the schedule closes the coefficients into a 2(k+1)-periodic
    system; its m-th Floquet direction is the intersection of the slow
    (m+1)-dimensional and fast (n-m)-dimensional invariant subspaces of
    the period map, each obtained by subspace iteration. The directions
    must be Cauchy along the schedule (consecutive angle below
    ``dir_tol``), otherwise a ConvergenceError carries the gap sequence.
    The accepted vector is integrated over ``(-verify_span, verify_span)``
    and must hold its sign-change count there. Keep the window modest:
    integration from an approximate direction drifts toward the dominant
    mode like e^(gap * t), so dir_tol * e^(gap * verify_span) must stay
    below the typical domain margin.
    """
    from .integrate import integrate_linear

    if not 0 <= m < A.n:
        raise ArgumentError(f"mode index {m} out of range for n={A.n}")
    n = A.n
    prev = None
    gaps = []
    accepted = None
    for k in k_schedule:
        Ak = truncated_periodic(A, int(k))
        Qf = _periodic_filtration(Ak, m + 1, True, subspace_tol, max_periods,
                                  qr_interval, rel_tol, abs_tol, seed)
        Qb = _periodic_filtration(Ak, n - m, False, subspace_tol, max_periods,
                                  qr_interval, rel_tol, abs_tol, seed + 1)
        v = _sign_fix(_intersect_direction(Qf, Qb))
        if prev is not None:
            gap = angle_between(v, prev)
            gaps.append(gap)
            if gap < dir_tol:
                accepted = v
                break
        prev = v
    if accepted is None:
        raise ConvergenceError(
            f"truncation directions not Cauchy below {dir_tol} over schedule "
            f"{tuple(k_schedule)} (gaps {gaps})", history=gaps)

    if verify_span > 0:
        for t_end in (verify_span, -verify_span):
            leg = integrate_linear(A, accepted, 0.0, t_end, rel_tol, abs_tol)
            prof = signchain.sigma_profile(leg, zero_band=zero_band, max_dt=0.05)
            if prof.values != [m]:
                raise StructureError(
                    f"truncation vector for mode {m} lost its sign-change count "
                    f"over the verification window: {prof.values}",
                    module="floquet-bundles", check="truncation-sigma")
    return _sign_fix(accepted)


def bundle_along_orbit(A: TridiagCoefficients, frame: BundleFrame, t1,
                       rel_tol=1e-9, abs_tol=1e-12, max_leg=5.0,
                       zero_band=signchain.DEFAULT_ZERO_BAND, strict=True) -> BundleFrame:
    """Transport a frame to t1 by the flow, renormalizing each mode.

    The transported vectors are renormalized only (no re-orthogonalization:
    each column is a solution) and must keep a positive first coordinate;
    a sign flip means the transported direction left the sigma domain,
    which contradicts bundle invariance. Legs longer than ``max_leg``
    are split to avoid overflow; accumulated log gains per mode are
    attached to the returned frame.
    """
    t0 = frame.base_time
    if t1 == t0:
        out = BundleFrame(t0, frame.vectors.copy(), frame.sigma_ok.copy(),
                          "transport", frame.convergence_gap.copy())
        out.gains = np.zeros(frame.n)
        return out
    n = frame.n
    V = frame.vectors.copy()
    gains = np.zeros(n)
    span = t1 - t0
    legs = max(1, int(np.ceil(abs(span) / max_leg)))
    ts = np.linspace(t0, t1, legs + 1)
    for a, b in zip(ts[:-1], ts[1:]):
        V = propagate_frame(A, V, a, b, rel_tol=rel_tol, abs_tol=abs_tol)
        norms = np.linalg.norm(V, axis=0)
        gains += np.log(norms)
        V = V / norms
    for m in range(n):
        if V[0, m] <= 0:
            raise StructureError(
                f"transported mode {m} flipped sign of its first coordinate "
                f"at t={t1:g} (left the sigma domain)",
                module="floquet-bundles", check="transport-sign")
    sigma_ok = _check_sigma(V, zero_band, strict, f"transport to t={t1:g}")
    out = BundleFrame(float(t1), V, sigma_ok, "transport",
                      frame.convergence_gap.copy())
    out.gains = gains
    return out


@dataclass
class DimensionReport:
    l: int
    m: int
    dimension: int
    smallest_singular_value: float
    checked: int
    skipped: int
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def to_record(self):
        return {"l": self.l, "m": self.m, "dimension": self.dimension,
                "smallest_singular_value": self.smallest_singular_value,
                "checked": self.checked, "skipped": self.skipped,
                "violations": self.violations}


def dimension_check(A: TridiagCoefficients, l, m, samples=200, frame=None,
                    frame_tol=DEFAULT_FRAME_TOL, seed=7,
                    zero_band=signchain.DEFAULT_ZERO_BAND, **frame_kwargs) -> DimensionReport:
    """Verify dim span(x_l .. x_m) = m - l + 1 and the count bounds inside it.

    Random unit combinations of the sub-frame that land in the sigma
    domain must carry a count within [l, m]; points outside the domain
    are skipped, matching the membership definition.
    """
    if not 0 <= l <= m < A.n:
        raise ArgumentError(f"need 0 <= l <= m < n, got l={l}, m={m}, n={A.n}")
    if frame is None:
        frame = floquet_bundle_pushforward(A, **frame_kwargs)
    sub = frame.vectors[:, l:m + 1]
    svals = np.linalg.svd(sub, compute_uv=False)
    if svals[-1] <= frame_tol:
        raise StructureError(
            f"span(x_{l}..x_{m}) is rank deficient (singular values {svals.tolist()})",
            module="floquet-bundles", check="dimension")
    rng = np.random.default_rng(seed)
    checked = skipped = 0
    violations = []
    for _ in range(samples):
        c = rng.standard_normal(m - l + 1)
        v = sub @ c
        nv = np.linalg.norm(v)
        if nv == 0.0:
            skipped += 1
            continue
        r = signchain.sigma(v / nv, zero_band)
        if not r.defined or r.ambiguous:
            skipped += 1
            continue
        checked += 1
        if not l <= r.value <= m:
            violations.append({"coeffs": c.tolist(), "sigma": r.value})
    return DimensionReport(l=l, m=m, dimension=m - l + 1,
                           smallest_singular_value=float(svals[-1]),
                           checked=checked, skipped=skipped, violations=violations)


@dataclass
class FrameEvolution:
    """Floquet frames along a time grid, with exact per-interval gains.

    frames[k] holds the unit mode vectors at times[k]; gains[k, m] is
    ln |Phi(times[k+1], times[k]) x_m(times[k])| computed from the sweep's
    triangular factors, i.e. the exact norm gain of mode m over interval k
    up to integration tolerance. ``drift`` is the worst angle between a
    transported mode vector and the freshly intersected one at the next
    node, a direct measure of frame self-consistency.
    """

    times: np.ndarray
    frames: list
    gains: np.ndarray
    drift: float
    sigma_violations: int

    @property
    def n(self):
        return self.frames[0].shape[1] if self.frames else 0

    def vectors(self, k):
        return self.frames[k]

    def cumulative_log_norm(self):
        """Per-mode ln |x_m(t_k)| relative to t_0 (shape (K, n))."""
        out = np.zeros((len(self.times), self.gains.shape[1]))
        np.cumsum(self.gains, axis=0, out=out[1:])
        return out


def frame_evolution(A: TridiagCoefficients, times, warmup=None,
                    qr_interval=DEFAULT_QR_INTERVAL, rel_tol=1e-9, abs_tol=1e-12,
                    seed=0, zero_band=signchain.DEFAULT_ZERO_BAND,
                    strict=True, drift_tol=1e-6) -> FrameEvolution:
    """Frames at every grid node from one forward and one backward sweep."""
    times = np.asarray(times, dtype=float)
    if times.size < 2 or np.any(np.diff(times) <= 0):
        raise ArgumentError("times must be strictly increasing with >= 2 nodes")
    n = A.n
    if warmup is None:
        warmup = _auto_warmup(A, times[0], rel_tol, abs_tol, seed)

    store = [float(t) for t in times]
    _, fwd = _sweep(A, times[0] - warmup, times[-1], _default_frame(n, seed),
                    qr_interval, store_times=store, rel_tol=rel_tol, abs_tol=abs_tol)
    _, bwd = _sweep(A, times[-1] + warmup, times[0], _default_frame(n, seed + 1),
                    qr_interval, store_times=store, rel_tol=rel_tol, abs_tol=abs_tol)

    frames = []
    sigma_violations = 0
    for t in store:
        Qf = fwd[t][0]
        Qb = bwd[t][0]
        V = np.empty((n, n))
        for m in range(n):
            V[:, m] = _sign_fix(_intersect_direction(Qf[:, : m + 1], Qb[:, : n - m]))
        ok = _check_sigma(V, zero_band, strict, f"frame at t={t:g}")
        sigma_violations += int(np.count_nonzero(~ok))
        frames.append(V)

    gains = np.zeros((len(store) - 1, n))
    drift = 0.0
    for k in range(len(store) - 1):
        Qf_k = fwd[store[k]][0]
        Qf_next, R_next = fwd[store[k + 1]]
        for m in range(n):
            c = Qf_k.T @ frames[k][:, m]
            v = R_next @ c
            g = np.linalg.norm(v)
            gains[k, m] = np.log(g)
            transported = Qf_next @ (v / g)
            drift = max(drift, angle_between(transported, frames[k + 1][:, m]))
    if drift > drift_tol:
        raise StructureError(
            f"frame drift {drift:.3e} exceeds {drift_tol}: transported modes "
            "disagree with freshly intersected ones",
            module="floquet-bundles", check="frame-drift")
    return FrameEvolution(times=times, frames=frames, gains=gains,
                          drift=drift, sigma_violations=sigma_violations)
