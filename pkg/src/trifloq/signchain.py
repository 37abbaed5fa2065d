"""Integer-valued sign-change function sigma and its continuity domain.

For a vector x in R^n the function counts, over adjacent index pairs, exact
zeros and strict sign changes. It is continuous exactly on the open dense
set of vectors whose endpoints are nonzero and whose interior zeros are
flanked by opposite signs. Along solutions of cooperative tridiagonal
linear systems the count is nonincreasing in time and drops exactly at the
isolated instants where the solution leaves that set; ``sigma_profile``
turns a solution trajectory into the resulting piecewise-constant profile.

Floating point needs a declared zero band: coordinates within
``zero_band * max|x_i|`` of zero are snapped to zero before classification,
and results touched by the snap are flagged ambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, StructureError

DEFAULT_ZERO_BAND = 1e-9
DEFAULT_REFINE_TOL = 1e-8


@dataclass(frozen=True)
class SigmaResult:
    """Sign-change count of a single vector.

    value      -- count in [0, n-1]; -1 when undefined
    defined    -- vector (after snapping) lies in the continuity domain
    ambiguous  -- some coordinate fell strictly inside the zero-snap band
    margin     -- normalized distance-to-failure of the domain predicate
    """

    value: int
    defined: bool
    ambiguous: bool
    margin: float


@dataclass
class SigmaProfile:
    """Piecewise-constant sigma along a trajectory.

    segments        -- list of (t_start, t_end, sigma) with sigma strictly
                       decreasing across consecutive segments
    drop_times      -- localized times where sigma strictly decreases
    undefined_times -- isolated times where the sampled point left the
                       continuity domain (drop times plus any boundary
                       samples that started outside it)
    """

    segments: list = field(default_factory=list)
    drop_times: list = field(default_factory=list)
    undefined_times: list = field(default_factory=list)
    drop_margins: list = field(default_factory=list)

    @property
    def values(self):
        return [s[2] for s in self.segments]


def _as_vector(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ArgumentError("expected a 1-D vector of dimension >= 2")
    if not np.all(np.isfinite(x)):
        raise ArgumentError("vector has non-finite entries")
    scale = np.max(np.abs(x))
    if scale == 0.0:
        raise ArgumentError("zero vector has no sign-change count")
    return x, scale


def _snap(x, scale, zero_band):
    band = zero_band * scale
    snapped = x.copy()
    small = np.abs(x) <= band
    snapped[small] = 0.0
    ambiguous = bool(np.any(small & (x != 0.0)))
    return snapped, ambiguous


def _in_lambda_snapped(s) -> bool:
    if s[0] == 0.0 or s[-1] == 0.0:
        return False
    interior = np.flatnonzero(s[1:-1] == 0.0) + 1
    for i in interior:
        if not s[i - 1] * s[i + 1] < 0.0:
            return False
    return True


def in_lambda(x, zero_band: float = DEFAULT_ZERO_BAND) -> bool:
    """True iff x (after zero-snapping) has nonzero endpoints and every
    interior zero is flanked by coordinates of opposite signs."""
    x, scale = _as_vector(x)
    snapped, _ = _snap(x, scale, zero_band)
    return _in_lambda_snapped(snapped)


def sigma(x, zero_band: float = DEFAULT_ZERO_BAND) -> SigmaResult:
    """Count adjacent-pair sign changes (zeros included) of x.

    The count is the number of indices i in 1..n-1 (1-based) with x_i = 0
    or x_i * x_{i+1} < 0, evaluated on the snapped vector. Undefined
    outside the continuity domain.
    """
    x, scale = _as_vector(x)
    snapped, ambiguous = _snap(x, scale, zero_band)
    m = lambda_margin(x)
    if not _in_lambda_snapped(snapped):
        return SigmaResult(value=-1, defined=False, ambiguous=ambiguous, margin=m)
    head = snapped[:-1]
    count = int(np.count_nonzero((head == 0.0) | (head * snapped[1:] < 0.0)))
    return SigmaResult(value=count, defined=True, ambiguous=ambiguous, margin=m)


def lambda_margin(x) -> float:
    """Scale-invariant distance-to-failure of the domain predicate.

    min(|x_1|, |x_n|, min over interior i of
        max(|x_i|, sqrt(max(0, -x_{i-1} x_{i+1})))) / max|x_j|.
    Strictly positive iff x is in the domain (exact arithmetic).
    """
    x, scale = _as_vector(x)
    terms = [abs(x[0]), abs(x[-1])]
    if x.size > 2:
        inner = np.sqrt(np.maximum(0.0, -x[:-2] * x[2:]))
        terms.append(float(np.min(np.maximum(np.abs(x[1:-1]), inner))))
    return float(min(terms) / scale)


def _sigma_batch(states, zero_band):
    """Vectorized sigma over rows of ``states``.

    Returns (values, ok) where ok marks rows that are defined and
    unambiguous; values are -1 elsewhere.
    """
    states = np.asarray(states, dtype=float)
    scale = np.max(np.abs(states), axis=1)
    nonzero = scale > 0.0
    band = zero_band * np.where(nonzero, scale, 1.0)
    small = np.abs(states) <= band[:, None]
    snapped = np.where(small, 0.0, states)
    ambiguous = np.any(small & (states != 0.0), axis=1)

    endpoints_ok = (snapped[:, 0] != 0.0) & (snapped[:, -1] != 0.0)
    if states.shape[1] > 2:
        mid_zero = snapped[:, 1:-1] == 0.0
        flanked = snapped[:, :-2] * snapped[:, 2:] < 0.0
        interior_ok = np.all(~mid_zero | flanked, axis=1)
    else:
        interior_ok = np.ones(states.shape[0], dtype=bool)
    defined = endpoints_ok & interior_ok & nonzero

    head = snapped[:, :-1]
    values = np.count_nonzero((head == 0.0) | (head * snapped[:, 1:] < 0.0), axis=1)
    values = np.where(defined, values, -1)
    return values, defined, ambiguous


def _locate_drop(traj, t_lo, t_hi, sigma_lo, zero_band, refine_tol):
    """Bisect [t_lo, t_hi] for the time where sigma stops equaling sigma_lo.

    Ambiguous or undefined midpoints are treated as already past the drop,
    so the bracket converges onto the margin dip.
    """
    while t_hi - t_lo > refine_tol:
        mid = 0.5 * (t_lo + t_hi)
        r = sigma(traj(mid), zero_band)
        if r.defined and not r.ambiguous and r.value == sigma_lo:
            t_lo = mid
        else:
            t_hi = mid
    return 0.5 * (t_lo + t_hi)


def sigma_profile(
    traj,
    zero_band: float = DEFAULT_ZERO_BAND,
    refine_tol: float = DEFAULT_REFINE_TOL,
    max_dt: float | None = None,
) -> SigmaProfile:
    """Partition a trajectory's time span into maximal constant-sigma segments.

    ``traj`` must be callable at arbitrary times within its span and carry a
    ``times`` grid (a Trajectory from the integrator module, or anything
    duck-typed alike). Drop times between segments are localized by
    bisection onto the margin dip to within ``refine_tol``. A sigma value
    that increases from one segment to the next is an integrity failure:
    it contradicts the monotonicity the system class guarantees and
    signals integration error or tolerance misconfiguration.
    """
    ts = np.asarray(traj.times, dtype=float)
    if ts.size < 2:
        raise ArgumentError("trajectory carries fewer than two samples")
    if max_dt is not None and np.max(np.diff(ts)) > max_dt:
        fine = [ts[0]]
        for a, b in zip(ts[:-1], ts[1:]):
            k = int(np.ceil((b - a) / max_dt))
            fine.extend(np.linspace(a, b, k + 1)[1:])
        ts = np.asarray(fine)

    states = np.asarray([traj(t) for t in ts], dtype=float)
    norms = np.max(np.abs(states), axis=1)
    if np.all(norms == 0.0):
        raise ArgumentError("trajectory is numerically identically zero")

    values, defined, ambiguous = _sigma_batch(states, zero_band)

    profile = SigmaProfile()
    # samples that landed exactly outside the domain
    for t in ts[(values < 0) & (norms > 0.0)]:
        profile.undefined_times.append(float(t))

    ok = defined & ~ambiguous
    if not np.any(ok):
        # a solution riding the domain edge (an exact interior zero) is
        # ambiguous at every sample yet has a well-defined snapped count
        ok = defined
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        raise StructureError(
            "no classifiable sigma sample on the whole span",
            module="signchain", check="profile-sampling",
        )

    seg_start = ts[idx[0]]
    seg_val = int(values[idx[0]])
    last_t = ts[idx[0]]
    for j in idx[1:]:
        v = int(values[j])
        if v == seg_val:
            last_t = ts[j]
            continue
        t_drop = _locate_drop(traj, last_t, ts[j], seg_val, zero_band, refine_tol)
        profile.segments.append((float(seg_start), float(t_drop), seg_val))
        profile.drop_times.append(float(t_drop))
        profile.undefined_times.append(float(t_drop))
        try:
            profile.drop_margins.append(lambda_margin(traj(t_drop)))
        except ArgumentError:
            profile.drop_margins.append(0.0)
        if v > seg_val:
            raise StructureError(
                f"sigma increased from {seg_val} to {v} near t={t_drop:.6g}; "
                "sign-change count must be nonincreasing along solutions",
                module="signchain", check="sigma-monotone",
            )
        seg_start = t_drop
        seg_val = v
        last_t = ts[j]
    profile.segments.append((float(seg_start), float(ts[idx[-1]]), seg_val))

    vals = profile.values
    if any(b >= a for a, b in zip(vals[:-1], vals[1:])):
        raise StructureError(
            f"segment sigma values {vals} are not strictly decreasing",
            module="signchain", check="sigma-monotone",
        )
    profile.undefined_times = sorted(set(profile.undefined_times))
    return profile
