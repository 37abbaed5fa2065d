"""Time-dependent cooperative tridiagonal coefficient matrices.

A system is described by three band samplers (diagonal, super- and
sub-diagonal) with a declared cooperativity floor on the off-diagonal
bands, a declared sup-norm bound, and a uniform-continuity descriptor
(constant / periodic / quasi-periodic / general). The module also provides
the sign-flip change of variables that turns a competitive or mixed-sign
system into a cooperative one, the periodic truncation family used to
build Floquet solutions of general time-dependent systems, and
quasi-periodic samplers driven by a linear torus flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ArgumentError, StructureError

BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class Modulus:
    """Uniform-continuity descriptor of a coefficient family."""

    kind: str  # "constant" | "periodic" | "quasi-periodic" | "lipschitz" | "general"
    period: Optional[float] = None
    frequencies: Optional[tuple] = None
    lipschitz: Optional[float] = None

    @staticmethod
    def constant():
        return Modulus("constant")

    @staticmethod
    def periodic(period: float):
        if period <= 0:
            raise ArgumentError("period must be positive")
        return Modulus("periodic", period=float(period))

    @staticmethod
    def quasi_periodic(frequencies):
        return Modulus("quasi-periodic", frequencies=tuple(float(w) for w in frequencies))

    @staticmethod
    def lipschitz_const(L: float):
        return Modulus("lipschitz", lipschitz=float(L))

    @staticmethod
    def general():
        return Modulus("general")


@dataclass(frozen=True)
class SignPattern:
    """Coordinate sign flips x_i -> mu_i x_i removing off-diagonal signs.

    deltas[i] is the common sign of the i-th off-diagonal pair; mus is the
    induced flip sequence with mu_1 = 1, mu_i = delta_{i-1} mu_{i-1}.
    """

    deltas: tuple
    mus: tuple

    def __post_init__(self):
        d = np.asarray(self.deltas)
        m = np.asarray(self.mus)
        if m[0] != 1:
            raise ArgumentError("mu_1 must be +1")
        if not np.all(m[:-1] * m[1:] * d == 1):
            raise ArgumentError("sign pattern does not cooperativize: mu_i mu_{i+1} delta_i != 1")


def cooperativize(deltas) -> SignPattern:
    """Build the flip sequence mu from the off-diagonal sign vector delta."""
    d = np.asarray(deltas, dtype=int)
    if d.ndim != 1 or not np.all(np.abs(d) == 1):
        raise ArgumentError("deltas must be a vector of +/-1")
    mus = np.ones(d.size + 1, dtype=int)
    for i in range(1, mus.size):
        mus[i] = d[i - 1] * mus[i - 1]
    return SignPattern(deltas=tuple(int(v) for v in d), mus=tuple(int(v) for v in mus))


class TridiagCoefficients:
    """Sampler bundle for A(t), tridiagonal with a cooperativity floor.

    ``diag``, ``upper`` and ``lower`` are pure functions of t returning
    arrays of lengths n, n-1, n-1. Every sample is checked against the
    declared floor and bound; a violation is a hard error naming the
    offending band index and time. When ``deltas`` is given the floor is
    enforced in signed form delta_i * band_i(t) >= eps0 (competitive or
    mixed-sign input awaiting ``transform_coefficients``). Truncation
    ramps set ``floor_weakened`` so the off-diagonals are only required
    to be nonnegative.
    """

    def __init__(self, n, diag, upper, lower, eps0, bound, modulus,
                 deltas=None, floor_weakened=False, name="coefficients",
                 scenario_dict=None):
        if n < 2:
            raise ArgumentError("dimension must be >= 2")
        if eps0 <= 0:
            raise ArgumentError("eps0 must be positive")
        if bound <= 0:
            raise ArgumentError("bound must be positive")
        self.n = int(n)
        self._diag = diag
        self._upper = upper
        self._lower = lower
        self.eps0 = float(eps0)
        self.bound = float(bound)
        self.modulus = modulus
        self.deltas = None if deltas is None else np.asarray(deltas, dtype=int)
        if self.deltas is not None and self.deltas.size != n - 1:
            raise ArgumentError("deltas must have length n-1")
        self.floor_weakened = bool(floor_weakened)
        self.name = name
        self.scenario_dict = scenario_dict
        self._deltas_f = None if self.deltas is None else self.deltas.astype(float)
        self._floor = -BOUND_SLACK if self.floor_weakened else self.eps0 - BOUND_SLACK

    @property
    def cooperative(self) -> bool:
        return self.deltas is None or bool(np.all(self.deltas == 1))

    def _check_band(self, values, which, t, size):
        values = np.asarray(values, dtype=float)
        if values.shape != (size,):
            raise ArgumentError(f"{which} sampler returned shape {values.shape}, expected ({size},)")
        if np.max(np.abs(values)) > self.bound + BOUND_SLACK:
            i = int(np.argmax(np.abs(values)))
            raise StructureError(
                f"{self.name}: |{which}[{i}]({t})| = {abs(values[i]):.6g} exceeds declared bound {self.bound}",
                module="tridiag-core", check="bound",
            )
        if which != "diag":
            signed = values if self.deltas is None else self.deltas * values
            floor = -BOUND_SLACK if self.floor_weakened else self.eps0 - BOUND_SLACK
            bad = np.flatnonzero(signed < floor)
            if bad.size:
                i = int(bad[0])
                raise StructureError(
                    f"{self.name}: off-diagonal {which}[{i}]({t}) = {values[i]:.6g} "
                    f"falls below the cooperativity floor {self.eps0}",
                    module="tridiag-core", check="cooperativity-floor",
                )
        return values

    def bands(self, t):
        """(diag, upper, lower) at time t, with invariant checks.

        Checks run on every sample (hard contract), so the hot path is a
        handful of fused vector comparisons; diagnostics are rebuilt on
        the cold path only.
        """
        d = np.asarray(self._diag(t), dtype=float)
        u = np.asarray(self._upper(t), dtype=float)
        lo = np.asarray(self._lower(t), dtype=float)
        n = self.n
        if d.shape != (n,) or u.shape != (n - 1,) or lo.shape != (n - 1,):
            self._check_band(d, "diag", t, n)
            self._check_band(u, "upper", t, n - 1)
            self._check_band(lo, "lower", t, n - 1)
        cap = self.bound + BOUND_SLACK
        su, slo = (u, lo) if self._deltas_f is None else (self._deltas_f * u,
                                                          self._deltas_f * lo)
        if (np.abs(d) > cap).any() or (np.abs(u) > cap).any() \
                or (np.abs(lo) > cap).any() or (su < self._floor).any() \
                or (slo < self._floor).any():
            self._check_band(d, "diag", t, n)
            self._check_band(u, "upper", t, n - 1)
            self._check_band(lo, "lower", t, n - 1)
        return d, u, lo

    def matrix(self, t):
        d, u, lo = self.bands(t)
        A = np.diag(d)
        A += np.diag(u, 1)
        A += np.diag(lo, -1)
        return A

    def apply(self, t, x):
        """A(t) @ x without forming the matrix (works on (n,) and (n, k))."""
        d, u, lo = self.bands(t)
        x = np.asarray(x)
        if x.ndim == 1:
            out = d * x
            out[:-1] += u * x[1:]
            out[1:] += lo * x[:-1]
        else:
            out = d[:, None] * x
            out[:-1] += u[:, None] * x[1:]
            out[1:] += lo[:, None] * x[:-1]
        return out

    def trace(self, t):
        return float(np.sum(self._check_band(self._diag(t), "diag", t, self.n)))

    @property
    def period(self):
        if self.modulus.kind != "periodic":
            raise ArgumentError(f"{self.name} is not declared periodic")
        return self.modulus.period

    # ------------------------------------------------------------------
    @staticmethod
    def constant(M, eps0, bound=None, deltas=None, modulus=None, name="constant"):
        """Wrap a constant matrix (must be tridiagonal)."""
        M = np.asarray(M, dtype=float)
        n = M.shape[0]
        if M.shape != (n, n):
            raise ArgumentError("matrix must be square")
        off = np.abs(M) * (1 - np.eye(n))
        for k in range(2, n):
            if np.any(np.abs(np.diag(M, k)) > 0) or np.any(np.abs(np.diag(M, -k)) > 0):
                raise ArgumentError("matrix is not tridiagonal")
        d = np.diag(M).copy()
        u = np.diag(M, 1).copy()
        lo = np.diag(M, -1).copy()
        if bound is None:
            bound = max(np.max(np.abs(M)), eps0)
        return TridiagCoefficients(
            n, lambda t: d, lambda t: u, lambda t: lo,
            eps0=eps0, bound=bound,
            modulus=Modulus.constant() if modulus is None else modulus,
            deltas=deltas, name=name,
        )


def transform_coefficients(A: TridiagCoefficients, pattern: SignPattern) -> TridiagCoefficients:
    """Apply the flip x_i -> mu_i x_i to the bands: a_ij -> mu_i mu_j a_ij.

    The diagonal is unchanged (mu_i^2 = 1); the output satisfies the
    cooperative floor with the same eps0.
    """
    mus = np.asarray(pattern.mus, dtype=float)
    if mus.size != A.n:
        raise ArgumentError("sign pattern dimension does not match the system")
    if A.deltas is not None and tuple(int(v) for v in A.deltas) != tuple(pattern.deltas):
        raise ArgumentError("sign pattern deltas do not match the system's declared deltas")
    uw = mus[:-1] * mus[1:]  # mu_i mu_{i+1}, same factor for both off-bands
    upper, lower, diag = A._upper, A._lower, A._diag
    return TridiagCoefficients(
        A.n,
        diag=diag,
        upper=lambda t: uw * np.asarray(upper(t), dtype=float),
        lower=lambda t: uw * np.asarray(lower(t), dtype=float),
        eps0=A.eps0, bound=A.bound, modulus=A.modulus,
        deltas=None, name=A.name + ":cooperativized",
    )


def truncated_periodic(A: TridiagCoefficients, k: int) -> TridiagCoefficients:
    """Periodic truncation of period 2(k+1).

    Equals A on (-k, k), ramps linearly to the zero matrix on
    (-k-1, -k) and (k, k+1) through the frozen samples A(-k) and A(k), and
    extends periodically. The ramp scales the whole matrix, so the
    off-diagonal floor is lost on the ramp intervals; the returned object
    is flagged ``floor_weakened`` and downstream periodic Floquet analysis
    must accept nonnegative off-diagonals for it.
    """
    if k < 1:
        raise ArgumentError("truncation index k must be >= 1")
    if not A.cooperative:
        raise ArgumentError("truncate a cooperative system (transform first)")
    period = 2.0 * (k + 1)
    d_lo, u_lo, l_lo = A.bands(-float(k))
    d_hi, u_hi, l_hi = A.bands(float(k))
    diag, upper, lower = A._diag, A._upper, A._lower

    def factor_and_base(t):
        tt = np.mod(t + (k + 1), period) - (k + 1)
        if tt <= -k:
            return tt + k + 1.0, None  # ramp up through A(-k)
        if tt >= k:
            return k + 1.0 - tt, True  # ramp down through A(k)
        return None, tt

    def make(sampler, frozen_lo, frozen_hi):
        def band(t):
            f, where = factor_and_base(t)
            if f is None:
                return np.asarray(sampler(where), dtype=float)
            return f * (frozen_hi if where else frozen_lo)
        return band

    return TridiagCoefficients(
        A.n,
        diag=make(diag, d_lo, d_hi),
        upper=make(upper, u_lo, u_hi),
        lower=make(lower, l_lo, l_hi),
        eps0=A.eps0, bound=A.bound,
        modulus=Modulus.periodic(period),
        floor_weakened=True,
        name=f"{A.name}:truncated(k={k})",
    )


DEFAULT_FREQUENCIES = (1.0 / (2.0 * np.pi), np.sqrt(2.0) / (2.0 * np.pi))


class QuasiPeriodicSampler:
    """Scalar or vector sampler driven by a linear torus flow.

    Evaluation at time t is torus_function((phase0 + omega * t) mod 1);
    the phase is always computed from t analytically, never accumulated.
    """

    def __init__(self, frequencies, torus_function, phase0=None):
        self.frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
        self.torus_function = torus_function
        if phase0 is None:
            phase0 = np.zeros_like(self.frequencies)
        self.phase0 = np.mod(np.atleast_1d(np.asarray(phase0, dtype=float)), 1.0)
        if self.phase0.shape != self.frequencies.shape:
            raise ArgumentError("phase0 and frequencies must have the same length")

    def phase(self, t):
        return np.mod(self.phase0 + self.frequencies * t, 1.0)

    def __call__(self, t):
        return self.torus_function(self.phase(t))


class TrigBand:
    """Trigonometric-polynomial band: const + sum of amp*{sin,cos}(2 pi k.theta).

    theta is the torus phase at time t, advanced analytically from phase0
    with the given frequencies (periodic bands use the single frequency
    1/T). Keeps its defining data, so scenario round-trips are exact.
    """

    def __init__(self, const, terms=(), frequencies=(), phase0=None):
        self.const = np.asarray(const, dtype=float)
        self.terms = list(terms)  # (amp_vector, harmonic_vector, kind)
        self.frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
        d = self.frequencies.size
        self.phase0 = np.zeros(d) if phase0 is None else np.asarray(phase0, dtype=float)

    def __call__(self, t):
        out = self.const.copy()
        if self.terms:
            theta = np.mod(self.phase0 + self.frequencies * t, 1.0)
            for amp, harmonic, kind in self.terms:
                arg = 2.0 * np.pi * float(np.dot(harmonic, theta))
                out = out + np.asarray(amp, dtype=float) * (np.sin(arg) if kind == "sin" else np.cos(arg))
        return out

    def amplitude_bound(self):
        b = np.abs(self.const).astype(float)
        for amp, _, _ in self.terms:
            b = b + np.abs(np.asarray(amp, dtype=float))
        return b

    def floor_bound(self):
        b = self.const.astype(float).copy()
        for amp, _, _ in self.terms:
            b = b - np.abs(np.asarray(amp, dtype=float))
        return b


def from_trig_bands(n, diag: TrigBand, upper: TrigBand, lower: TrigBand,
                    eps0, modulus, deltas=None, name="trig-bands",
                    scenario_dict=None) -> TridiagCoefficients:
    """Assemble coefficients from trig-polynomial bands; the declared bound
    and the floor feasibility are derived from the band amplitudes."""
    bound = float(max(np.max(diag.amplitude_bound()), np.max(upper.amplitude_bound()),
                      np.max(lower.amplitude_bound()), eps0))
    for which, band in (("upper", upper), ("lower", lower)):
        osc = band.amplitude_bound() - np.abs(band.const)
        signed_const = band.const if deltas is None else np.asarray(deltas) * band.const
        fl = signed_const - osc
        if np.any(fl < eps0 - 1e-12):
            raise ArgumentError(
                f"{name}: {which} band cannot satisfy the floor {eps0} (worst bound {np.min(fl):.6g})")
    return TridiagCoefficients(
        n, diag, upper, lower, eps0=eps0, bound=bound, modulus=modulus,
        deltas=deltas, name=name, scenario_dict=scenario_dict,
    )
