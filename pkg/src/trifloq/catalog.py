"""Registered example systems, referenced by stable string IDs.

Scenarios select systems from this catalog (optionally overriding
parameters) instead of parsing expressions. Linear fixtures build
coefficient samplers, skew fixtures build torus-driven nonlinear
right-hand sides; competitive fixtures are stored in their natural signed
form and cooperativized at build time, with the applied flip pattern
reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coeffs import (Modulus, SignPattern, TridiagCoefficients, TrigBand,
                     cooperativize, from_trig_bands, transform_coefficients)
from .errors import ArgumentError
from .skew import SkewRHS

DEFAULT_QP_FREQS = (1.0 / (2.0 * np.pi), np.sqrt(2.0) / (2.0 * np.pi))
CIRCLE_FREQ = np.sqrt(2.0) - 1.0


@dataclass
class BuiltFixture:
    fixture_id: str
    kind: str                       # "linear" | "skew"
    system: object                  # TridiagCoefficients | SkewRHS
    pattern: SignPattern | None = None
    x0: np.ndarray | None = None
    theta0: np.ndarray | None = None
    bound: float | None = None
    params: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)  # e.g. matrix/forcing of forced-linear fixtures


def _symmetric_chain(n):
    return (np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)).astype(float)


def _build_const_symmetric(n):
    def build(params):
        period = params.get("period")
        modulus = Modulus.periodic(period) if period else Modulus.constant()
        A = TridiagCoefficients.constant(_symmetric_chain(n), eps0=0.5,
                                         modulus=modulus,
                                         name=f"const-symmetric-n{n}")
        return BuiltFixture(f"const-symmetric-n{n}", "linear", A,
                            x0=np.ones(n), params=dict(params))
    return build


def _build_periodic_shift_n3(params):
    amp = float(params.get("amp", 0.5))
    period = float(params.get("period", 1.0))
    M = _symmetric_chain(3)
    d0 = np.diag(M).copy()

    def diag(t):
        return d0 + amp * np.sin(2.0 * np.pi * t / period)

    A = TridiagCoefficients(3, diag, lambda t: np.ones(2), lambda t: np.ones(2),
                            eps0=0.5, bound=2.0 + amp,
                            modulus=Modulus.periodic(period),
                            name="periodic-shift-n3")
    return BuiltFixture("periodic-shift-n3", "linear", A, x0=np.ones(3),
                        params={"amp": amp, "period": period})


def _build_quasiperiodic_linear_n3(params):
    amp = float(params.get("amp", 0.25))
    freqs = tuple(params.get("frequencies", DEFAULT_QP_FREQS))
    d = TrigBand(const=[0.2, 0.0, -0.2],
                 terms=[([amp, -amp, amp], [1, 0], "sin"),
                        ([0.5 * amp, 0.5 * amp, -0.5 * amp], [0, 1], "cos")],
                 frequencies=freqs)
    u = TrigBand(const=[1.2, 1.0],
                 terms=[([amp, -amp], [1, 0], "cos")], frequencies=freqs)
    lo = TrigBand(const=[1.0, 1.3],
                  terms=[([-amp, amp], [0, 1], "sin")], frequencies=freqs)
    A = from_trig_bands(3, d, u, lo, eps0=0.5,
                        modulus=Modulus.quasi_periodic(freqs),
                        name="quasiperiodic-linear-n3")
    return BuiltFixture("quasiperiodic-linear-n3", "linear", A, x0=np.ones(3),
                        params={"amp": amp, "frequencies": list(freqs)})


def _forced_linear_skew(fixture_id, M, amp, omega, eps0, name):
    M = np.asarray(M, dtype=float)

    def f1(theta, x1, x2):
        return M[0, 0] * x1 + M[0, 1] * x2 + amp[0] * np.sin(2 * np.pi * theta[0])

    def f2(theta, x1, x2):
        return M[1, 0] * x1 + M[1, 1] * x2 + amp[1] * np.cos(2 * np.pi * theta[0])

    parts = [lambda theta, x1, x2: (M[0, 0], M[0, 1]),
             lambda theta, x1, x2: (M[1, 0], M[1, 1])]
    return SkewRHS(2, 1, (omega,), [f1, f2], eps0=eps0, partials=parts, name=name)


def _forcing(amp, omega):
    def b(t):
        arg = 2.0 * np.pi * omega * t
        return np.array([amp[0] * np.sin(arg), amp[1] * np.cos(arg)])
    return b


def _build_hurwitz_forced(params):
    amp = float(params.get("amp", 0.01))
    omega = float(params.get("omega", CIRCLE_FREQ))
    M = np.array([[-2.0, 1.0], [1.0, -2.0]])
    f = _forced_linear_skew("hurwitz-forced-n2", M, (amp, amp), omega,
                            eps0=0.5, name="hurwitz-forced-n2")
    return BuiltFixture("hurwitz-forced-n2", "skew", f,
                        x0=np.zeros(2), theta0=np.zeros(1), bound=5.0,
                        params={"amp": amp, "omega": omega},
                        extras={"matrix": M, "forcing": _forcing((amp, amp), omega)})


def _build_saddle_forced(params):
    amp = float(params.get("amp", 0.2))
    omega = float(params.get("omega", CIRCLE_FREQ))
    M = np.array([[0.0, 1.0], [1.0, 0.0]])
    f = _forced_linear_skew("saddle-forced-n2", M, (amp, 0.0), omega,
                            eps0=0.5, name="saddle-forced-n2")
    return BuiltFixture("saddle-forced-n2", "skew", f,
                        x0=np.zeros(2), theta0=np.zeros(1), bound=10.0,
                        params={"amp": amp, "omega": omega},
                        extras={"matrix": M, "forcing": _forcing((amp, 0.0), omega)})


def _build_bistable(params):
    coupling = float(params.get("coupling", 0.3))
    amp = float(params.get("amp", 0.05))
    omega = float(params.get("omega", CIRCLE_FREQ))

    def f1(theta, x1, x2):
        return x1 - x1 ** 3 + coupling * (x2 - x1) + amp * np.sin(2 * np.pi * theta[0])

    def f2(theta, x1, x2):
        return x2 - x2 ** 3 + coupling * (x1 - x2)

    parts = [lambda theta, x1, x2: (1.0 - 3.0 * x1 ** 2 - coupling, coupling),
             lambda theta, x1, x2: (coupling, 1.0 - 3.0 * x2 ** 2 - coupling)]
    f = SkewRHS(2, 1, (omega,), [f1, f2], eps0=coupling,
                partials=parts, name="bistable-coop-n2")
    return BuiltFixture("bistable-coop-n2", "skew", f,
                        x0=np.array([1.0, 1.0]), theta0=np.zeros(1), bound=5.0,
                        params={"coupling": coupling, "amp": amp, "omega": omega,
                                "basins": [[1.0, 1.0], [-1.0, -1.0]]})


def _build_competitive_2d(params):
    """Affine competitive pair, stored signed and cooperativized on build."""
    amp = float(params.get("amp", 0.1))
    omega = float(params.get("omega", CIRCLE_FREQ))
    pattern = cooperativize([-1])
    mus = np.asarray(pattern.mus, dtype=float)
    # original: x' = [[-1,-0.5],[-0.5,-1]] x + (1.5 + amp sin, 1.5);
    # the flip x_i -> mu_i x_i gives off-diagonals +0.5 and forcing (k1, -k2)
    M = np.array([[-1.0, 0.5], [0.5, -1.0]])

    def f1(theta, x1, x2):
        return M[0, 0] * x1 + M[0, 1] * x2 + mus[0] * (
            1.5 + amp * np.sin(2 * np.pi * theta[0]))

    def f2(theta, x1, x2):
        return M[1, 0] * x1 + M[1, 1] * x2 + mus[1] * 1.5

    parts = [lambda theta, x1, x2: (M[0, 0], M[0, 1]),
             lambda theta, x1, x2: (M[1, 0], M[1, 1])]
    f = SkewRHS(2, 1, (omega,), [f1, f2], eps0=0.5, partials=parts,
                name="competitive-2d")
    return BuiltFixture("competitive-2d", "skew", f, pattern=pattern,
                        x0=np.array([1.0, -1.0]), theta0=np.zeros(1), bound=10.0,
                        params={"amp": amp, "omega": omega})


@dataclass(frozen=True)
class FixtureSpec:
    fixture_id: str
    kind: str
    description: str
    build: object


_SPECS = [
    FixtureSpec(f"const-symmetric-n{n}", "linear",
                f"constant symmetric chain, n={n}, unit off-diagonals",
                _build_const_symmetric(n))
    for n in range(2, 7)
] + [
    FixtureSpec("periodic-shift-n3", "linear",
                "symmetric chain n=3 plus a periodic scalar diagonal shift",
                _build_periodic_shift_n3),
    FixtureSpec("quasiperiodic-linear-n3", "linear",
                "n=3 cooperative bands driven by a two-frequency torus flow",
                _build_quasiperiodic_linear_n3),
    FixtureSpec("hurwitz-forced-n2", "skew",
                "stable linear pair under weak circle forcing (unique "
                "attracting graph)", _build_hurwitz_forced),
    FixtureSpec("saddle-forced-n2", "skew",
                "saddle linear pair under circle forcing (hyperbolic "
                "bounded solution)", _build_saddle_forced),
    FixtureSpec("bistable-coop-n2", "skew",
                "cubic bistable cooperative pair, two attracting graphs",
                _build_bistable),
    FixtureSpec("competitive-2d", "skew",
                "2-D competitive affine pair, cooperativized on build",
                _build_competitive_2d),
]

FIXTURES = {spec.fixture_id: spec for spec in _SPECS}


def fixture_ids():
    return [spec.fixture_id for spec in _SPECS]


def build_fixture(fixture_id, params=None) -> BuiltFixture:
    if fixture_id not in FIXTURES:
        raise ArgumentError(
            f"unknown fixture {fixture_id!r}; known: {', '.join(fixture_ids())}")
    return FIXTURES[fixture_id].build(dict(params or {}))


def catalog_records():
    return [{"id": spec.fixture_id, "kind": spec.kind,
             "description": spec.description} for spec in _SPECS]
