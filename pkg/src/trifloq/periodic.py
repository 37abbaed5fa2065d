"""Floquet multipliers, exponents and eigenvectors of periodic systems.

For a T-periodic cooperative tridiagonal system the period map has n
distinct positive real eigenvalues, and the eigenvector of the m-th
largest carries exactly m sign changes. The decomposition here computes
the monodromy matrix, extracts the full spectrum by power iteration with
Hotelling-style deflation (cross-checked by inverse iteration on the
smallest multiplier), and validates the structure the theory guarantees.
A failed structure check is the designated detection path for inputs that
silently violated cooperativity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import signchain
from .coeffs import TridiagCoefficients
from .errors import ArgumentError, ConvergenceError, StructureError
from .integrate import fundamental_matrix, integrate_linear

DEFAULT_EIGEN_TOL = 1e-10
DEFAULT_RESID_TOL = 1e-8
MAX_POWER_ITER = 200_000


@dataclass
class FloquetDecomposition:
    """Ordered multipliers, exponents and sign-normalized eigenvectors."""

    period: float
    multipliers: np.ndarray          # strictly decreasing, positive
    exponents: np.ndarray            # ln(multiplier)/period
    eigenvectors: np.ndarray         # columns, unit, first coordinate > 0
    sigma_labels: np.ndarray
    residuals: np.ndarray
    crosscheck_angle: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def n(self):
        return self.multipliers.size

    def to_record(self):
        return {
            "period": self.period,
            "multipliers": self.multipliers.tolist(),
            "exponents": self.exponents.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
            "sigma_labels": self.sigma_labels.tolist(),
            "residuals": self.residuals.tolist(),
            "smallest_multiplier_crosscheck_angle": self.crosscheck_angle,
            "warnings": list(self.warnings),
        }


def monodromy(A: TridiagCoefficients, rel_tol=1e-9, abs_tol=1e-12, t0=0.0,
              return_trace=False):
    """Period map Phi(t0 + T, t0) of a declared-periodic system.

    The direct Liouville check is skipped here (the period can be long and
    the determinant ill-conditioned); the decomposition validates the same
    identity through the multiplier product instead.
    """
    T = A.period  # raises if not declared periodic
    fm = fundamental_matrix(A, t0, t0 + T, rel_tol=rel_tol, abs_tol=abs_tol,
                            check=False)
    if return_trace:
        return fm.final, fm.trace_integral(t0 + T)
    return fm.final


def _start_vector(n):
    # deterministic, with a slight tilt so it is not orthogonal to any
    # eigenvector of a symmetric test matrix
    v = np.ones(n) + 1e-3 * np.arange(1, n + 1)
    return v / np.linalg.norm(v)


def _power_iterate(M, tol, start=None):
    """Dominant eigenpair of M by power iteration.

    Converges when the direction change drops below tol. Assumes the
    dominant eigenvalue is real positive, which holds for the deflated
    monodromy matrices this module feeds it.
    """
    v = _start_vector(M.shape[0]) if start is None else start / np.linalg.norm(start)
    for _ in range(MAX_POWER_ITER):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise ConvergenceError("power iteration hit the null space")
        w /= nw
        if np.dot(w, v) < 0:
            w = -w
            nw = -nw
        gap = np.linalg.norm(w - v)
        v = w
        if gap < tol:
            alpha = float(np.dot(v, M @ v))
            return alpha, v
    raise ConvergenceError(
        f"power iteration did not converge below {tol} in {MAX_POWER_ITER} steps "
        "(oscillating direction suggests complex or non-simple spectrum)")


def _inverse_iterate(M, tol, start=None):
    """Eigenvector of the smallest-|eigenvalue| mode via inverse iteration."""
    import scipy.linalg as sla
    lu = sla.lu_factor(M)
    v = _start_vector(M.shape[0]) if start is None else start / np.linalg.norm(start)
    for _ in range(MAX_POWER_ITER):
        w = sla.lu_solve(lu, v)
        w /= np.linalg.norm(w)
        if np.dot(w, v) < 0:
            w = -w
        gap = np.linalg.norm(w - v)
        v = w
        if gap < tol:
            return v
    raise ConvergenceError("inverse iteration did not converge")


def floquet_decompose(M, T, eigen_tol=DEFAULT_EIGEN_TOL,
                      resid_tol=DEFAULT_RESID_TOL,
                      sigma_checks=True, strict=True,
                      zero_band=signchain.DEFAULT_ZERO_BAND) -> FloquetDecomposition:
    """Full positive simple spectrum of a monodromy matrix.

    Power iteration peels multipliers in descending order; after each
    eigenpair the matrix is deflated with the matching left eigenvector
    (which leaves the remaining right eigenvectors untouched). The
    smallest multiplier is cross-checked by inverse iteration on the
    original matrix. Simplicity and positivity are always enforced;
    sigma labels and the sign convention can be downgraded to warnings
    with ``strict=False`` or skipped with ``sigma_checks=False``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ArgumentError("monodromy matrix must be square")
    norm_M = np.linalg.norm(M, 2)

    Mk = M.copy()
    alphas = np.empty(n)
    vecs = np.empty((n, n))
    try:
        for m in range(n):
            alpha, v = _power_iterate(Mk, eigen_tol)
            wl = _power_iterate(Mk.T, eigen_tol)[1]
            denom = np.dot(wl, v)
            if abs(denom) < 1e-12:
                raise ConvergenceError(
                    "left/right eigenvectors nearly orthogonal; deflation ill-posed")
            alphas[m] = alpha
            vecs[:, m] = v
            Mk = Mk - np.outer(v, wl) * (alpha / denom)
    except ConvergenceError as exc:
        raise StructureError(
            f"eigen solve failed ({exc}); spectrum may be complex or non-simple, "
            "which points at violated cooperativity",
            module="periodic-floquet", check="spectrum-simple-real",
        ) from exc

    order = np.argsort(alphas)[::-1]
    alphas = alphas[order]
    vecs = vecs[:, order]

    # Deflation loses accuracy on the small modes when the multiplier
    # spread is wide (cancellation at the eps * |M| level); a couple of
    # shifted-inverse steps on the original matrix restores them.
    import scipy.linalg as sla
    eye = np.eye(n)
    for m in range(n):
        shift = alphas[m] * (1.0 + 1e-8)
        v = vecs[:, m]
        for _ in range(2):
            try:
                x = sla.solve(M - shift * eye, v)
            except (sla.LinAlgError, ValueError):
                break
            nx = np.linalg.norm(x)
            if not np.isfinite(nx) or nx == 0.0:
                break
            x /= nx
            if np.dot(x, v) < 0:
                x = -x
            v = x
        vecs[:, m] = v
        alphas[m] = float(v @ (M @ v))
    residuals = np.array([np.linalg.norm(M @ vecs[:, m] - alphas[m] * vecs[:, m])
                          for m in range(n)])

    if np.any(alphas <= 0.0):
        raise StructureError(
            f"non-positive multiplier found: {alphas.tolist()}",
            module="periodic-floquet", check="multipliers-positive",
        )
    rel_gaps = (alphas[:-1] - alphas[1:]) / np.abs(alphas[:-1])
    if np.any(rel_gaps <= 100 * eigen_tol):
        raise StructureError(
            f"multipliers are not numerically simple: {alphas.tolist()}",
            module="periodic-floquet", check="spectrum-simple-real",
        )
    bad = residuals > resid_tol * max(norm_M, 1e-300)
    if np.any(bad):
        raise StructureError(
            f"eigen residuals {residuals.tolist()} exceed {resid_tol}*|M|",
            module="periodic-floquet", check="residual",
        )

    crosscheck = _inverse_iterate(M, eigen_tol)
    dot = abs(float(np.dot(crosscheck, vecs[:, n - 1])))
    crosscheck_angle = float(np.arccos(min(1.0, dot)))
    if crosscheck_angle > 1e-6:
        raise StructureError(
            f"inverse-iteration cross-check disagrees with the deflated smallest "
            f"multiplier by {crosscheck_angle:.3e} rad",
            module="periodic-floquet", check="smallest-multiplier-crosscheck",
        )

    warnings_ = []
    sigma_labels = np.full(n, -1)
    if sigma_checks:
        for m in range(n):
            if vecs[0, m] < 0:
                vecs[:, m] = -vecs[:, m]
            if abs(vecs[0, m]) == 0.0:
                msg = f"eigenvector {m} has zero first coordinate (outside the sigma domain)"
                if strict:
                    raise StructureError(msg, module="periodic-floquet", check="sign-convention")
                warnings_.append(msg)
            r = signchain.sigma(vecs[:, m], zero_band)
            sigma_labels[m] = r.value if r.defined else -1
            if not (r.defined and r.value == m):
                msg = (f"sigma(eigenvector {m}) = "
                       f"{r.value if r.defined else 'undefined'}, expected {m}")
                if strict:
                    raise StructureError(msg, module="periodic-floquet", check="sigma-labels")
                warnings_.append(msg)

    return FloquetDecomposition(
        period=float(T),
        multipliers=alphas,
        exponents=np.log(alphas) / float(T),
        eigenvectors=vecs,
        sigma_labels=sigma_labels,
        residuals=residuals,
        crosscheck_angle=crosscheck_angle,
        warnings=warnings_,
    )


def floquet_decompose_system(A: TridiagCoefficients, liouville_tol=1e-6,
                             **kwargs) -> FloquetDecomposition:
    """Monodromy + decomposition, with the product-form Liouville check.

    sum(ln multipliers) must match the integral of trace A over one
    period; unlike the raw determinant this is well-conditioned for any
    period length.
    """
    rel_tol = kwargs.pop("rel_tol", 1e-9)
    abs_tol = kwargs.pop("abs_tol", 1e-12)
    M, s = monodromy(A, rel_tol=rel_tol, abs_tol=abs_tol, return_trace=True)
    dec = floquet_decompose(M, A.period, **kwargs)
    r = abs(float(np.sum(np.log(dec.multipliers))) - s) / max(1.0, abs(s))
    if r > liouville_tol:
        raise StructureError(
            f"multiplier product disagrees with exp(int trace A): residual {r:.3e}",
            module="periodic-floquet", check="liouville-product")
    return dec


def floquet_solution_periodic(dec: FloquetDecomposition, A: TridiagCoefficients,
                              m, horizon=(-5.0, 5.0), gain_window=(1e-2, 1e2),
                              rel_tol=1e-9, abs_tol=1e-12):
    """Integrate the m-th Floquet solution and verify its invariants.

    Starting from the m-th eigenvector, sigma must stay m over the whole
    horizon and the norm at integer multiples of the period must track
    multiplier^k within the allowed window.
    """
    if not 0 <= m < dec.n:
        raise ArgumentError(f"mode index {m} out of range")
    t_lo, t_hi = horizon
    v = dec.eigenvectors[:, m]
    T = dec.period

    legs = []
    if t_hi > 0:
        legs.append(integrate_linear(A, v, 0.0, t_hi, rel_tol, abs_tol))
    if t_lo < 0:
        legs.append(integrate_linear(A, v, 0.0, t_lo, rel_tol, abs_tol))
    for leg in legs:
        prof = signchain.sigma_profile(leg, max_dt=min(0.05, T / 20.0))
        if prof.values != [m]:
            raise StructureError(
                f"Floquet solution {m} lost its sigma value: profile {prof.values}",
                module="periodic-floquet", check="solution-sigma",
            )
        ks = np.arange(np.ceil(leg.span[0] / T), np.floor(leg.span[1] / T) + 1)
        for k in ks:
            if k == 0:
                continue
            gain = np.linalg.norm(leg(k * T)) / dec.multipliers[m] ** k
            if not gain_window[0] <= gain <= gain_window[1]:
                raise StructureError(
                    f"norm gain at k={k:g} periods is {gain:.3e} x multiplier^k, "
                    "outside the allowed window",
                    module="periodic-floquet", check="solution-gain",
                )
    return legs
