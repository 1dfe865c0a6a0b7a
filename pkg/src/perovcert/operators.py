"""Cone order on R^n and the nonnegative-matrix convergence toolkit.

The ambient space is R^n ordered componentwise by the nonnegative orthant:
u is below v when every component of v - u is nonnegative, and strictly
below when every component is strictly positive.  Nonnegative square
matrices are exactly the linear maps that preserve the orthant, and a
nonnegative matrix whose powers vanish admits four equivalent
characterizations (power decay, spectral radius below one, convergent
geometric operator series, entrywise-nonnegative inverse of I - A).  This
module evaluates all four independently and insists that they agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NORMAL_CONSTANT",
    "ConeOrderConfig",
    "ConeVector",
    "OperatorMatrix",
    "ZeroConvergenceEvidence",
    "DimensionMismatch",
    "SpectralRadiusTooLarge",
    "SpectralRadiusNonConvergence",
    "SingularSystem",
    "NumericalInconsistency",
    "CriteriaDisagreement",
    "cone_leq",
    "cone_ll",
    "operator_norm_inf",
    "spectral_radius",
    "matrix_power",
    "neumann_inverse",
    "is_zero_convergent",
]

# The nonnegative orthant is a normal cone with constant 1: theta <= u <= v
# forces ||u|| <= ||v|| in the max norm, with no inflation factor.
NORMAL_CONSTANT = 1.0

DECAY_THRESHOLD = 1e-8
DECAY_WINDOW = 512
INDETERMINATE_BAND = 1e-6
INVERSE_ENTRY_EPS = 1e-9


class DimensionMismatch(ValueError):
    """Operands live in spaces of different dimension."""


class SpectralRadiusTooLarge(ValueError):
    """An operation requiring spectral radius < 1 was refused."""

    def __init__(self, radius: float, margin: float = 0.0):
        self.radius = radius
        self.margin = margin
        super().__init__(f"spectral radius {radius:.12g} >= 1 - {margin:g}")


class SpectralRadiusNonConvergence(RuntimeError):
    """Power iteration did not settle; carries the rigorous bracket."""

    def __init__(self, bracket: tuple[float, float]):
        self.bracket = bracket
        super().__init__(
            f"power iteration did not converge; spectral radius lies in "
            f"[{bracket[0]:.12g}, {bracket[1]:.12g}]"
        )


class SingularSystem(ArithmeticError):
    """A linear solve failed or its residual exceeded the guarantee."""


class NumericalInconsistency(ArithmeticError):
    """Two independent computation routes disagreed beyond tolerance."""


class CriteriaDisagreement(NumericalInconsistency):
    """The four zero-convergence criteria split outside the indeterminate band."""

    def __init__(self, evidence: "ZeroConvergenceEvidence"):
        self.evidence = evidence
        super().__init__(
            "zero-convergence criteria disagree: "
            f"power_decay={evidence.power_decay}, "
            f"radius<1={evidence.eigenvalue_criterion} (r={evidence.spectral_radius:.9g}), "
            f"series={evidence.neumann_invertible}, "
            f"inverse>=0={evidence.inverse_nonnegative}"
        )


@dataclass(frozen=True)
class ConeOrderConfig:
    """Floating-point realization of the componentwise order.

    epsilon is an absolute slack: u is accepted below v when every
    component of v - u is >= -epsilon.  Zero means exact comparison.
    """

    epsilon: float = 1e-12

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError("epsilon must be a finite nonnegative real")


_EXACT = ConeOrderConfig(epsilon=0.0)
_DEFAULT_ORDER = ConeOrderConfig()


@dataclass(frozen=True)
class ConeVector:
    """Point of R^n compared under the componentwise cone order."""

    entries: tuple[float, ...]

    def __post_init__(self):
        ent = tuple(float(e) for e in self.entries)
        if len(ent) < 1:
            raise ValueError("a cone vector needs at least one component")
        if not all(math.isfinite(e) for e in ent):
            raise ValueError("cone vector components must be finite")
        object.__setattr__(self, "entries", ent)

    @classmethod
    def of(cls, *entries: float) -> "ConeVector":
        return cls(tuple(entries))

    @classmethod
    def from_array(cls, arr) -> "ConeVector":
        return cls(tuple(float(x) for x in np.asarray(arr, dtype=float).ravel()))

    @classmethod
    def zero(cls, dim: int) -> "ConeVector":
        return cls((0.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def to_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)

    def scaled(self, c: float) -> "ConeVector":
        return ConeVector(tuple(c * e for e in self.entries))

    def __add__(self, other: "ConeVector") -> "ConeVector":
        if self.dim != len(other.entries):
            raise DimensionMismatch(f"{self.dim} vs {len(other.entries)}")
        return ConeVector(tuple(a + b for a, b in zip(self.entries, other.entries)))


def _vec(u) -> np.ndarray:
    if isinstance(u, ConeVector):
        return u.to_array()
    arr = np.asarray(u, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatch("expected a one-dimensional vector")
    return arr


def cone_leq(u, v, cfg: ConeOrderConfig | None = None) -> bool:
    """Componentwise order test: v_i - u_i >= -epsilon for every i."""
    au, av = _vec(u), _vec(v)
    if au.shape != av.shape:
        raise DimensionMismatch(f"{au.shape} vs {av.shape}")
    eps = (cfg or _DEFAULT_ORDER).epsilon
    return bool(np.all(av - au >= -eps))


def cone_ll(u, v) -> bool:
    """Strict interior test: every component of v - u is > 0."""
    au, av = _vec(u), _vec(v)
    if au.shape != av.shape:
        raise DimensionMismatch(f"{au.shape} vs {av.shape}")
    return bool(np.all(av - au > 0.0))


@dataclass(frozen=True)
class OperatorMatrix:
    """Square matrix acting on R^n; nonnegative ones preserve the orthant."""

    rows: tuple[tuple[float, ...], ...]
    nonnegative: bool = True

    def __post_init__(self):
        rows = tuple(tuple(float(x) for x in row) for row in self.rows)
        n = len(rows)
        if n < 1 or any(len(row) != n for row in rows):
            raise ValueError("operator matrix must be square and nonempty")
        flat = [x for row in rows for x in row]
        if not all(math.isfinite(x) for x in flat):
            raise ValueError("operator matrix entries must be finite")
        if self.nonnegative and any(x < 0.0 for x in flat):
            raise ValueError("nonnegative flag set but a negative entry is present")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_array(cls, arr, nonnegative: bool | None = None) -> "OperatorMatrix":
        M = np.asarray(arr, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("expected a square matrix")
        if nonnegative is None:
            nonnegative = bool(M.size and M.min() >= 0.0)
        return cls(tuple(tuple(float(x) for x in row) for row in M), nonnegative)

    @classmethod
    def identity(cls, n: int) -> "OperatorMatrix":
        return cls.from_array(np.eye(n))

    @classmethod
    def zero(cls, n: int) -> "OperatorMatrix":
        return cls.from_array(np.zeros((n, n)))

    @property
    def n(self) -> int:
        return len(self.rows)

    def to_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)

    def apply(self, v) -> ConeVector:
        arr = _vec(v)
        if arr.shape[0] != self.n:
            raise DimensionMismatch(f"matrix is {self.n}x{self.n}, vector has dim {arr.shape[0]}")
        return ConeVector.from_array(self.to_array() @ arr)

    def scaled(self, c: float) -> "OperatorMatrix":
        return OperatorMatrix.from_array(c * self.to_array())

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix.from_array(self.to_array() + other.to_array())

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix.from_array(self.to_array() @ other.to_array())


def _mat(A) -> np.ndarray:
    if isinstance(A, OperatorMatrix):
        return A.to_array()
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    return M


def operator_norm_inf(A) -> float:
    """Operator norm induced by the max norm: the largest absolute row sum."""
    M = _mat(A)
    return float(np.abs(M).sum(axis=1).max())


def _norm_inf(M: np.ndarray) -> float:
    return float(np.abs(M).sum(axis=1).max())


def _gelfand_upper(M: np.ndarray) -> float:
    # ||A^k||^(1/k) bounds the spectral radius from above for every k;
    # repeated squaring reaches k = 16, 32, 64 in six multiplications.
    best = math.inf
    P = M.copy()
    k = 1
    for _ in range(6):
        P = P @ P
        k *= 2
        nk = _norm_inf(P)
        if not math.isfinite(nk):
            break
        if nk == 0.0:
            return 0.0
        if k >= 16:
            best = min(best, nk ** (1.0 / k))
    return best


def spectral_radius(A, *, tol: float = 1e-10, max_iters: int = 10_000) -> float:
    """Spectral radius by power iteration from an all-ones start.

    For a nonnegative matrix the iteration runs on A + I, which has the
    same dominant eigenvector, radius shifted by exactly one, and a
    strictly positive iterate throughout; that removes the oscillation a
    periodic matrix (e.g. a permutation) would cause.  The Collatz-
    Wielandt ratios of each positive iterate enclose the radius, so a
    tight enclosure stops the iteration rigorously; otherwise a settled
    norm estimate is accepted.  The result is cross-checked against the
    Gelfand upper bounds ||A^k||^(1/k) at k in {16, 32, 64} and against
    ||A||, and never exceeds them.

    Raises SpectralRadiusNonConvergence, carrying the best rigorous
    bracket, when the estimate has not settled within max_iters (this
    happens for defective dominant eigenvalues, e.g. Jordan blocks).
    """
    M = _mat(A)
    n = M.shape[0]
    norm = _norm_inf(M)
    if norm == 0.0:
        return 0.0
    upper = min(norm, _gelfand_upper(M))
    if upper <= tol:
        # powers vanish outright (nilpotent up to roundoff)
        return 0.0
    nonneg = bool(M.min() >= 0.0)
    shift = 1.0 if nonneg else 0.0
    S = M + shift * np.eye(n)
    x = np.ones(n)
    best_lo, best_hi = 0.0, math.inf
    est_prev = math.inf
    stable = 0
    for _ in range(max_iters):
        y = S @ x
        est = float(np.abs(y).max())
        if est == 0.0:
            # a positive vector was annihilated; without the shift this
            # only happens for (numerically) nilpotent input
            return 0.0
        if nonneg and x.min() > 1e-280:
            ratios = y / x
            best_lo = max(best_lo, float(ratios.min()))
            best_hi = min(best_hi, float(ratios.max()))
            if best_hi - best_lo <= tol * max(1.0, best_hi):
                r = 0.5 * (best_lo + best_hi) - shift
                return min(max(r, 0.0), upper)
        if abs(est - est_prev) <= tol * max(1.0, est):
            stable += 1
            if stable >= 8:
                return min(max(est - shift, 0.0), upper)
        else:
            stable = 0
        est_prev = est
        x = y / est
    lo = max(best_lo - shift, 0.0)
    hi = min(best_hi - shift if math.isfinite(best_hi) else upper, upper)
    raise SpectralRadiusNonConvergence((lo, max(lo, hi)))


def matrix_power(A, k: int) -> OperatorMatrix:
    """k-th power of the operator; the zeroth power is the identity."""
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise ValueError("exponent must be a nonnegative integer")
    M = _mat(A)
    return OperatorMatrix.from_array(np.linalg.matrix_power(M, int(k)))


def _neumann_series_sum(M: np.ndarray, max_doublings: int = 64) -> np.ndarray | None:
    """Partial sums of I + A + A^2 + ... by doubling; None if divergent."""
    n = M.shape[0]
    S = np.eye(n)
    P = M.copy()
    for _ in range(max_doublings):
        pn = _norm_inf(P)
        if not math.isfinite(pn) or pn > 1e250:
            return None
        if pn < 1e-300:
            return S
        S = S + P @ S
        if not np.isfinite(S).all():
            return None
        P = P @ P
    return None


def _series_converges_to_inverse(M: np.ndarray, rel_tol: float = 1e-8) -> bool:
    S = _neumann_series_sum(M)
    if S is None:
        return False
    n = M.shape[0]
    resid = _norm_inf((np.eye(n) - M) @ S - np.eye(n))
    return resid <= rel_tol * max(1.0, _norm_inf(S))


def _inverse_nonnegative(M: np.ndarray, entry_eps: float) -> tuple[bool, bool]:
    n = M.shape[0]
    eye = np.eye(n)
    try:
        X = np.linalg.solve(eye - M, eye)
    except np.linalg.LinAlgError:
        return False, False
    if not np.isfinite(X).all():
        return False, False
    resid = _norm_inf((eye - M) @ X - eye)
    if resid > 1e-6 * max(1.0, _norm_inf(X)):
        return False, False
    return True, bool(X.min() >= -entry_eps)


def neumann_inverse(A, *, margin: float = 1e-6, residual_tol: float = 1e-10) -> OperatorMatrix:
    """Inverse of I - A by direct solve, cross-checked against the series.

    Requires the spectral radius of A to sit below 1 - margin; the result
    satisfies ||(I - A) X - I|| <= residual_tol or the input is rejected
    as effectively singular.  For nonnegative A the inverse is entrywise
    nonnegative (up to roundoff), so the returned operator keeps the
    nonnegativity flag whenever that holds exactly.
    """
    M = _mat(A)
    n = M.shape[0]
    r = spectral_radius(A)
    if r >= 1.0 - margin:
        raise SpectralRadiusTooLarge(r, margin)
    eye = np.eye(n)
    try:
        X = np.linalg.solve(eye - M, eye)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("I - A could not be factorized") from exc
    resid = _norm_inf((eye - M) @ X - eye)
    if not math.isfinite(resid) or resid > residual_tol:
        raise SingularSystem(
            f"solve residual {resid:.3e} exceeds the {residual_tol:g} guarantee"
        )
    S = _neumann_series_sum(M)
    if S is None or _norm_inf(S - X) > 1e-8 * max(1.0, _norm_inf(X)):
        raise NumericalInconsistency(
            "direct inverse of I - A disagrees with the summed operator series"
        )
    return OperatorMatrix.from_array(X)


@dataclass(frozen=True)
class ZeroConvergenceEvidence:
    """Outcome of the four independent zero-convergence criteria.

    The verdict is true exactly when all four booleans are true.  Within
    the indeterminate band (radius within 1e-6 of one) the criteria are
    not forced to agree and `indeterminate` is set instead.
    """

    power_decay: bool
    decay_power: int | None
    eigenvalue_criterion: bool
    spectral_radius: float
    neumann_invertible: bool
    inverse_nonnegative: bool
    indeterminate: bool
    verdict: bool


def _power_decay(M: np.ndarray, threshold: float, window: int) -> tuple[bool, int | None]:
    P = M.copy()
    for k in range(1, window + 1):
        if k > 1:
            P = P @ M
        nk = _norm_inf(P)
        if not math.isfinite(nk) or nk > 1e250:
            return False, None
        if nk < threshold:
            return True, k
    # A direct window is too coarse near the critical circle; squaring
    # settles the asymptotic verdict for any radius not equal to one.
    kexp = window
    for _ in range(60):
        P = P @ P
        kexp *= 2
        nk = _norm_inf(P)
        if not math.isfinite(nk) or nk > 1e250:
            return False, None
        if nk < threshold:
            return True, kexp
    return False, None


def is_zero_convergent(
    A,
    *,
    decay_threshold: float = DECAY_THRESHOLD,
    decay_window: int = DECAY_WINDOW,
    band: float = INDETERMINATE_BAND,
    entry_eps: float = INVERSE_ENTRY_EPS,
) -> ZeroConvergenceEvidence:
    """Evaluate all four zero-convergence criteria independently.

    (1) some power's norm drops below decay_threshold (direct powers up to
        decay_window, then repeated squaring so the verdict is asymptotic);
    (2) the spectral radius is below one;
    (3) the geometric operator series converges to the inverse of I - A;
    (4) I - A is invertible with entries of the inverse >= -entry_eps.

    The four are equivalent in exact arithmetic, so any split outside the
    indeterminate band |r - 1| < band raises CriteriaDisagreement; within
    the band the evidence is flagged indeterminate rather than guessed.
    """
    if isinstance(A, OperatorMatrix):
        if not A.nonnegative:
            raise ValueError("zero-convergence criteria are stated for nonnegative matrices")
        M = A.to_array()
    else:
        M = _mat(A)
        if M.min() < 0.0:
            raise ValueError("zero-convergence criteria are stated for nonnegative matrices")

    bracket_indeterminate = False
    try:
        r = spectral_radius(A)
        radius_below = r < 1.0
    except SpectralRadiusNonConvergence as exc:
        lo, hi = exc.bracket
        if hi < 1.0 - band:
            r, radius_below = hi, True
        elif lo > 1.0 + band:
            r, radius_below = lo, False
        else:
            r = 0.5 * (lo + hi)
            radius_below = r < 1.0
            bracket_indeterminate = True

    decayed, kpow = _power_decay(M, decay_threshold, decay_window)
    series_ok = _series_converges_to_inverse(M)
    invertible, inv_nonneg = _inverse_nonnegative(M, entry_eps)

    flags = (decayed, radius_below, series_ok, invertible and inv_nonneg)
    indeterminate = bracket_indeterminate or abs(r - 1.0) < band
    evidence = ZeroConvergenceEvidence(
        power_decay=decayed,
        decay_power=kpow,
        eigenvalue_criterion=radius_below,
        spectral_radius=r,
        neumann_invertible=series_ok,
        inverse_nonnegative=invertible and inv_nonneg,
        indeterminate=indeterminate,
        verdict=all(flags),
    )
    if not indeterminate and any(flags) != all(flags):
        raise CriteriaDisagreement(evidence)
    return evidence
