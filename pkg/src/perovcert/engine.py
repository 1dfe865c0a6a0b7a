"""Contraction certification, the Picard iteration, and error bounds.

The contraction checks evaluate the hypothesis inequality on every ordered
pair of sample points and report violations as data.  The iteration runs
x_{n+1} = f(x_n) directly and applies T only inside gauge evaluations; it
stops when the constructive tail bound or the per-step gauge drops below
tolerance, provided the iterate has also stopped moving in x-space (the
gauge tolerances alone do not pin the iterate's own accuracy for
super-attracting maps).

All bounds are of the form matrix power times resolvent times starting
vector:

    step:          A^n q0
    tail:          b A^n (I - bA)^(-1) q0
    error:         A^n (I - A)^(-1) d0
    perturbation:  (I - A)^(-1) a + A^n (I - A)^(-1) d0
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distances import d_eval, gauge_values
from .operators import (
    ConeVector,
    OperatorMatrix,
    ZeroConvergenceEvidence,
    cone_leq,
    matrix_power,
    neumann_inverse,
    operator_norm_inf,
    spectral_radius,
)
from .problems import (
    ProblemInstance,
    THR1Hypothesis,
    THR2Hypothesis,
    ValidationError,
    validate_hypothesis,
)

__all__ = [
    "ContractionViolation",
    "ContractionReport",
    "Trajectory",
    "StoppingConfig",
    "SolveReport",
    "LimitsDisagree",
    "IterateEscapedDomain",
    "THR1_MEMBERS",
    "effective_operator",
    "definition_operator",
    "hypothesis_radii",
    "check_thr1",
    "check_thr2",
    "picard_iterate",
    "step_bound",
    "apriori_tail_bound",
    "perov_error_bound",
    "perturbation_bound",
    "cauchy_certificate",
    "solve",
]

THR1_MEMBERS = ("q(Tx1,Tx2)", "q(Tx1,Tfx1)", "q(Tx2,Tfx2)")

MAX_VIOLATION_WITNESSES = 16


class LimitsDisagree(RuntimeError):
    """Picard limits from distinct starts failed to agree."""


class IterateEscapedDomain(RuntimeError):
    """An iterate left the declared domain; the instance is unsound."""


@dataclass(frozen=True)
class ContractionViolation:
    x1: float
    x2: float
    left: tuple[float, float]
    best_right: tuple[float, float]


@dataclass(frozen=True)
class ContractionReport:
    variant: str
    pairs_checked: int
    violations: tuple[ContractionViolation, ...]
    certifier_counts: dict[str, int]
    verdict: bool


@dataclass(frozen=True)
class Trajectory:
    """Recorded iterates x_0..x_N and per-step gauges q(Tx_n, Tx_{n+1})."""

    iterates: tuple[float, ...]
    step_q: tuple[tuple[float, float], ...]
    stop_reason: str  # "bound-met" | "step-met" | "max-iters"

    @property
    def last(self) -> float:
        return self.iterates[-1]


@dataclass(frozen=True)
class StoppingConfig:
    """Exit tolerances; either gauge criterion may be disabled with None.

    A tolerance-based exit additionally requires |f(x) - x| at the fresh
    iterate to drop below fixed_point_tol, so the reported point carries
    x-space accuracy and not merely a small gauge.
    """

    bound_tol: tuple[float, float] | None = (1e-10, 1e-10)
    step_tol: tuple[float, float] | None = (1e-10, 1e-10)
    fixed_point_tol: float = 1e-12
    max_iters: int = 10_000


@dataclass(frozen=True)
class SolveReport:
    fixed_point: float
    iterations: int
    stop_reason: str
    final_step_d: tuple[float, float]
    residual_q: tuple[float, float]
    tail_bound_exit: tuple[float, float]
    uniqueness_probe: tuple[tuple[float, float], ...]  # (start, limit) pairs
    evidence: ZeroConvergenceEvidence


def effective_operator(problem: ProblemInstance) -> OperatorMatrix:
    """Operator driving the step recurrence.

    Single-operator variant: A itself.  Three-operator variant:
    (A1 + A2)(I - A3)^(-1), the form the per-step bound chain uses.
    """
    hyp = problem.hypothesis
    if isinstance(hyp, THR1Hypothesis):
        return hyp.A
    return (hyp.A1 + hyp.A2) @ neumann_inverse(hyp.A3)


def definition_operator(problem: ProblemInstance) -> OperatorMatrix:
    """Operator whose radius the hypothesis constrains.

    Coincides with effective_operator for the single-operator variant; for
    the three-operator variant it is (I - A3)^(-1)(A1 + A2), similar to the
    recurrence form, so both have the same spectral radius.
    """
    hyp = problem.hypothesis
    if isinstance(hyp, THR1Hypothesis):
        return hyp.A
    return neumann_inverse(hyp.A3) @ (hyp.A1 + hyp.A2)


def hypothesis_radii(problem: ProblemInstance) -> dict[str, float]:
    """Spectral radii (scaled by b) of both operator orderings, plus the
    norm-sum condition value for the three-operator variant."""
    b = problem.d_spec.b
    hyp = problem.hypothesis
    if isinstance(hyp, THR1Hypothesis):
        return {"r_bA": spectral_radius(hyp.A.scaled(b))}
    rec = spectral_radius(effective_operator(problem).scaled(b))
    dfn = spectral_radius(definition_operator(problem).scaled(b))
    norm_sum = operator_norm_inf(hyp.A1) + operator_norm_inf(hyp.A2) + operator_norm_inf(hyp.A3)
    return {
        "r_b_recurrence": rec,
        "r_b_definition": dfn,
        "b_norm_sum": b * norm_sum,
    }


def _sample_transforms(problem: ProblemInstance, pts: np.ndarray):
    """Arrays Tx, Tfx over the sample points."""
    fx = np.asarray(problem.f(pts), dtype=float)
    Tx = np.asarray(problem.T(pts), dtype=float)
    Tfx = np.asarray(problem.T(fx), dtype=float)
    return Tx, Tfx


def _gauge_pairs(problem: ProblemInstance, ys: np.ndarray) -> np.ndarray:
    """(N, 2) gauge vectors of the given points."""
    g = gauge_values(problem.q_spec, ys)
    return np.stack([g, problem.q_spec.eta * g], axis=1)


def _collect_violations(pts, passed, left, best_right):
    """Sorted, capped violation records from an (N, N) pass mask."""
    bad = np.nonzero(~passed)
    records = []
    for i, j in zip(*bad):
        records.append(
            ContractionViolation(
                float(pts[i]),
                float(pts[j]),
                (float(left[j, 0]), float(left[j, 1])),
                (float(best_right[i, j, 0]), float(best_right[i, j, 1])),
            )
        )
    records.sort(key=lambda v: (v.x1, v.x2))
    return tuple(records[:MAX_VIOLATION_WITNESSES]), int(bad[0].size)


def check_thr1(problem: ProblemInstance, samples) -> ContractionReport:
    """Certify the single-operator inequality on all ordered sample pairs.

    A pair passes when the left gauge is below at least one of the three
    candidates (the reading is existential); the certifying member is
    tallied in candidate order.
    """
    hyp = problem.hypothesis
    if not isinstance(hyp, THR1Hypothesis):
        raise ValidationError("hypothesis", "check_thr1 needs the single-operator variant")
    pts = np.asarray(samples.points, dtype=float)
    n = len(pts)
    eps = problem.order_cfg.epsilon
    A = hyp.A.to_array()
    Tx, Tfx = _sample_transforms(problem, pts)

    left = _gauge_pairs(problem, Tfx)          # left[j]   = q(Tf x1, Tf x2), depends on x2 only
    c1 = _gauge_pairs(problem, Tx) @ A.T       # c1[j]     = A q(Tx1, Tx2)
    c2 = _gauge_pairs(problem, Tfx) @ A.T      # c2[i]     = A q(Tx1, Tf x1)
    c3 = c2                                    # c3[j]     = A q(Tx2, Tf x2)

    ok1 = np.all(left <= c1 + eps, axis=1)     # by x2
    ok3 = np.all(left <= c3 + eps, axis=1)     # by x2
    ok2 = np.all(left[None, :, :] <= c2[:, None, :] + eps, axis=2)  # (x1, x2)

    passed = ok1[None, :] | ok2 | ok3[None, :]
    n1 = int(ok1.sum()) * n
    n2 = int((ok2 & ~ok1[None, :]).sum())
    n3 = int((ok3[None, :] & ~ok1[None, :] & ~ok2).sum())
    counts = {THR1_MEMBERS[0]: n1, THR1_MEMBERS[1]: n2, THR1_MEMBERS[2]: n3}

    if passed.all():
        witnesses, total_bad = (), 0
    else:
        # closest candidate per failing pair, for the report
        viol1 = np.broadcast_to(np.max(left - c1, axis=1)[None, :], (n, n))
        viol2 = np.max(left[None, :, :] - c2[:, None, :], axis=2)
        viol3 = np.broadcast_to(np.max(left - c3, axis=1)[None, :], (n, n))
        best_idx = np.argmin(np.stack([viol1, viol2, viol3]), axis=0)
        b1 = np.broadcast_to(c1[None, :, :], (n, n, 2))
        b2 = np.broadcast_to(c2[:, None, :], (n, n, 2))
        b3 = np.broadcast_to(c3[None, :, :], (n, n, 2))
        best_right = np.where(
            (best_idx == 0)[:, :, None], b1, np.where((best_idx == 1)[:, :, None], b2, b3)
        )
        witnesses, total_bad = _collect_violations(pts, passed, left, best_right)
    return ContractionReport(
        variant="THR1",
        pairs_checked=n * n,
        violations=witnesses,
        certifier_counts=counts,
        verdict=total_bad == 0,
    )


def check_thr2(problem: ProblemInstance, samples) -> ContractionReport:
    """Certify the three-operator inequality on all ordered sample pairs."""
    hyp = problem.hypothesis
    if not isinstance(hyp, THR2Hypothesis):
        raise ValidationError("hypothesis", "check_thr2 needs the three-operator variant")
    pts = np.asarray(samples.points, dtype=float)
    n = len(pts)
    eps = problem.order_cfg.epsilon
    Tx, Tfx = _sample_transforms(problem, pts)

    left = _gauge_pairs(problem, Tfx)                       # by x2
    part_x2 = _gauge_pairs(problem, Tx) @ hyp.A1.to_array().T + _gauge_pairs(problem, Tfx) @ hyp.A3.to_array().T
    part_x1 = _gauge_pairs(problem, Tfx) @ hyp.A2.to_array().T
    right = part_x1[:, None, :] + part_x2[None, :, :]       # (x1, x2, comp)

    passed = np.all(left[None, :, :] <= right + eps, axis=2)
    witnesses, total_bad = _collect_violations(pts, passed, left, right)
    return ContractionReport(
        variant="THR2",
        pairs_checked=n * n,
        violations=witnesses,
        certifier_counts={},
        verdict=total_bad == 0,
    )


def _gauge_of(problem: ProblemInstance, y: float) -> np.ndarray:
    g = problem.q_spec.a * float(y) ** problem.q_spec.p
    return np.array([g, problem.q_spec.eta * g])


def picard_iterate(problem: ProblemInstance, x0: float, opts: StoppingConfig | None = None) -> Trajectory:
    """Iterate f from x0, recording iterates and per-step gauges.

    Exits when the constructive tail bound or the step gauge drops below
    its tolerance (whichever is enabled) and the iterate is stationary to
    fixed_point_tol, or when max_iters is reached.
    """
    opts = opts or StoppingConfig()
    lo, hi = problem.lo, problem.hi
    escape_tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    x = float(x0)
    if not (lo - escape_tol <= x <= hi + escape_tol):
        raise IterateEscapedDomain(f"start {x!r} outside [{lo}, {hi}]")

    b = problem.d_spec.b
    A_eff = effective_operator(problem).to_array()
    resolvent = None
    if opts.bound_tol is not None:
        resolvent = neumann_inverse(OperatorMatrix.from_array(b * A_eff)).to_array()

    iterates = [x]
    steps: list[tuple[float, float]] = []
    tail: np.ndarray | None = None
    reason = "max-iters"
    for n in range(opts.max_iters):
        x_next = float(problem.f(x))
        if not (lo - escape_tol <= x_next <= hi + escape_tol):
            raise IterateEscapedDomain(f"iterate {n + 1} = {x_next!r} escaped [{lo}, {hi}]")
        q_step = _gauge_of(problem, problem.T(x_next))
        iterates.append(x_next)
        steps.append((float(q_step[0]), float(q_step[1])))

        if n == 0 and resolvent is not None:
            tail = b * (resolvent @ q_step)  # tail bound at n = 0
        bound_ok = (
            opts.bound_tol is not None
            and tail is not None
            and cone_leq(tail, np.asarray(opts.bound_tol), problem.order_cfg)
        )
        step_ok = opts.step_tol is not None and cone_leq(
            q_step, np.asarray(opts.step_tol), problem.order_cfg
        )
        if (bound_ok or step_ok) and abs(float(problem.f(x_next)) - x_next) <= opts.fixed_point_tol:
            reason = "bound-met" if bound_ok else "step-met"
            break
        if tail is not None:
            tail = A_eff @ tail
        x = x_next

    return Trajectory(tuple(iterates), tuple(steps), reason)


def step_bound(A_eff: OperatorMatrix, q0, n: int) -> ConeVector:
    """Per-step majorant A^n q0."""
    q = q0.to_array() if isinstance(q0, ConeVector) else np.asarray(q0, dtype=float)
    return ConeVector.from_array(matrix_power(A_eff, n).to_array() @ q)


def apriori_tail_bound(A_eff: OperatorMatrix, b: float, q0, n: int) -> ConeVector:
    """Tail majorant b A^n (I - bA)^(-1) q0; requires r(bA) < 1."""
    q = q0.to_array() if isinstance(q0, ConeVector) else np.asarray(q0, dtype=float)
    resolvent = neumann_inverse(A_eff.scaled(float(b))).to_array()
    An = matrix_power(A_eff, n).to_array()
    return ConeVector.from_array(float(b) * (An @ (resolvent @ q)))


def perov_error_bound(A: OperatorMatrix, d0, n: int) -> ConeVector:
    """Distance-to-fixed-point majorant A^n (I - A)^(-1) d0; needs r(A) < 1."""
    d = d0.to_array() if isinstance(d0, ConeVector) else np.asarray(d0, dtype=float)
    resolvent = neumann_inverse(A).to_array()
    An = matrix_power(A, n).to_array()
    return ConeVector.from_array(An @ (resolvent @ d))


def perturbation_bound(A: OperatorMatrix, a, d0, n: int) -> ConeVector:
    """Two-term majorant (I-A)^(-1) a + A^n (I-A)^(-1) d0 for an inexact map.

    a is the uniform gap between the exact and perturbed maps; it must lie
    in the cone.
    """
    av = a.to_array() if isinstance(a, ConeVector) else np.asarray(a, dtype=float)
    if av.min() < 0.0:
        raise ValueError("perturbation gap must be a cone element (entrywise >= 0)")
    d = d0.to_array() if isinstance(d0, ConeVector) else np.asarray(d0, dtype=float)
    resolvent = neumann_inverse(A).to_array()
    An = matrix_power(A, n).to_array()
    return ConeVector.from_array(resolvent @ av + An @ (resolvent @ d))


def cauchy_certificate(t: Trajectory, A_eff: OperatorMatrix, b: float, *, eps: float = 1e-12) -> bool:
    """Check every recorded step gauge against its majorant A^n q0 + eps.

    The decreasing majorant sequence is what certifies that the gauge
    tails vanish, hence that the transformed iterates are Cauchy.
    """
    if not t.step_q:
        raise ValueError("trajectory has no recorded steps")
    q0 = np.asarray(t.step_q[0], dtype=float)
    A = A_eff.to_array()
    bound = q0.copy()
    for step in t.step_q:
        if not np.all(np.asarray(step) <= bound + eps):
            return False
        bound = A @ bound
    return True


def solve(
    problem: ProblemInstance,
    opts: StoppingConfig | None = None,
    *,
    starts: tuple[float, ...] | None = None,
    n_random_starts: int = 8,
    seed: int = 42,
) -> SolveReport:
    """Run the iteration from several starts and certify the common limit.

    Starts default to both endpoints plus seeded uniform points.  All
    limits must agree pairwise within twice the step tolerance; the probe
    is a falsification attempt, not a proof, and failure raises
    LimitsDisagree.
    """
    opts = opts or StoppingConfig()
    evidence = validate_hypothesis(problem)
    if not evidence.verdict:
        raise ValidationError("hypothesis", "effective operator is not zero-convergent")

    if starts is None:
        rng = np.random.default_rng(seed)
        starts = (problem.lo, problem.hi) + tuple(
            float(s) for s in rng.uniform(problem.lo, problem.hi, n_random_starts)
        )
    trajectories = [picard_iterate(problem, s, opts) for s in starts]
    limits = [t.last for t in trajectories]

    tol_vec = opts.step_tol or opts.bound_tol or (1e-10, 1e-10)
    agree_tol = 2.0 * max(tol_vec)
    worst = 0.0
    for i in range(len(limits)):
        for j in range(i + 1, len(limits)):
            worst = max(worst, abs(limits[i] - limits[j]))
    if worst > agree_tol:
        raise LimitsDisagree(
            f"limits spread {worst:.6g} exceeds {agree_tol:.6g}: "
            + ", ".join(f"{s:.6g}->{u:.6g}" for s, u in zip(starts, limits))
        )

    primary = trajectories[0]
    u = primary.last
    n_exit = len(primary.iterates) - 1
    Tu = problem.T(u)
    residual = _gauge_of(problem, Tu)
    final_step_d = d_eval(problem.d_spec, u, float(problem.f(u)))
    A_eff = effective_operator(problem)
    if primary.step_q:
        tail_exit = apriori_tail_bound(A_eff, problem.d_spec.b, np.asarray(primary.step_q[0]), n_exit)
    else:
        tail_exit = ConeVector.zero(2)

    return SolveReport(
        fixed_point=float(u),
        iterations=n_exit,
        stop_reason=primary.stop_reason,
        final_step_d=(final_step_d.entries[0], final_step_d.entries[1]),
        residual_q=(float(residual[0]), float(residual[1])),
        tail_bound_exit=(tail_exit.entries[0], tail_exit.entries[1]),
        uniqueness_probe=tuple((float(s), float(u_)) for s, u_ in zip(starts, limits)),
        evidence=evidence,
    )
