"""Problem instances and their strict JSON document format.

An instance bundles a closed interval, a piecewise-polynomial self-map f,
an auxiliary injection T (identity, scaling, or piecewise polynomial), the
two distance specs, and a matrix contraction hypothesis.  Every invariant
is checked at construction: the maps must send the interval into itself
(sampled), the hypothesis matrices must be nonnegative 2x2 with the
required spectral bounds, and a scaling factor must lie in (0, 1].

The built-in catalog carries three fully worked instances, keyed "2.2",
"2.4" and "2.8", together with the claimed values any reproduction run is
held against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .distances import BMetricSpec, CDistanceSpec
from .operators import (
    ConeOrderConfig,
    OperatorMatrix,
    SpectralRadiusTooLarge,
    ZeroConvergenceEvidence,
    is_zero_convergent,
    neumann_inverse,
    spectral_radius,
)
from .polymap import PiecewisePolyMap

__all__ = [
    "ProblemSyntaxError",
    "ValidationError",
    "TransformSpec",
    "THR1Hypothesis",
    "THR2Hypothesis",
    "ContractionHypothesis",
    "ProblemInstance",
    "eval_map",
    "parse_problem",
    "serialize_problem",
    "builtin_example",
    "example_claims",
    "NormClaim",
    "ExampleClaims",
    "BUILTIN_IDS",
    "hypothesis_evidence",
    "validate_hypothesis",
]

BUILTIN_IDS = ("2.2", "2.4", "2.8")

RADIUS_MARGIN = 1e-6


class ProblemSyntaxError(ValueError):
    """The problem document is not syntactically valid JSON of the schema."""


class ValidationError(ValueError):
    """A well-formed document or instance violates an invariant."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class TransformSpec:
    """The auxiliary self-map T applied inside every gauge evaluation.

    Built-in kinds are declared injective, continuous and sequentially
    convergent; a piecewise-polynomial T keeps its declarations and is
    spot-checked for strict monotonicity at instance construction.
    """

    kind: str  # "identity" | "scaling" | "poly"
    scale: float | None = None
    poly: PiecewisePolyMap | None = None
    declared_injective: bool = True
    declared_continuous: bool = True
    declared_seq_convergent: bool = True

    def __post_init__(self):
        if self.kind == "identity":
            if self.scale is not None or self.poly is not None:
                raise ValueError("identity transform takes no parameters")
            if not (self.declared_injective and self.declared_continuous and self.declared_seq_convergent):
                raise ValueError("identity transform carries all three declarations")
        elif self.kind == "scaling":
            if self.poly is not None:
                raise ValueError("scaling transform takes no polynomial")
            lam = self.scale
            if lam is None or not (math.isfinite(lam) and 0.0 < lam <= 1.0):
                raise ValueError("scaling factor must lie in (0, 1]")
            if not (self.declared_injective and self.declared_continuous and self.declared_seq_convergent):
                raise ValueError("scaling transform carries all three declarations")
            object.__setattr__(self, "scale", float(lam))
        elif self.kind == "poly":
            if self.poly is None:
                raise ValueError("poly transform needs a polynomial map")
            if self.scale is not None:
                raise ValueError("poly transform takes no scale")
        else:
            raise ValueError(f"unknown transform kind {self.kind!r}")

    @classmethod
    def identity(cls) -> "TransformSpec":
        return cls(kind="identity")

    @classmethod
    def scaling(cls, lam: float) -> "TransformSpec":
        return cls(kind="scaling", scale=float(lam))

    @classmethod
    def from_poly(
        cls,
        poly: PiecewisePolyMap,
        *,
        injective: bool = True,
        continuous: bool = True,
        seq_convergent: bool = True,
    ) -> "TransformSpec":
        return cls(
            kind="poly",
            poly=poly,
            declared_injective=injective,
            declared_continuous=continuous,
            declared_seq_convergent=seq_convergent,
        )

    def __call__(self, x):
        if self.kind == "identity":
            return x if np.ndim(x) else float(x)
        if self.kind == "scaling":
            return self.scale * x if np.ndim(x) else float(self.scale * x)
        return self.poly(x)


@dataclass(frozen=True)
class THR1Hypothesis:
    """Single-operator hypothesis: the gauge of images is capped by A
    applied to one of three candidate gauges."""

    A: OperatorMatrix

    @property
    def variant(self) -> str:
        return "THR1"


@dataclass(frozen=True)
class THR2Hypothesis:
    """Three-operator hypothesis: the cap is A1, A2, A3 applied to all
    three candidate gauges and summed."""

    A1: OperatorMatrix
    A2: OperatorMatrix
    A3: OperatorMatrix

    @property
    def variant(self) -> str:
        return "THR2"


ContractionHypothesis = THR1Hypothesis | THR2Hypothesis


def hypothesis_evidence(hypothesis: ContractionHypothesis, b: float) -> ZeroConvergenceEvidence:
    """Zero-convergence evidence for the hypothesis' effective operator.

    For the single-operator variant this is b*A.  For the three-operator
    variant it is b*(I-A3)^(-1)*(A1+A2), the operator whose radius the
    hypothesis constrains.
    """
    if isinstance(hypothesis, THR1Hypothesis):
        return is_zero_convergent(hypothesis.A.scaled(float(b)))
    inv = neumann_inverse(hypothesis.A3)
    eff = inv @ (hypothesis.A1 + hypothesis.A2)
    return is_zero_convergent(eff.scaled(float(b)))


def validate_hypothesis(problem: "ProblemInstance") -> ZeroConvergenceEvidence:
    """Evidence for the instance's effective operator at its own b."""
    return hypothesis_evidence(problem.hypothesis, problem.d_spec.b)


def eval_map(m: PiecewisePolyMap, x: float) -> float:
    """Evaluate a piecewise polynomial map at a point."""
    return float(m(float(x)))


def _check_self_map(fn, lo: float, hi: float, path: str, extra_points=()):
    xs = np.linspace(lo, hi, 257)
    if extra_points:
        xs = np.concatenate([xs, np.asarray(list(extra_points), dtype=float)])
    ys = np.asarray(fn(xs), dtype=float)
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    bad = (ys < lo - tol) | (ys > hi + tol) | ~np.isfinite(ys)
    if bad.any():
        i = int(np.nonzero(bad)[0][0])
        raise ValidationError(path, f"maps {xs[i]!r} to {ys[i]!r}, outside [{lo}, {hi}]")


def _check_matrix(M: OperatorMatrix, dim: int, path: str):
    if M.n != dim:
        raise ValidationError(path, f"matrix must be {dim}x{dim}, got {M.n}x{M.n}")
    if not M.nonnegative or M.to_array().min() < 0.0:
        raise ValidationError(path, "matrix must be entrywise nonnegative")


@dataclass(frozen=True)
class ProblemInstance:
    """Validated problem: domain, maps, distances and hypothesis."""

    lo: float
    hi: float
    d_spec: BMetricSpec
    q_spec: CDistanceSpec
    f: PiecewisePolyMap
    T: TransformSpec
    hypothesis: ContractionHypothesis
    order_cfg: ConeOrderConfig = ConeOrderConfig()

    dim = 2  # the distance families are two-component

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValidationError("domain", f"need lo < hi, got [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))

        exc_pts = [at for at, _ in self.f.exceptions if self.lo <= at <= self.hi]
        _check_self_map(self.f, self.lo, self.hi, "f", exc_pts)
        _check_self_map(self.T, self.lo, self.hi, "T")
        if self.T.kind == "poly" and self.T.declared_injective:
            xs = np.linspace(self.lo, self.hi, 257)
            diffs = np.diff(np.asarray(self.T(xs), dtype=float))
            if not (np.all(diffs > 0.0) or np.all(diffs < 0.0)):
                raise ValidationError("T", "declared injective but not strictly monotone on samples")

        b = self.d_spec.b
        hyp = self.hypothesis
        if isinstance(hyp, THR1Hypothesis):
            _check_matrix(hyp.A, self.dim, "hypothesis.A")
            r = spectral_radius(hyp.A.scaled(b))
            if r >= 1.0 - RADIUS_MARGIN:
                raise ValidationError("hypothesis.A", f"r(b*A) = {r:.9g} >= 1")
        else:
            _check_matrix(hyp.A1, self.dim, "hypothesis.A1")
            _check_matrix(hyp.A2, self.dim, "hypothesis.A2")
            _check_matrix(hyp.A3, self.dim, "hypothesis.A3")
            try:
                inv = neumann_inverse(hyp.A3)
            except SpectralRadiusTooLarge as exc:
                raise ValidationError("hypothesis.A3", f"I - A3 is not safely invertible: {exc}") from exc
            r = spectral_radius((inv @ (hyp.A1 + hyp.A2)).scaled(b))
            if r >= 1.0 - RADIUS_MARGIN:
                raise ValidationError("hypothesis", f"r(b*(I-A3)^-1*(A1+A2)) = {r:.9g} >= 1")

    @property
    def domain(self) -> tuple[float, float]:
        return (self.lo, self.hi)


# ---------------------------------------------------------------------------
# built-in catalog


@dataclass(frozen=True)
class NormClaim:
    name: str
    claimed: float
    expected: float  # value the toolkit must compute

    @property
    def discrepant(self) -> bool:
        return self.claimed != self.expected


@dataclass(frozen=True)
class ExampleClaims:
    example_id: str
    fixed_point: float
    zero_residual: bool
    norm_claims: tuple[NormClaim, ...]
    norm_sum: tuple[float, float] | None  # (claimed value, tolerance)
    notes: tuple[str, ...]


_NOTE_24 = (
    "claimed operator norm 3/10 conflicts with the max row sum "
    "max(3/10, 4/10) = 2/5; the certificate is unaffected since "
    "2*(2/5) = 0.8 < 1 and r(2A) ~= 0.6606 < 1"
)
_NOTE_28_NORM = (
    "an intermediate bound of 11/13 conflicts with the concluded norm "
    "11/30; the max row sum of A1 is 11/30"
)
_NOTE_28_SUM = (
    "the norm-sum condition b*(|A1|+|A2|+|A3|) < 1 fails at b = 2 "
    "(value ~= 1.4635); the certificate rests on "
    "r(b*(I-A3)^-1*(A1+A2)) ~= 0.9148 < 1"
)
_NOTE_22_GAMMA = (
    "the admissible coefficient range (0, gamma) leaves gamma "
    "unspecified; the stated constraints give gamma = "
    "min((a11+eta*a12)^(1/p), ((a21+eta*a22)/eta)^(1/p)) ~= 0.1414 "
    "and beta = 0.1 lies inside"
)

_CLAIMS = {
    "2.2": ExampleClaims(
        example_id="2.2",
        fixed_point=0.0,
        zero_residual=True,
        norm_claims=(),
        norm_sum=None,
        notes=(_NOTE_22_GAMMA,),
    ),
    "2.4": ExampleClaims(
        example_id="2.4",
        fixed_point=0.0,
        zero_residual=True,
        norm_claims=(NormClaim("A", claimed=0.3, expected=0.4),),
        norm_sum=None,
        notes=(_NOTE_24,),
    ),
    "2.8": ExampleClaims(
        example_id="2.8",
        fixed_point=0.0,
        zero_residual=True,
        norm_claims=(
            NormClaim("A1", claimed=11.0 / 30.0, expected=11.0 / 30.0),
            NormClaim("A2", claimed=1.0 / 7.0, expected=1.0 / 7.0),
            NormClaim("A3", claimed=2.0 / 9.0, expected=2.0 / 9.0),
        ),
        norm_sum=(0.7317, 1e-4),
        notes=(_NOTE_28_NORM, _NOTE_28_SUM),
    ),
}


def example_claims(example_id: str) -> ExampleClaims:
    if example_id not in _CLAIMS:
        raise KeyError(f"unknown example id {example_id!r}; known: {BUILTIN_IDS}")
    return _CLAIMS[example_id]


def builtin_example(example_id: str, *, alpha: float = 1.0) -> ProblemInstance:
    """One of the catalog instances "2.2", "2.4", "2.8".

    alpha parameterizes the metric weight (and, for "2.4"/"2.8", the gauge
    weight, which equals it in those instances); the default 1 matches the
    values every claim is stated for.
    """
    if example_id == "2.2":
        # f(x) = x^2/10 away from 1, x/10 at 1; T(x) = x/2; rank-one A
        return ProblemInstance(
            lo=0.0,
            hi=1.0,
            d_spec=BMetricSpec(p=2.0, alpha=alpha, b=2.0),
            q_spec=CDistanceSpec(p=2.0, a=1.0, eta=1.0),
            f=PiecewisePolyMap((0.0, 0.0, 0.1), ((1.0, (0.0, 0.1)),)),
            T=TransformSpec.scaling(0.5),
            hypothesis=THR1Hypothesis(
                OperatorMatrix.from_array([[0.01, 0.01], [0.01, 0.01]])
            ),
        )
    if example_id == "2.4":
        return ProblemInstance(
            lo=0.0,
            hi=1.0,
            d_spec=BMetricSpec(p=2.0, alpha=alpha, b=2.0),
            q_spec=CDistanceSpec(p=2.0, a=1.0, eta=alpha),
            f=PiecewisePolyMap((0.0, 0.0, 0.1), ((1.0, (0.0, 0.1)),)),
            T=TransformSpec.identity(),
            hypothesis=THR1Hypothesis(
                OperatorMatrix.from_array([[0.2, 0.1], [0.3, 0.1]])
            ),
        )
    if example_id == "2.8":
        return ProblemInstance(
            lo=0.0,
            hi=1.0,
            d_spec=BMetricSpec(p=2.0, alpha=alpha, b=2.0),
            q_spec=CDistanceSpec(p=2.0, a=1.0, eta=alpha),
            f=PiecewisePolyMap((0.0, 0.0, 0.25), ((1.0, (0.25,)),)),
            T=TransformSpec.identity(),
            hypothesis=THR2Hypothesis(
                A1=OperatorMatrix.from_array([[1.0 / 5.0, 1.0 / 6.0], [0.0, 3.0 / 13.0]]),
                A2=OperatorMatrix.from_array([[1.0 / 7.0, 0.0], [0.0, 1.0 / 8.0]]),
                A3=OperatorMatrix.from_array([[1.0 / 6.0, 0.0], [0.0, 2.0 / 9.0]]),
            ),
        )
    raise KeyError(f"unknown example id {example_id!r}; known: {BUILTIN_IDS}")


# ---------------------------------------------------------------------------
# document format


def _expect_keys(obj: dict, path: str, required: set[str], optional: set[str] = frozenset()):
    if not isinstance(obj, dict):
        raise ValidationError(path or "document", "expected an object")
    unknown = set(obj) - required - set(optional)
    if unknown:
        raise ValidationError(path or "document", f"unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ValidationError(path or "document", f"missing keys {sorted(missing)}")


def _number(obj, path: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ValidationError(path, f"expected a number, got {type(obj).__name__}")
    v = float(obj)
    if not math.isfinite(v):
        raise ValidationError(path, "value must be finite")
    return v


def _coeffs(obj, path: str) -> tuple[float, ...]:
    if not isinstance(obj, list) or not obj:
        raise ValidationError(path, "expected a nonempty coefficient list")
    return tuple(_number(c, f"{path}[{i}]") for i, c in enumerate(obj))


def _matrix(obj, path: str, dim: int = 2) -> OperatorMatrix:
    if not isinstance(obj, list):
        raise ValidationError(path, "expected a matrix (nested rows or flat row-major)")
    if obj and all(isinstance(row, list) for row in obj):
        rows = [[_number(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)] for i, row in enumerate(obj)]
        if len(rows) != dim or any(len(r) != dim for r in rows):
            raise ValidationError(path, f"matrix must be {dim}x{dim}")
    else:
        flat = [_number(x, f"{path}[{i}]") for i, x in enumerate(obj)]
        if len(flat) != dim * dim:
            raise ValidationError(path, f"flat matrix must have {dim * dim} entries")
        rows = [flat[i * dim:(i + 1) * dim] for i in range(dim)]
    arr = np.array(rows, dtype=float)
    if arr.min() < 0.0:
        raise ValidationError(path, "matrix must be entrywise nonnegative")
    return OperatorMatrix.from_array(arr)


def parse_problem(text: str) -> ProblemInstance:
    """Parse and fully validate a problem document.

    Raises ProblemSyntaxError for malformed JSON and ValidationError
    (carrying the offending field path) for schema or invariant failures.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemSyntaxError(f"not valid JSON: {exc}") from exc
    _expect_keys(doc, "", {"domain", "d", "q", "f", "T", "hypothesis"}, {"tolerances"})

    dom = doc["domain"]
    _expect_keys(dom, "domain", {"lo", "hi"})
    lo, hi = _number(dom["lo"], "domain.lo"), _number(dom["hi"], "domain.hi")

    tols = doc.get("tolerances", {})
    _expect_keys(tols, "tolerances", set(), {"order_eps", "match_eps"})
    order_eps = _number(tols.get("order_eps", 1e-12), "tolerances.order_eps")
    match_eps = _number(tols.get("match_eps", 1e-12), "tolerances.match_eps")

    dd = doc["d"]
    _expect_keys(dd, "d", {"p", "alpha", "b"})
    try:
        d_spec = BMetricSpec(
            p=_number(dd["p"], "d.p"),
            alpha=_number(dd["alpha"], "d.alpha"),
            b=_number(dd["b"], "d.b"),
        )
    except ValueError as exc:
        raise ValidationError("d", str(exc)) from exc

    qq = doc["q"]
    _expect_keys(qq, "q", {"p", "a", "eta"})
    try:
        q_spec = CDistanceSpec(
            p=_number(qq["p"], "q.p"),
            a=_number(qq["a"], "q.a"),
            eta=_number(qq["eta"], "q.eta"),
        )
    except ValueError as exc:
        raise ValidationError("q", str(exc)) from exc

    ff = doc["f"]
    _expect_keys(ff, "f", {"default"}, {"exceptions"})
    excs = []
    for i, entry in enumerate(ff.get("exceptions", [])):
        _expect_keys(entry, f"f.exceptions[{i}]", {"at", "poly"})
        excs.append(
            (_number(entry["at"], f"f.exceptions[{i}].at"), _coeffs(entry["poly"], f"f.exceptions[{i}].poly"))
        )
    try:
        f_map = PiecewisePolyMap(_coeffs(ff["default"], "f.default"), tuple(excs), match_eps=match_eps)
    except ValueError as exc:
        raise ValidationError("f", str(exc)) from exc

    tt = doc["T"]
    _expect_keys(tt, "T", {"kind"}, {"lambda"})
    kind = tt["kind"]
    try:
        if kind == "identity":
            if "lambda" in tt:
                raise ValidationError("T.lambda", "identity transform takes no lambda")
            transform = TransformSpec.identity()
        elif kind == "scaling":
            if "lambda" not in tt:
                raise ValidationError("T.lambda", "scaling transform needs lambda")
            transform = TransformSpec.scaling(_number(tt["lambda"], "T.lambda"))
        else:
            raise ValidationError("T.kind", f"unknown kind {kind!r} (file format supports identity, scaling)")
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("T", str(exc)) from exc

    hh = doc["hypothesis"]
    _expect_keys(hh, "hypothesis", {"variant"}, {"A", "A1", "A2", "A3"})
    variant = hh["variant"]
    if variant == "THR1":
        if set(hh) != {"variant", "A"}:
            raise ValidationError("hypothesis", "THR1 takes exactly the matrix A")
        hypothesis: ContractionHypothesis = THR1Hypothesis(_matrix(hh["A"], "hypothesis.A"))
    elif variant == "THR2":
        if set(hh) != {"variant", "A1", "A2", "A3"}:
            raise ValidationError("hypothesis", "THR2 takes exactly the matrices A1, A2, A3")
        hypothesis = THR2Hypothesis(
            _matrix(hh["A1"], "hypothesis.A1"),
            _matrix(hh["A2"], "hypothesis.A2"),
            _matrix(hh["A3"], "hypothesis.A3"),
        )
    else:
        raise ValidationError("hypothesis.variant", f"unknown variant {variant!r}")

    return ProblemInstance(
        lo=lo,
        hi=hi,
        d_spec=d_spec,
        q_spec=q_spec,
        f=f_map,
        T=transform,
        hypothesis=hypothesis,
        order_cfg=ConeOrderConfig(epsilon=order_eps),
    )


def serialize_problem(problem: ProblemInstance) -> str:
    """Canonical document for an instance; parse(serialize(p)) == p."""
    if problem.T.kind == "identity":
        t_doc: dict = {"kind": "identity"}
    elif problem.T.kind == "scaling":
        t_doc = {"kind": "scaling", "lambda": problem.T.scale}
    else:
        raise ValueError("piecewise-polynomial transforms are not representable in the file format")
    hyp = problem.hypothesis
    if isinstance(hyp, THR1Hypothesis):
        h_doc = {"variant": "THR1", "A": [list(row) for row in hyp.A.rows]}
    else:
        h_doc = {
            "variant": "THR2",
            "A1": [list(row) for row in hyp.A1.rows],
            "A2": [list(row) for row in hyp.A2.rows],
            "A3": [list(row) for row in hyp.A3.rows],
        }
    doc = {
        "domain": {"lo": problem.lo, "hi": problem.hi},
        "d": {"p": problem.d_spec.p, "alpha": problem.d_spec.alpha, "b": problem.d_spec.b},
        "q": {"p": problem.q_spec.p, "a": problem.q_spec.a, "eta": problem.q_spec.eta},
        "f": {
            "default": list(problem.f.default),
            "exceptions": [{"at": at, "poly": list(poly)} for at, poly in problem.f.exceptions],
        },
        "T": t_doc,
        "hypothesis": h_doc,
        "tolerances": {"order_eps": problem.order_cfg.epsilon, "match_eps": problem.f.match_eps},
    }
    return json.dumps(doc, indent=2, sort_keys=True)
