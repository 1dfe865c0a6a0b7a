"""Two-component distance families on a real interval, with sampled
verification of their axioms.

The built-in metric family is d(x, y) = (phi(x, y)^p, alpha * phi(x, y)^p)
with phi(x, y) = |x - y| (optionally warped through a strictly monotone
map), which satisfies the relaxed triangle inequality with constant
2^(p-1).  Its companion gauge q(x, y) = (a * y^p, eta * a * y^p) ignores
its first argument entirely; that asymmetry is the point, and q(x, y) = 0
does not force x = y.

Axioms are checked on a deterministic grid plus seeded random samples.
Violations are recorded as witnesses on the report, never raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import ConeVector
from .polymap import PiecewisePolyMap

__all__ = [
    "BMetricSpec",
    "CDistanceSpec",
    "SampleSet",
    "ConvergentSequence",
    "AxiomWitness",
    "AxiomReport",
    "NoValidTriple",
    "d_eval",
    "q_eval",
    "q4_witness",
    "verify_b_metric_axioms",
    "verify_c_distance_axioms",
    "estimate_b_constant",
    "default_sequences",
]

MAX_WITNESSES = 16


class NoValidTriple(ValueError):
    """The sample set does not contain three distinct points."""


@dataclass(frozen=True)
class BMetricSpec:
    """Parameters of the power-type vector metric.

    The constructor only requires b >= 1 so that deliberately broken
    relaxation constants can be run through the axiom checker; use
    `family` for the canonical b = 2^(p-1).
    """

    p: float
    alpha: float
    b: float
    warp: PiecewisePolyMap | None = None

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 1.0):
            raise ValueError("exponent p must be >= 1")
        if not (math.isfinite(self.alpha) and self.alpha >= 1.0):
            raise ValueError("weight alpha must be >= 1")
        if not (math.isfinite(self.b) and self.b >= 1.0):
            raise ValueError("relaxation constant b must be >= 1")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "b", float(self.b))

    @classmethod
    def family(cls, p: float, alpha: float = 1.0, warp: PiecewisePolyMap | None = None) -> "BMetricSpec":
        """Built-in family with the sufficient relaxation constant 2^(p-1)."""
        return cls(p=p, alpha=alpha, b=2.0 ** (float(p) - 1.0), warp=warp)


@dataclass(frozen=True)
class CDistanceSpec:
    """Parameters of the asymmetric gauge (a * y^p, eta * a * y^p)."""

    p: float
    a: float
    eta: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 1.0):
            raise ValueError("exponent p must be > 1")
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise ValueError("scale a must be > 0")
        if not (math.isfinite(self.eta) and self.eta >= 1.0):
            raise ValueError("weight eta must be >= 1")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "eta", float(self.eta))


def _phi_scalar(spec: BMetricSpec, x: float, y: float) -> float:
    if spec.warp is None:
        return abs(float(x) - float(y))
    return abs(spec.warp(float(x)) - spec.warp(float(y)))


def _phi_matrix(spec: BMetricSpec, pts: np.ndarray) -> np.ndarray:
    """Pairwise phi(x_i, x_j)^p over the sample points."""
    vals = pts if spec.warp is None else np.asarray(spec.warp(pts), dtype=float)
    return np.abs(vals[:, None] - vals[None, :]) ** spec.p


def d_eval(spec: BMetricSpec, x: float, y: float) -> ConeVector:
    """Distance vector (phi^p, alpha * phi^p); exactly zero at x = y."""
    base = _phi_scalar(spec, x, y) ** spec.p
    return ConeVector.of(base, spec.alpha * base)


def q_eval(spec: CDistanceSpec, x: float, y: float) -> ConeVector:
    """Gauge vector (a*y^p, eta*a*y^p); independent of the first argument."""
    base = spec.a * float(y) ** spec.p
    return ConeVector.of(base, spec.eta * base)


def gauge_values(spec: CDistanceSpec, ys) -> np.ndarray:
    """First gauge component a*y^p for an array of points (second is eta times it)."""
    return spec.a * np.asarray(ys, dtype=float) ** spec.p


@dataclass(frozen=True)
class SampleSet:
    """Deterministic grid plus seeded uniform samples over [lo, hi]."""

    points: tuple[float, ...]
    lo: float
    hi: float
    grid: int
    random: int
    seed: int

    @classmethod
    def build(
        cls,
        lo: float = 0.0,
        hi: float = 1.0,
        grid: int = 33,
        random: int = 256,
        seed: int = 42,
    ) -> "SampleSet":
        if not (lo < hi):
            raise ValueError("need lo < hi")
        pts = list(np.linspace(lo, hi, max(int(grid), 2)))
        rng = np.random.default_rng(seed)
        pts.extend(rng.uniform(lo, hi, max(int(random), 0)))
        return cls(tuple(float(x) for x in pts), float(lo), float(hi), int(grid), int(random), int(seed))

    @classmethod
    def from_points(cls, points, lo: float = 0.0, hi: float = 1.0, seed: int = 0) -> "SampleSet":
        pts = tuple(float(x) for x in points)
        if not pts:
            raise ValueError("empty sample set")
        return cls(pts, float(lo), float(hi), 0, 0, int(seed))

    def array(self) -> np.ndarray:
        return np.array(self.points, dtype=float)


@dataclass(frozen=True)
class ConvergentSequence:
    """Finite prefix of a sequence together with its declared limit."""

    terms: tuple[float, ...]
    limit: float

    def __post_init__(self):
        terms = tuple(float(t) for t in self.terms)
        if not terms:
            raise ValueError("sequence prefix is empty")
        if not math.isfinite(self.limit):
            raise ValueError("sequence needs a finite declared limit")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "limit", float(self.limit))


def default_sequences(lo: float = 0.0, hi: float = 1.0, depth: int = 64) -> tuple[ConvergentSequence, ...]:
    """Three convergent probes: toward each endpoint and an oscillation."""
    span = hi - lo
    mid = 0.5 * (lo + hi)
    down = tuple(lo + span / (n + 1.0) for n in range(depth))
    up = tuple(hi - span / (n + 1.0) for n in range(depth))
    osc = tuple(mid + span * (-0.5) ** (n + 2) for n in range(depth))
    return (
        ConvergentSequence(down, lo),
        ConvergentSequence(up, hi),
        ConvergentSequence(osc, mid),
    )


@dataclass(frozen=True)
class AxiomWitness:
    """A violating sample with both sides of the failed comparison."""

    points: tuple[float, ...]
    lhs: tuple[float, ...]
    rhs: tuple[float, ...]


@dataclass(frozen=True)
class AxiomReport:
    axiom: str
    verdict: str  # "pass" | "fail" | "skipped"
    checked: int
    witnesses: tuple[AxiomWitness, ...] = ()
    detail: str = ""


def _finish(axiom: str, checked: int, witnesses: list[AxiomWitness], detail: str = "") -> AxiomReport:
    if witnesses:
        ordered = tuple(sorted(witnesses, key=lambda w: w.points)[:MAX_WITNESSES])
        note = f"{len(witnesses)} violations" + (f"; {detail}" if detail else "")
        return AxiomReport(axiom, "fail", checked, ordered, note)
    return AxiomReport(axiom, "pass", checked, (), detail)


def verify_b_metric_axioms(spec: BMetricSpec, samples: SampleSet, *, slack: float = 1e-12) -> list[AxiomReport]:
    """Check nonnegativity/identity, symmetry, and the relaxed triangle.

    The triangle check runs over every ordered triple of sample points
    against the spec's own b.  Both components of d scale together, so the
    comparisons reduce to the first component.
    """
    pts = samples.array()
    n = len(pts)
    phi = _phi_matrix(spec, pts)

    # identity of indiscernibles and nonnegativity over all pairs
    w1: list[AxiomWitness] = []
    same_value = pts[:, None] == pts[None, :]
    zero_d = phi == 0.0
    bad = zero_d != same_value
    if phi.min() < 0.0:
        bad |= phi < 0.0
    for i, j in zip(*np.nonzero(bad)):
        w1.append(AxiomWitness((float(pts[i]), float(pts[j])), (float(phi[i, j]),), (0.0,)))
    r1 = _finish("b1", n * n, w1)

    # symmetry must hold bitwise for the built-in phi
    w2: list[AxiomWitness] = []
    asym = phi != phi.T
    for i, j in zip(*np.nonzero(asym)):
        w2.append(
            AxiomWitness((float(pts[i]), float(pts[j])), (float(phi[i, j]),), (float(phi[j, i]),))
        )
    r2 = _finish("b2", n * n, w2)

    # relaxed triangle: d(x,z) <= b (d(x,y) + d(y,z)) for all triples,
    # equivalently against the minimum over middle points
    best = np.full((n, n), np.inf)
    best_j = np.zeros((n, n), dtype=int)
    for j in range(n):
        cand = phi[:, j][:, None] + phi[j, :][None, :]
        better = cand < best
        best = np.where(better, cand, best)
        best_j = np.where(better, j, best_j)
    ok = phi <= spec.b * best + slack
    w3: list[AxiomWitness] = []
    for i, k in zip(*np.nonzero(~ok)):
        j = int(best_j[i, k])
        lhs = (float(phi[i, k]), float(spec.alpha * phi[i, k]))
        rhs_base = spec.b * best[i, k]
        rhs = (float(rhs_base), float(spec.alpha * rhs_base))
        w3.append(AxiomWitness((float(pts[i]), float(pts[j]), float(pts[k])), lhs, rhs))
    r3 = _finish("b3", n * n * n, w3, detail=f"b={spec.b:g}")

    return [r1, r2, r3]


def q4_witness(
    spec: CDistanceSpec,
    alpha: float,
    p: float,
    e_star: ConeVector,
    k1: float | None = None,
    k2: float | None = None,
) -> ConeVector:
    """Interior threshold e below which small gauges force small distance.

    Given an interior target e*, returns
        e = (e*_1 / (2^(p-1) (k1+k2)),  eta e*_2 / (2^(p-1) alpha (k1+k2))).
    The constants default to the gauge scale a, the tightest choice that
    makes the implication provable on [0, 1] for a >= 2^(-p/2).
    """
    es = e_star.to_array() if isinstance(e_star, ConeVector) else np.asarray(e_star, dtype=float)
    if es.shape != (2,):
        raise ValueError("e_star must be a two-component vector")
    if not np.all(es > 0.0):
        raise ValueError("e_star must lie in the cone interior (both components > 0)")
    k1 = spec.a if k1 is None else float(k1)
    k2 = spec.a if k2 is None else float(k2)
    if not (k1 >= 0.0 and k2 >= 0.0 and k1 + k2 > 0.0):
        raise ValueError("need k1, k2 >= 0 with k1 + k2 > 0")
    denom = 2.0 ** (float(p) - 1.0) * (k1 + k2)
    e1 = float(es[0]) / denom
    e2 = spec.eta * float(es[1]) / (denom * float(alpha))
    return ConeVector.of(e1, e2)


def verify_c_distance_axioms(
    spec: CDistanceSpec,
    b: float,
    samples: SampleSet,
    sequences: tuple[ConvergentSequence, ...] | list[ConvergentSequence],
    *,
    d_spec: BMetricSpec | None = None,
    e_stars: tuple[tuple[float, float], ...] = ((1.0, 1.0), (0.5, 1.5), (2.0, 0.75)),
    k1: float | None = None,
    k2: float | None = None,
    slack: float = 1e-12,
) -> list[AxiomReport]:
    """Check the four gauge axioms on samples and declared-limit sequences.

    The fourth axiom couples the gauge to its companion metric; d_spec
    defaults to the built-in family with the gauge's exponent and weight.
    The limit axiom is checked over each sequence's finite prefix and the
    verdict is labelled with the depth, never treated as proved.
    """
    if d_spec is None:
        d_spec = BMetricSpec(p=spec.p, alpha=spec.eta, b=float(b))
    pts = samples.array()
    n = len(pts)
    g = gauge_values(spec, pts)  # first component; second is eta * g

    # q1: the gauge never leaves the cone
    w1 = [
        AxiomWitness((float(pts[i]),), (float(g[i]), float(spec.eta * g[i])), (0.0, 0.0))
        for i in np.nonzero(g < 0.0)[0]
    ]
    r1 = _finish("q1", n * n, w1)

    # q2: relaxed triangle; both components scale together, and the first
    # argument is ignored, so the check runs over (middle, end) pairs
    rhs = float(b) * (g[:, None] + g[None, :])  # rhs[j, k] for middle j, end k
    lhs = np.broadcast_to(g[None, :], rhs.shape)
    bad = lhs > rhs + slack
    w2: list[AxiomWitness] = []
    for j, k in zip(*np.nonzero(bad)):
        w2.append(
            AxiomWitness(
                (float(pts[j]), float(pts[k])),
                (float(g[k]), float(spec.eta * g[k])),
                (float(rhs[j, k]), float(spec.eta * rhs[j, k])),
            )
        )
    r2 = _finish("q2", n * n * n, w2, detail=f"b={b:g}")

    # q3: a uniform bound e over the prefix must cap the limit gauge by b*e
    if sequences:
        w3: list[AxiomWitness] = []
        checked3 = 0
        depth = 0
        for seq in sequences:
            terms = np.asarray(seq.terms, dtype=float)
            depth = max(depth, len(terms))
            checked3 += len(terms)
            e1 = float(gauge_values(spec, terms).max())  # tightest admissible bound
            lim1 = float(gauge_values(spec, [seq.limit])[0])
            if lim1 > float(b) * e1 + slack:
                w3.append(
                    AxiomWitness(
                        (float(seq.limit),),
                        (lim1, spec.eta * lim1),
                        (float(b) * e1, float(b) * spec.eta * e1),
                    )
                )
        r3 = _finish("q3", checked3, w3, detail=f"checked to depth {depth}")
    else:
        r3 = AxiomReport("q3", "skipped", 0, (), "no sequences supplied")

    # q4: with e built from the target e*, gauges below e force d below e*
    w4: list[AxiomWitness] = []
    checked4 = 0
    for es in e_stars:
        e = q4_witness(spec, d_spec.alpha, d_spec.p, ConeVector.of(*es), k1, k2).to_array()
        premise = (g < e[0]) & (spec.eta * g < e[1])
        idx = np.nonzero(premise)[0]
        if idx.size == 0:
            continue
        sub = pts[idx]
        dmat = _phi_matrix(d_spec, sub)
        checked4 += idx.size * idx.size
        bad4 = ~((dmat < es[0]) & (d_spec.alpha * dmat < es[1]))
        for i, j in zip(*np.nonzero(bad4)):
            w4.append(
                AxiomWitness(
                    (float(sub[i]), float(sub[j])),
                    (float(dmat[i, j]), float(d_spec.alpha * dmat[i, j])),
                    (float(es[0]), float(es[1])),
                )
            )
    r4 = _finish("q4", checked4, w4, detail=f"targets={len(e_stars)}")

    return [r1, r2, r3, r4]


def estimate_b_constant(spec: BMetricSpec, samples: SampleSet) -> float:
    """Empirical relaxation constant: the largest d(x,z) / (d(x,y)+d(y,z)).

    Zero denominators are skipped.  Both components give the same ratio,
    so the estimate is computed on the first.
    """
    pts = samples.array()
    if len(set(pts.tolist())) < 3:
        raise NoValidTriple("need at least three distinct sample points")
    phi = _phi_matrix(spec, pts)
    n = len(pts)
    best = np.full((n, n), np.inf)
    for j in range(n):
        cand = phi[:, j][:, None] + phi[j, :][None, :]
        cand = np.where(cand > 0.0, cand, np.inf)
        best = np.minimum(best, cand)
    ratios = np.where(np.isfinite(best), phi / np.where(np.isfinite(best), best, 1.0), 0.0)
    sup = float(ratios.max())
    if sup == 0.0 and not np.isfinite(best).any():
        raise NoValidTriple("all sampled denominators vanish")
    return sup
