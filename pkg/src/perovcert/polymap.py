"""Piecewise polynomial self-maps of a real variable.

A map is a default polynomial plus a finite list of exceptional points at
which a different polynomial applies.  Exceptional points are matched with
an absolute tolerance because a measure-zero branch cannot be hit reliably
in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["PiecewisePolyMap", "horner"]


def horner(coeffs, x):
    """Evaluate a polynomial with ascending-degree coefficients at x.

    x may be a scalar or an ndarray; the result has the same shape.
    """
    arr = np.asarray(x, dtype=float)
    acc = np.zeros_like(arr)
    for c in reversed(coeffs):
        acc = acc * arr + c
    return acc


@dataclass(frozen=True)
class PiecewisePolyMap:
    """Polynomial map with isolated exceptional points.

    default: ascending-degree coefficients used almost everywhere.
    exceptions: ((point, coefficients), ...) applied when the input is
        within match_eps of the point.
    """

    default: tuple[float, ...]
    exceptions: tuple[tuple[float, tuple[float, ...]], ...] = ()
    match_eps: float = 1e-12

    def __post_init__(self):
        default = tuple(float(c) for c in self.default)
        if not default:
            raise ValueError("default polynomial needs at least one coefficient")
        if not all(math.isfinite(c) for c in default):
            raise ValueError("polynomial coefficients must be finite")
        excs = []
        for at, poly in self.exceptions:
            at = float(at)
            poly = tuple(float(c) for c in poly)
            if not poly:
                raise ValueError(f"exception polynomial at {at} is empty")
            if not (math.isfinite(at) and all(math.isfinite(c) for c in poly)):
                raise ValueError("exception data must be finite")
            excs.append((at, poly))
        pts = [at for at, _ in excs]
        for i, a in enumerate(pts):
            for b in pts[i + 1:]:
                if abs(a - b) <= 2.0 * self.match_eps:
                    raise ValueError(f"exception points {a} and {b} are not distinct")
        if not (self.match_eps >= 0.0 and math.isfinite(self.match_eps)):
            raise ValueError("match_eps must be a finite nonnegative real")
        object.__setattr__(self, "default", default)
        object.__setattr__(self, "exceptions", tuple(excs))
        object.__setattr__(self, "match_eps", float(self.match_eps))

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        out = horner(self.default, arr)
        for at, poly in self.exceptions:
            mask = np.abs(arr - at) <= self.match_eps
            if mask.any():
                out = np.where(mask, horner(poly, arr), out)
        if np.ndim(x) == 0:
            return float(out)
        return out
