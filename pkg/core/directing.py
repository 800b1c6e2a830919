"""Piecewise-linear directing functions on [0, 1].

A directing function orders values: the arrival order of a binary
rearrangement lists the points by increasing f-value. Canonicalization swaps
f for the measure-preserving function inducing the same order,
f~(u) = Leb{v : f(v) < f(u)}.
"""

import json
from bisect import bisect_right
from fractions import Fraction
from numbers import Number
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from core.errors import RearrangementError, SingularFunctionError
from core.pointprocess import IntervalSet, as_number, render_number

FLOAT_TOLERANCE = 1e-12
SLOPE_TOLERANCE = 1e-9


class VShapeParams(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    theta: Any

    @field_validator("theta", mode="before")
    @classmethod
    def _check_theta(cls, value):
        value = as_number(value)
        if not 0 <= value <= 1:
            raise ValueError(f"theta={value} is outside [0, 1]")
        return value


class PiecewiseLinearFn(BaseModel):
    """Continuous function given by its values at breakpoints 0 = b_0 < ... < b_m = 1"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    breakpoints: Tuple[Any, ...]
    values: Tuple[Any, ...]

    @field_validator("breakpoints", "values", mode="before")
    @classmethod
    def _coerce(cls, value):
        return tuple(as_number(v) for v in value)

    @model_validator(mode="after")
    def _validate(self) -> "PiecewiseLinearFn":
        bps, vals = self.breakpoints, self.values
        if len(bps) < 2 or len(bps) != len(vals):
            raise ValueError("need at least two breakpoints and one value per breakpoint")
        if bps[0] != 0 or bps[-1] != 1:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if any(b >= a_next for b, a_next in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        for i, (v0, v1) in enumerate(zip(vals, vals[1:])):
            if v0 == v1:
                raise SingularFunctionError(f"piece {i} on [{bps[i]}, {bps[i + 1]}] is constant")
        return self

    @classmethod
    def of(cls, breakpoints: Sequence[Any], values: Sequence[Any]) -> "PiecewiseLinearFn":
        """Build a function, raising SingularFunctionError (not a ValidationError) for a flat piece"""
        vals = [as_number(v) for v in values]
        for i, (v0, v1) in enumerate(zip(vals, vals[1:])):
            if v0 == v1:
                raise SingularFunctionError(f"piece {i} is constant at {v0}")
        return cls(breakpoints=breakpoints, values=vals)

    @property
    def pieces(self) -> List[Tuple[Number, Number, Number, Number]]:
        return [(self.breakpoints[i], self.breakpoints[i + 1], self.values[i], self.values[i + 1])
                for i in range(len(self.breakpoints) - 1)]

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.breakpoints + self.values)

    def __call__(self, x: Number) -> Number:
        return evaluate(self, x)

    def to_json(self) -> Dict[str, List[Any]]:
        return {"breakpoints": [render_number(b) for b in self.breakpoints],
                "values": [render_number(v) for v in self.values]}

    @classmethod
    def from_json(cls, payload) -> "PiecewiseLinearFn":
        if isinstance(payload, str):
            payload = json.loads(payload)
        return cls.of(payload["breakpoints"], payload["values"])


def v_shape(theta: Number) -> PiecewiseLinearFn:
    """f_theta: (theta - x)/theta on [0, theta], (x - theta)/(1 - theta) on [theta, 1]"""
    theta = VShapeParams(theta=theta).theta
    if theta == 0:
        return PiecewiseLinearFn(breakpoints=(0, 1), values=(0, 1))
    if theta == 1:
        return PiecewiseLinearFn(breakpoints=(0, 1), values=(1, 0))
    one = Fraction(1) if isinstance(theta, Fraction) else 1.0
    return PiecewiseLinearFn(breakpoints=(0, theta, one), values=(one, 0 * one, one))


def evaluate(f: PiecewiseLinearFn, x: Number) -> Number:
    """Linear interpolation on the piece [b_i, b_{i+1}) containing x (last piece closed)"""
    if not 0 <= x <= 1:
        raise RearrangementError(f"x={x} is outside [0, 1]")
    bps = f.breakpoints
    i = min(bisect_right(bps, x) - 1, len(bps) - 2)
    b0, b1, v0, v1 = f.pieces[i]
    if x == b0:
        return v0
    if x == b1:
        return v1
    return v0 + (v1 - v0) * (x - b0) / (b1 - b0)


def evaluate_many(f: PiecewiseLinearFn, xs: np.ndarray) -> np.ndarray:
    """Vectorized float evaluation"""
    return np.interp(xs, [float(b) for b in f.breakpoints], [float(v) for v in f.values])


def _sublevel_piece(b0, b1, v0, v1, t) -> Tuple[Number, Number]:
    """The sub-interval of [b0, b1] where the linear piece is <= t (may be empty: lo >= hi)"""
    lo_v, hi_v = min(v0, v1), max(v0, v1)
    if t < lo_v:
        return b0, b0
    if t >= hi_v:
        return b0, b1
    cut = b0 + (t - v0) * (b1 - b0) / (v1 - v0)
    return (b0, cut) if v0 < v1 else (cut, b1)


def distribution_function(f: PiecewiseLinearFn, t: Number) -> Number:
    """F(t) = Leb{u : f(u) <= t}, summed piece by piece"""
    total = Fraction(0)
    for b0, b1, v0, v1 in f.pieces:
        lo, hi = _sublevel_piece(b0, b1, v0, v1, t)
        if hi > lo:
            total += hi - lo
    return total


def filtration_set(f: PiecewiseLinearFn, t: Number) -> IntervalSet:
    """B_t = {u : f(u) <= t} as disjoint intervals"""
    pieces = []
    for b0, b1, v0, v1 in f.pieces:
        lo, hi = _sublevel_piece(b0, b1, v0, v1, t)
        if hi > lo:
            pieces.append((lo, hi))
    return IntervalSet(intervals=pieces)


def _collinear(b0, b1, b2, v0, v1, v2) -> bool:
    left = (v1 - v0) * (b2 - b1)
    right = (v2 - v1) * (b1 - b0)
    if isinstance(left, Fraction) and isinstance(right, Fraction):
        return left == right
    s1 = (v1 - v0) / (b1 - b0)
    s2 = (v2 - v1) / (b2 - b1)
    return abs(s1 - s2) <= SLOPE_TOLERANCE * max(1.0, abs(s1), abs(s2))


def simplify(f: PiecewiseLinearFn) -> PiecewiseLinearFn:
    """Drop interior breakpoints where neighbouring pieces share a slope"""
    bps, vals = [f.breakpoints[0]], [f.values[0]]
    for i in range(1, len(f.breakpoints) - 1):
        b_next, v_next = f.breakpoints[i + 1], f.values[i + 1]
        if not _collinear(bps[-1], f.breakpoints[i], b_next, vals[-1], f.values[i], v_next):
            bps.append(f.breakpoints[i])
            vals.append(f.values[i])
    bps.append(f.breakpoints[-1])
    vals.append(f.values[-1])
    return PiecewiseLinearFn(breakpoints=bps, values=vals)


def canonicalize(f: PiecewiseLinearFn) -> PiecewiseLinearFn:
    """The measure-preserving directing function with the same almost total ordering.

    F is linear between consecutive breakpoint levels of f, so F o f is linear
    once each piece of f is cut wherever it crosses one of those levels.
    """
    exact = f.is_exact
    margin = 0 if exact else FLOAT_TOLERANCE
    levels: List[Any] = []
    for level in sorted(set(f.values)):
        if not levels or level - levels[-1] > margin:
            levels.append(level)
    points: Dict[Any, Any] = {}
    for b0, b1, v0, v1 in f.pieces:
        points[b0] = v0
        points[b1] = v1
        lo_v, hi_v = min(v0, v1), max(v0, v1)
        for level in levels:
            if lo_v < level < hi_v:
                cut = b0 + (level - v0) * (b1 - b0) / (v1 - v0)
                if b0 + margin < cut < b1 - margin:
                    points[cut] = level
    bps = sorted(points)
    canonical = PiecewiseLinearFn(
        breakpoints=bps,
        values=[distribution_function(f, points[b]) for b in bps],
    )
    return simplify(canonical)


def is_measure_preserving(f: PiecewiseLinearFn, levels: Sequence[Number] = (),
                          tol: float = FLOAT_TOLERANCE) -> bool:
    """F(t) == t at every breakpoint value of f and at the extra levels"""
    for t in list(f.values) + list(levels):
        if 0 <= t <= 1 and abs(float(distribution_function(f, t)) - float(t)) > tol:
            return False
    return 0 <= min(f.values) and max(f.values) <= 1


def isclose(f: PiecewiseLinearFn, g: PiecewiseLinearFn, tol: float = FLOAT_TOLERANCE) -> bool:
    if len(f.breakpoints) != len(g.breakpoints):
        return False
    pairs = zip(f.breakpoints + f.values, g.breakpoints + g.values)
    return all(abs(float(a) - float(b)) <= tol for a, b in pairs)


def order_agrees(f: PiecewiseLinearFn, g: PiecewiseLinearFn, u: np.ndarray, v: np.ndarray) -> bool:
    """sign(f(u) - f(v)) == sign(g(u) - g(v)) wherever f(u) != f(v)"""
    df = evaluate_many(f, u) - evaluate_many(f, v)
    dg = evaluate_many(g, u) - evaluate_many(g, v)
    mask = df != 0
    return bool(np.all(np.sign(df[mask]) == np.sign(dg[mask])))
