"""Plain interval arithmetic over expression DAGs.

Ranges for sin/cos are quadrant-aware (exact over any input interval) rather
than the naive [-1, 1]; tanh and exp use monotonicity. These exact unary
ranges keep the interval fallback from making trigonometric systems vacuous.
"""

from __future__ import annotations

import math
from typing import Optional

from .expressions import (
    Constant,
    ControlVar,
    Difference,
    Expr,
    Product,
    Scale,
    StateVar,
    Sum,
    Unary,
)
from .geometry import Hyperrect

__all__ = [
    "add_i",
    "sub_i",
    "mul_i",
    "scale_i",
    "unary_range",
    "relu_range",
    "interval_eval",
]

Interval = tuple[float, float]

_TWO_PI = 2.0 * math.pi


def add_i(a: Interval, b: Interval) -> Interval:
    return (a[0] + b[0], a[1] + b[1])


def sub_i(a: Interval, b: Interval) -> Interval:
    return (a[0] - b[1], a[1] - b[0])


def _prod(x: float, y: float) -> float:
    # 0 * inf would be NaN; an exact zero factor forces a zero product
    if x == 0.0 or y == 0.0:
        return 0.0
    return x * y


def mul_i(a: Interval, b: Interval) -> Interval:
    ps = (_prod(a[0], b[0]), _prod(a[0], b[1]), _prod(a[1], b[0]), _prod(a[1], b[1]))
    return (min(ps), max(ps))


def scale_i(c: float, a: Interval) -> Interval:
    if c >= 0:
        return (_prod(c, a[0]), _prod(c, a[1]))
    return (_prod(c, a[1]), _prod(c, a[0]))


def _hits_angle(lo: float, hi: float, target: float) -> bool:
    """True iff target + 2*pi*k lies in [lo, hi] for some integer k."""
    k = math.ceil((lo - target) / _TWO_PI)
    return target + _TWO_PI * k <= hi


def sin_range(lo: float, hi: float) -> Interval:
    if hi - lo >= _TWO_PI:
        return (-1.0, 1.0)
    lo_v, hi_v = math.sin(lo), math.sin(hi)
    out_lo, out_hi = min(lo_v, hi_v), max(lo_v, hi_v)
    if _hits_angle(lo, hi, math.pi / 2):
        out_hi = 1.0
    if _hits_angle(lo, hi, -math.pi / 2):
        out_lo = -1.0
    return (out_lo, out_hi)


def cos_range(lo: float, hi: float) -> Interval:
    if hi - lo >= _TWO_PI:
        return (-1.0, 1.0)
    lo_v, hi_v = math.cos(lo), math.cos(hi)
    out_lo, out_hi = min(lo_v, hi_v), max(lo_v, hi_v)
    if _hits_angle(lo, hi, 0.0):
        out_hi = 1.0
    if _hits_angle(lo, hi, math.pi):
        out_lo = -1.0
    return (out_lo, out_hi)


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def unary_range(fn: str, lo: float, hi: float) -> Interval:
    """Exact range of a primitive over [lo, hi]."""
    if fn == "sin":
        return sin_range(lo, hi)
    if fn == "cos":
        return cos_range(lo, hi)
    if fn == "tanh":
        return (math.tanh(lo), math.tanh(hi))
    if fn == "exp":
        return (_exp(lo), _exp(hi))
    raise ValueError(f"unknown primitive {fn!r}")


def relu_range(lo: float, hi: float) -> Interval:
    return (max(lo, 0.0), max(hi, 0.0))


def interval_eval(expr: Expr, box: Hyperrect,
                  ubox: Optional[Hyperrect] = None) -> Interval:
    """Sound interval enclosure of ``expr`` over ``box`` (x) and ``ubox`` (u)."""
    cache: dict[int, Interval] = {}

    def ev(e: Expr) -> Interval:
        hit = cache.get(id(e))
        if hit is not None:
            return hit
        if isinstance(e, Constant):
            out = (e.value, e.value)
        elif isinstance(e, StateVar):
            out = (float(box.lo[e.index]), float(box.hi[e.index]))
        elif isinstance(e, ControlVar):
            if ubox is None:
                raise ValueError("expression uses control variables but no ubox given")
            out = (float(ubox.lo[e.index]), float(ubox.hi[e.index]))
        elif isinstance(e, Sum):
            out = add_i(ev(e.left), ev(e.right))
        elif isinstance(e, Difference):
            out = sub_i(ev(e.left), ev(e.right))
        elif isinstance(e, Product):
            out = mul_i(ev(e.left), ev(e.right))
        elif isinstance(e, Scale):
            out = scale_i(e.factor, ev(e.arg))
        elif isinstance(e, Unary):
            out = unary_range(e.fn, *ev(e.arg))
        else:
            raise TypeError(f"unknown expression node {type(e).__name__}")
        cache[id(e)] = out
        return out

    return ev(expr)
