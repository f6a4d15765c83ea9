"""Sound affine relaxations used by the symbolic reachability backend.

Every scalar quantity is tracked as a pair of affine functions of the start
variables z (the coordinates of the query's start box Z):

    lo_a . z + lo_c  <=  value(z)  <=  hi_a . z + hi_c      for all z in Z

together with the tightest known concrete range of the quantity (the affine
pair concretized over Z, intersected with a plain interval evaluation).
Nonlinear operations relax to this form:

* products use McCormick envelopes over the operands' concrete ranges;
* the smooth 1-d primitives use a chord-slope line shifted by offsets
  extracted from a piecewise-linear enclosure of the primitive (the number
  of pieces is the refinement knob: more pieces -> tighter offsets);
* ReLU uses the standard triangle relaxation with an adaptive lower slope.

Per-cell piecewise bounds come from convexity: on an inflection-free cell a
convex function lies above its endpoint tangents and below its chord (the
concave case mirrors). Intercepts carry a ~1e-12 relative pad so floating
point rounding cannot nick soundness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

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
from .intervals import add_i, mul_i, scale_i, sub_i, unary_range
from .model import NeuralNet

__all__ = [
    "Piece",
    "PwlBound",
    "build_pwl",
    "SymScalar",
    "SymBatch",
    "BoundContext",
    "sym_eval",
    "propagate_network",
]

PAD_REL = 1e-12
_POINT_TOL = 1e-14


# ---------------------------------------------------------------------------
# piecewise-linear enclosures of the 1-d primitives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Piece:
    """One affine piece valid on [x_lo, x_hi]."""

    x_lo: float
    x_hi: float
    slope: float
    intercept: float

    def __call__(self, x: float) -> float:
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class PwlBound:
    """Piecewise-linear lower/upper enclosure of one primitive on a domain."""

    fn: str
    domain: tuple[float, float]
    lower: tuple[Piece, ...]
    upper: tuple[Piece, ...]


def _d_sin(x: float) -> float:
    return math.cos(x)


def _d_cos(x: float) -> float:
    return -math.sin(x)


def _d_tanh(x: float) -> float:
    t = math.tanh(x)
    return 1.0 - t * t

def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _curv_sin(x: float) -> float:
    return -math.sin(x)


def _curv_cos(x: float) -> float:
    return -math.cos(x)


def _curv_tanh(x: float) -> float:
    t = math.tanh(x)
    return -2.0 * t * (1.0 - t * t)


def _infl_sin(lo: float, hi: float) -> list[float]:
    ks = range(math.ceil(lo / math.pi), math.floor(hi / math.pi) + 1)
    return [k * math.pi for k in ks]


def _infl_cos(lo: float, hi: float) -> list[float]:
    shift = math.pi / 2
    ks = range(math.ceil((lo - shift) / math.pi),
               math.floor((hi - shift) / math.pi) + 1)
    return [shift + k * math.pi for k in ks]


def _infl_tanh(lo: float, hi: float) -> list[float]:
    return [0.0] if lo < 0.0 < hi else []


_PRIMS: dict[str, tuple[Callable, Callable, Callable, Callable]] = {
    # fn -> (value, derivative, curvature sign probe, inflection points)
    "sin": (math.sin, _d_sin, _curv_sin, _infl_sin),
    "cos": (math.cos, _d_cos, _curv_cos, _infl_cos),
    "tanh": (math.tanh, _d_tanh, _curv_tanh, _infl_tanh),
    "exp": (_safe_exp, _safe_exp, lambda x: 1.0, lambda lo, hi: []),
}


def _tangent(f: Callable, df: Callable, x: float) -> tuple[float, float]:
    s = df(x)
    return s, f(x) - s * x


def _tangent_envelope(f: Callable, df: Callable, a: float, b: float,
                      take_min: bool, pad: float) -> list[Piece]:
    """Envelope of the two endpoint tangents on [a, b] (1 or 2 pieces)."""
    sa, ia = _tangent(f, df, a)
    sb, ib = _tangent(f, df, b)
    shift = pad if take_min else -pad  # min-envelope is an upper bound
    if abs(sa - sb) > 1e-15 * max(1.0, abs(sa), abs(sb)):
        cross = (ib - ia) / (sa - sb)
        if a < cross < b:
            return [Piece(a, cross, sa, ia + shift),
                    Piece(cross, b, sb, ib + shift)]
    # parallel or crossing outside the cell: keep the dominating line
    mid = 0.5 * (a + b)
    va, vb = sa * mid + ia, sb * mid + ib
    if take_min:
        s, i = (sa, ia) if va <= vb else (sb, ib)
    else:
        s, i = (sa, ia) if va >= vb else (sb, ib)
    return [Piece(a, b, s, i + shift)]


def _cell_pieces(fn: str, a: float, b: float) -> tuple[list[Piece], list[Piece]]:
    """Sound (lower, upper) pieces on an inflection-free cell [a, b]."""
    f, df, curv, _ = _PRIMS[fn]
    fa, fb = f(a), f(b)
    pad = PAD_REL * max(1.0, abs(fa), abs(fb), abs(a), abs(b))
    width = b - a
    if width <= _POINT_TOL * max(1.0, abs(a), abs(b)) or not math.isfinite(fa + fb):
        # degenerate or overflowing cell: constant bounds from the exact range
        lo_v, hi_v = unary_range(fn, a, b)
        return ([Piece(a, b, 0.0, lo_v - pad)], [Piece(a, b, 0.0, hi_v + pad)])
    slope = (fb - fa) / width
    chord = Piece(a, b, slope, fa - slope * a)
    if curv(0.5 * (a + b)) >= 0.0:  # convex cell
        lower = _tangent_envelope(f, df, a, b, take_min=False, pad=pad)
        upper = [Piece(a, b, slope, chord.intercept + pad)]
    else:  # concave cell
        lower = [Piece(a, b, slope, chord.intercept - pad)]
        upper = _tangent_envelope(f, df, a, b, take_min=True, pad=pad)
    return lower, upper


def build_pwl(fn: str, lo: float, hi: float, segments: int) -> PwlBound:
    """PWL enclosure of a primitive on [lo, hi] with ``segments`` cells.

    Cells are additionally split at inflection points so that each cell has
    constant curvature sign.
    """
    if fn not in _PRIMS:
        raise ValueError(f"unknown primitive {fn!r}")
    if not hi > lo:
        raise ValueError("build_pwl requires a non-degenerate domain")
    if segments < 1:
        raise ValueError("segments must be >= 1")
    cuts = list(np.linspace(lo, hi, segments + 1))
    span = hi - lo
    for p in _PRIMS[fn][3](lo, hi):
        if lo < p < hi:
            cuts.append(p)
    cuts = sorted(set(cuts))
    merged = [cuts[0]]
    for c in cuts[1:]:
        if c - merged[-1] > 1e-12 * max(span, 1.0):
            merged.append(c)
    merged[-1] = hi
    lower: list[Piece] = []
    upper: list[Piece] = []
    for a, b in zip(merged, merged[1:]):
        cell_lo, cell_hi = _cell_pieces(fn, a, b)
        lower.extend(cell_lo)
        upper.extend(cell_hi)
    return PwlBound(fn, (lo, hi), tuple(lower), tuple(upper))


def _offset_below(pieces: tuple[Piece, ...], slope: float) -> float:
    """min over the PWL graph of piece(x) - slope*x (attained at piece ends)."""
    best = math.inf
    for p in pieces:
        for x in (p.x_lo, p.x_hi):
            best = min(best, p(x) - slope * x)
    return best


def _offset_above(pieces: tuple[Piece, ...], slope: float) -> float:
    best = -math.inf
    for p in pieces:
        for x in (p.x_lo, p.x_hi):
            best = max(best, p(x) - slope * x)
    return best


# ---------------------------------------------------------------------------
# symbolic affine bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymScalar:
    """Affine lower/upper enclosure of one scalar over the start box."""

    lo_a: np.ndarray
    lo_c: float
    hi_a: np.ndarray
    hi_c: float
    rng: tuple[float, float]


def _dot_min(a: np.ndarray, zlo: np.ndarray, zhi: np.ndarray) -> float:
    p1, p2 = a * zlo, a * zhi
    lo = np.minimum(p1, p2)
    lo[np.isnan(lo)] = 0.0  # 0 * inf from unbounded domains
    return float(lo.sum())


def _dot_max(a: np.ndarray, zlo: np.ndarray, zhi: np.ndarray) -> float:
    p1, p2 = a * zlo, a * zhi
    hi = np.maximum(p1, p2)
    hi[np.isnan(hi)] = 0.0
    return float(hi.sum())


class BoundContext:
    """Relaxation state for one propagation: start box and PWL resolution."""

    def __init__(self, domain: Hyperrect, segments: int):
        if segments < 1:
            raise ValueError("segments must be >= 1")
        self.domain = domain
        self.segments = segments
        self.zlo = domain.lo
        self.zhi = domain.hi
        self.dim = domain.dim
        self._pwl_cache: dict[tuple, PwlBound] = {}

    # -- constructors -------------------------------------------------------

    def const(self, v: float) -> SymScalar:
        z = np.zeros(self.dim)
        return SymScalar(z, v, z, v, (v, v))

    def var(self, j: int) -> SymScalar:
        a = np.zeros(self.dim)
        a[j] = 1.0
        a.flags.writeable = False
        return SymScalar(a, 0.0, a, 0.0,
                         (float(self.zlo[j]), float(self.zhi[j])))

    def make(self, lo_a: np.ndarray, lo_c: float, hi_a: np.ndarray, hi_c: float,
             ivl: tuple[float, float]) -> SymScalar:
        c_lo = lo_c + _dot_min(lo_a, self.zlo, self.zhi)
        c_hi = hi_c + _dot_max(hi_a, self.zlo, self.zhi)
        lo = max(c_lo, ivl[0])
        hi = min(c_hi, ivl[1])
        if lo > hi:  # sound bounds can cross by rounding ulps only
            mid = 0.5 * (lo + hi)
            lo = hi = mid
        return SymScalar(lo_a, lo_c, hi_a, hi_c, (lo, hi))

    # -- exact linear ops ----------------------------------------------------

    def add(self, f: SymScalar, g: SymScalar) -> SymScalar:
        return self.make(f.lo_a + g.lo_a, f.lo_c + g.lo_c,
                         f.hi_a + g.hi_a, f.hi_c + g.hi_c,
                         add_i(f.rng, g.rng))

    def sub(self, f: SymScalar, g: SymScalar) -> SymScalar:
        return self.make(f.lo_a - g.hi_a, f.lo_c - g.hi_c,
                         f.hi_a - g.lo_a, f.hi_c - g.lo_c,
                         sub_i(f.rng, g.rng))

    def scale(self, f: SymScalar, c: float) -> SymScalar:
        if c >= 0:
            return self.make(c * f.lo_a, c * f.lo_c, c * f.hi_a, c * f.hi_c,
                             scale_i(c, f.rng))
        return self.make(c * f.hi_a, c * f.hi_c, c * f.lo_a, c * f.lo_c,
                         scale_i(c, f.rng))

    # -- relaxed nonlinear ops -----------------------------------------------

    def _side(self, f: SymScalar, coef: float, lower: bool) -> tuple[np.ndarray, float]:
        """Affine (a, c) with a.z + c <= coef*value(z) if lower, >= otherwise."""
        use_lo = lower == (coef >= 0)
        if use_lo:
            return coef * f.lo_a, coef * f.lo_c
        return coef * f.hi_a, coef * f.hi_c

    def mul(self, f: SymScalar, g: SymScalar) -> SymScalar:
        pl, pu = f.rng
        ql, qu = g.rng
        pad = PAD_REL * max(1.0, abs(pl), abs(pu), abs(ql), abs(qu))
        ivl = mul_i(f.rng, g.rng)

        def compose(alpha: float, beta: float, gamma: float,
                    lower: bool) -> tuple[np.ndarray, float]:
            a1, c1 = self._side(f, alpha, lower)
            a2, c2 = self._side(g, beta, lower)
            off = gamma - pad if lower else gamma + pad
            return a1 + a2, c1 + c2 + off

        # McCormick: both candidates of each envelope side are sound; keep
        # the one with the tighter concretized bound.
        lo_best: Optional[tuple[np.ndarray, float]] = None
        lo_val = -math.inf
        for alpha, beta, gamma in ((ql, pl, -pl * ql), (qu, pu, -pu * qu)):
            a, c = compose(alpha, beta, gamma, lower=True)
            v = c + _dot_min(a, self.zlo, self.zhi)
            if lo_best is None or v > lo_val:
                lo_best, lo_val = (a, c), v
        hi_best: Optional[tuple[np.ndarray, float]] = None
        hi_val = math.inf
        for alpha, beta, gamma in ((ql, pu, -pu * ql), (qu, pl, -pl * qu)):
            a, c = compose(alpha, beta, gamma, lower=False)
            v = c + _dot_max(a, self.zlo, self.zhi)
            if hi_best is None or v < hi_val:
                hi_best, hi_val = (a, c), v
        return self.make(lo_best[0], lo_best[1], hi_best[0], hi_best[1], ivl)

    def unary(self, f: SymScalar, fn: str) -> SymScalar:
        l, u = f.rng
        ivl = unary_range(fn, l, u)
        func = _PRIMS[fn][0]
        fl, fu = func(l), func(u)
        width = u - l
        if (width <= _POINT_TOL * max(1.0, abs(l), abs(u))
                or not math.isfinite(fl + fu)):
            # point domain or overflow: fall back to constant interval bounds
            lo_c = ivl[0] - PAD_REL * max(1.0, abs(ivl[0])) \
                if math.isfinite(ivl[0]) else ivl[0]
            hi_c = ivl[1] + PAD_REL * max(1.0, abs(ivl[1])) \
                if math.isfinite(ivl[1]) else ivl[1]
            z = np.zeros(self.dim)
            return self.make(z, lo_c, z, hi_c, ivl)
        slope = (fu - fl) / width
        key = (fn, l, u, self.segments)
        pwl = self._pwl_cache.get(key)
        if pwl is None:
            pwl = build_pwl(fn, l, u, self.segments)
            self._pwl_cache[key] = pwl
        b_lo = _offset_below(pwl.lower, slope)
        b_hi = _offset_above(pwl.upper, slope)
        a1, c1 = self._side(f, slope, lower=True)
        a2, c2 = self._side(f, slope, lower=False)
        return self.make(a1, c1 + b_lo, a2, c2 + b_hi, ivl)

    def relu(self, f: SymScalar) -> SymScalar:
        l, u = f.rng
        if l >= 0.0:
            return f
        if u <= 0.0:
            return self.const(0.0)
        pad = PAD_REL * max(1.0, -l, u)
        s = u / (u - l)
        hi_a, hi_c = self._side(f, s, lower=False)
        hi_c = hi_c - s * l + pad
        if u >= -l:  # adaptive lower slope: identity when mostly positive
            lo_a, lo_c = f.lo_a, f.lo_c
        else:
            lo_a, lo_c = np.zeros(self.dim), 0.0
        return self.make(lo_a, lo_c, hi_a, hi_c, (0.0, u))


# ---------------------------------------------------------------------------
# vectorized form for network layers and propagated state
# ---------------------------------------------------------------------------

class SymBatch:
    """A stack of SymScalars sharing one context, stored as matrices."""

    def __init__(self, ctx: BoundContext, lo_A: np.ndarray, lo_c: np.ndarray,
                 hi_A: np.ndarray, hi_c: np.ndarray,
                 rng_lo: np.ndarray, rng_hi: np.ndarray):
        self.ctx = ctx
        self.lo_A, self.lo_c = lo_A, lo_c
        self.hi_A, self.hi_c = hi_A, hi_c
        self.rng_lo, self.rng_hi = rng_lo, rng_hi

    @classmethod
    def identity(cls, ctx: BoundContext) -> "SymBatch":
        eye = np.eye(ctx.dim)
        zero = np.zeros(ctx.dim)
        return cls(ctx, eye, zero.copy(), eye.copy(), zero.copy(),
                   ctx.zlo.copy(), ctx.zhi.copy())

    @classmethod
    def from_scalars(cls, ctx: BoundContext, scalars: list[SymScalar]) -> "SymBatch":
        return cls(
            ctx,
            np.array([s.lo_a for s in scalars]),
            np.array([s.lo_c for s in scalars]),
            np.array([s.hi_a for s in scalars]),
            np.array([s.hi_c for s in scalars]),
            np.array([s.rng[0] for s in scalars]),
            np.array([s.rng[1] for s in scalars]),
        )

    def scalar(self, i: int) -> SymScalar:
        return SymScalar(self.lo_A[i], float(self.lo_c[i]),
                         self.hi_A[i], float(self.hi_c[i]),
                         (float(self.rng_lo[i]), float(self.rng_hi[i])))

    def scalars(self) -> list[SymScalar]:
        return [self.scalar(i) for i in range(self.lo_A.shape[0])]

    def concretize(self) -> Hyperrect:
        return Hyperrect(self.rng_lo.copy(), self.rng_hi.copy())

    def affine(self, W: np.ndarray, b: np.ndarray) -> "SymBatch":
        Wp = np.maximum(W, 0.0)
        Wm = np.minimum(W, 0.0)
        lo_A = Wp @ self.lo_A + Wm @ self.hi_A
        lo_c = Wp @ self.lo_c + Wm @ self.hi_c + b
        hi_A = Wp @ self.hi_A + Wm @ self.lo_A
        hi_c = Wp @ self.hi_c + Wm @ self.lo_c + b
        ivl_lo = Wp @ self.rng_lo + Wm @ self.rng_hi + b
        ivl_hi = Wp @ self.rng_hi + Wm @ self.rng_lo + b
        return self._finish(lo_A, lo_c, hi_A, hi_c, ivl_lo, ivl_hi)

    def relu(self) -> "SymBatch":
        l, u = self.rng_lo, self.rng_hi
        dead = u <= 0.0
        unstable = (~dead) & (l < 0.0)
        lo_A = self.lo_A.copy()
        lo_c = self.lo_c.copy()
        hi_A = self.hi_A.copy()
        hi_c = self.hi_c.copy()
        if np.any(dead):
            lo_A[dead] = 0.0
            lo_c[dead] = 0.0
            hi_A[dead] = 0.0
            hi_c[dead] = 0.0
        if np.any(unstable):
            li, ui = l[unstable], u[unstable]
            s = ui / (ui - li)
            pad = PAD_REL * np.maximum(1.0, np.maximum(-li, ui))
            hi_A[unstable] = s[:, None] * hi_A[unstable]
            hi_c[unstable] = s * hi_c[unstable] - s * li + pad
            drop = unstable.copy()
            drop[unstable] = ui < -li  # adaptive lower slope 0 vs 1
            lo_A[drop] = 0.0
            lo_c[drop] = 0.0
        ivl_lo = np.maximum(l, 0.0)
        ivl_hi = np.maximum(u, 0.0)
        return self._finish(lo_A, lo_c, hi_A, hi_c, ivl_lo, ivl_hi)

    def _finish(self, lo_A, lo_c, hi_A, hi_c, ivl_lo, ivl_hi) -> "SymBatch":
        zlo, zhi = self.ctx.zlo, self.ctx.zhi
        p_lo = np.minimum(lo_A * zlo, lo_A * zhi)
        p_hi = np.maximum(hi_A * zlo, hi_A * zhi)
        p_lo[np.isnan(p_lo)] = 0.0
        p_hi[np.isnan(p_hi)] = 0.0
        c_lo = lo_c + p_lo.sum(axis=1)
        c_hi = hi_c + p_hi.sum(axis=1)
        rng_lo = np.maximum(c_lo, ivl_lo)
        rng_hi = np.minimum(c_hi, ivl_hi)
        crossed = rng_lo > rng_hi
        if np.any(crossed):
            mid = 0.5 * (rng_lo[crossed] + rng_hi[crossed])
            rng_lo[crossed] = mid
            rng_hi[crossed] = mid
        return SymBatch(self.ctx, lo_A, lo_c, hi_A, hi_c, rng_lo, rng_hi)


def propagate_network(net: NeuralNet, batch: SymBatch) -> SymBatch:
    out = batch
    for layer in net.layers:
        out = out.affine(layer.weights, layer.bias)
        if layer.activation == "relu":
            out = out.relu()
    return out


def sym_eval(expr: Expr, ctx: BoundContext, state: list[SymScalar],
             control: Optional[list[SymScalar]]) -> SymScalar:
    """Relaxed evaluation of an expression DAG over symbolic operands."""
    cache: dict[int, SymScalar] = {}

    def ev(e: Expr) -> SymScalar:
        hit = cache.get(id(e))
        if hit is not None:
            return hit
        if isinstance(e, Constant):
            out = ctx.const(e.value)
        elif isinstance(e, StateVar):
            out = state[e.index]
        elif isinstance(e, ControlVar):
            if control is None:
                raise ValueError("expression uses control variables but no "
                                 "control bounds were provided")
            out = control[e.index]
        elif isinstance(e, Sum):
            out = ctx.add(ev(e.left), ev(e.right))
        elif isinstance(e, Difference):
            out = ctx.sub(ev(e.left), ev(e.right))
        elif isinstance(e, Product):
            out = ctx.mul(ev(e.left), ev(e.right))
        elif isinstance(e, Scale):
            out = ctx.scale(ev(e.arg), e.factor)
        elif isinstance(e, Unary):
            out = ctx.unary(ev(e.arg), e.fn)
        else:
            raise TypeError(f"unknown expression node {type(e).__name__}")
        cache[id(e)] = out
        return out

    return ev(expr)
