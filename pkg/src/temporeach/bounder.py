"""Anytime symbolic reachability backend.

A depth-h query composes h copies of the closed loop inside one affine-bound
propagation: symbolic bounds stay expressed in the coordinates of the start
box and are concretized to a hyperrectangle only when a set is emitted. The
query runs a coarse-to-fine schedule of refinement passes (the PWL piece
count roughly doubles between passes); passes only ever intersect into the running
result, so the first completed pass already gives a sound answer and later
passes can be cut off by the timeout without losing soundness.

Every emitted set is additionally intersected with a chained one-step ("fully
concrete") image computed from the previous emitted set, so a symbolic query
can never be looser than the chain of concrete queries it replaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .clock import Clock, WallClock
from .geometry import Hyperrect, intersect
from .intervals import interval_eval  # re-exported as part of the backend API
from .model import NeuralNet, SystemSpec
from .relaxation import BoundContext, SymBatch, propagate_network, sym_eval

__all__ = [
    "Query",
    "QueryStatus",
    "QueryTiming",
    "QueryData",
    "symbolic_reach",
    "status",
    "set_timeout",
    "network_bounds",
    "interval_eval",
    "refinement_schedule",
    "BoundPropagationBackend",
]


class QueryStatus(Enum):
    NOMINAL = "nominal"
    STOPPED_EARLY = "stopped_early"


@dataclass(frozen=True)
class QueryTiming:
    time: float
    steps: int


QueryData = dict[int, QueryTiming]


@dataclass
class Query:
    """Mutable query object owned by a single scheduler run.

    ``h`` is the temporal depth of the next call, ``n`` the final horizon.
    ``refine_levels`` and ``pwl_segments`` control the anytime refinement
    schedule; ``intermediate_mode`` chooses how sets strictly before depth h
    are produced ("concrete" chains one-step images, "symbolic" concretizes
    the composed propagation at every step as well).
    """

    system: SystemSpec
    n: int
    h: int = 1
    timeout: float = math.inf
    refine_levels: int = 2
    pwl_segments: int = 8
    intermediate_mode: str = "concrete"
    _last_status: Optional[QueryStatus] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("horizon n must be >= 1")
        if self.refine_levels < 1:
            raise ValueError("refine_levels must be >= 1")
        if self.pwl_segments < 1:
            raise ValueError("pwl_segments must be >= 1")
        if self.intermediate_mode not in ("concrete", "symbolic"):
            raise ValueError(f"unknown intermediate_mode {self.intermediate_mode!r}")
        if self.timeout < 0:
            raise ValueError("timeout must be >= 0")


def set_timeout(q: Query, seconds: float) -> None:
    """Subsequent symbolic_reach calls early-stop once ``seconds`` elapse."""
    if seconds < 0:
        raise ValueError("timeout must be >= 0")
    q.timeout = float(seconds)


def status(q: Query) -> QueryStatus:
    """Status of the most recent symbolic_reach call on this query."""
    if q._last_status is None:
        raise RuntimeError("status queried before any symbolic_reach call")
    return q._last_status


def refinement_schedule(pwl_segments: int, refine_levels: int) -> list[int]:
    """Coarse-to-fine PWL piece counts: the halving chain ending at
    ``pwl_segments``, truncated to its ``refine_levels`` finest entries.

    Runs with a larger ``pwl_segments`` and enough levels execute a superset
    of the passes of a coarser run (identical prefix plus extra refinement),
    which is what makes "more segments never looser" hold by construction.
    """
    chain = [pwl_segments]
    while chain[-1] > 1:
        chain.append(chain[-1] // 2)
    chain.reverse()
    return chain[-refine_levels:] if refine_levels < len(chain) else chain


def _step_state(ctx: BoundContext, sys: SystemSpec, state: SymBatch) -> SymBatch:
    """Push symbolic state through one copy of the closed loop."""
    control = None
    if sys.control_dim:
        control = propagate_network(sys.controller, state).scalars()
    scalars = state.scalars()
    outs = [sym_eval(e, ctx, scalars, control) for e in sys.update]
    return SymBatch.from_scalars(ctx, outs)


def _one_step_box(sys: SystemSpec, box: Hyperrect, segments: int) -> Hyperrect:
    """Concrete query: one closed-loop image of a box, freshly concretized."""
    ctx = BoundContext(box, segments)
    return _step_state(ctx, sys, SymBatch.identity(ctx)).concretize()


def _meet(a: Optional[Hyperrect], b: Hyperrect) -> Hyperrect:
    """Intersection of two sound enclosures; never empty beyond rounding."""
    if a is None:
        return b
    out = intersect(a, b)
    if out is not None:
        return out
    # both contain the true set, so any crossing is a rounding ulp: collapse
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    mid = 0.5 * (lo + hi)
    return Hyperrect(np.minimum(lo, mid), np.maximum(hi, mid))


def _run_pass(q: Query, x_start: Hyperrect, seg: int, completed_segs: list[int],
              cur: list[Optional[Hyperrect]], clock: Clock, t_begin: float,
              abortable: bool) -> bool:
    """One refinement pass over all h steps; returns False if aborted.

    For each step k this computes the composed symbolic set and the chained
    concrete image of the (already refined) set at k-1, and intersects both
    into ``cur``. ``completed_segs`` includes ``seg`` so the chain at the
    final pass equals the chain a sequence of one-step queries would build.
    """
    sys = q.system
    ctx = BoundContext(x_start, seg)
    state = SymBatch.identity(ctx)
    for k in range(1, q.h + 1):
        if abortable and clock.now() - t_begin > q.timeout:
            return False
        state = _step_state(ctx, sys, state)
        prev_box = cur[k - 2] if k >= 2 else x_start
        box = None
        for s in completed_segs:
            box = _meet(box, _one_step_box(sys, prev_box, s))
        if q.intermediate_mode == "symbolic" or k == q.h:
            box = _meet(box, state.concretize())
        cur[k - 1] = _meet(cur[k - 1], box)
    return True


def symbolic_reach(q: Query, x_start: Hyperrect, t_start: int = 0,
                   clock: Optional[Clock] = None
                   ) -> tuple[QueryData, list[Hyperrect]]:
    """Sound reachable sets for absolute times t_start+1 .. t_start+q.h.

    Entry k (1-based) overapproximates the image of ``x_start`` under k
    closed-loop steps. The returned QueryData records the call's elapsed
    time under key ``t_start + q.h``.
    """
    if clock is None:
        clock = WallClock()
    if x_start.dim != q.system.state_dim:
        raise ValueError("x_start dimension does not match the system")
    if not 1 <= q.h <= q.n - t_start:
        raise ValueError(
            f"temporal depth h={q.h} outside [1, n - t_start = {q.n - t_start}]")

    t_begin = clock.now()
    schedule = refinement_schedule(q.pwl_segments, q.refine_levels)
    best: list[Optional[Hyperrect]] = [None] * q.h
    result_status = QueryStatus.NOMINAL
    for idx, seg in enumerate(schedule, start=1):
        cur = list(best)
        finished = _run_pass(q, x_start, seg, schedule[:idx], cur, clock,
                             t_begin, abortable=idx > 1)
        if not finished:
            result_status = QueryStatus.STOPPED_EARLY
            break
        best = cur
        clock.charge_pass(q.h, idx)
        if idx < len(schedule) and clock.now() - t_begin > q.timeout:
            result_status = QueryStatus.STOPPED_EARLY
            break

    q._last_status = result_status
    elapsed = clock.now() - t_begin
    data: QueryData = {t_start + q.h: QueryTiming(time=elapsed, steps=q.h)}
    return data, list(best)


def network_bounds(net: NeuralNet, box: Hyperrect) -> Hyperrect:
    """Box enclosing ``{net(x) : x in box}`` by affine bound propagation
    intersected with plain interval propagation."""
    if box.dim != net.input_dim:
        raise ValueError(f"box dimension {box.dim} != network input "
                         f"{net.input_dim}")
    ctx = BoundContext(box, segments=1)
    return propagate_network(net, SymBatch.identity(ctx)).concretize()


class BoundPropagationBackend:
    """The default backend satisfying the scheduler's contract."""

    def symbolic_reach(self, q: Query, x_start: Hyperrect, t_start: int,
                       clock: Clock) -> tuple[QueryData, list[Hyperrect]]:
        return symbolic_reach(q, x_start, t_start, clock)

    def status(self, q: Query) -> QueryStatus:
        return status(q)
