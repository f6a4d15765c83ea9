"""Budgeted temporal refinement: the driver loop and its step calculator.

The driver starts in a "search" phase, issuing symbolic queries of growing
depth from the initial set while the remaining budget is predicted to cover
finishing the horizon. It then switches to a "jump" phase that covers the
rest of the horizon in near-equal symbolic jumps, shrinking the jump size
when a query hits its early-stopping timeout.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional

from .bounder import BoundPropagationBackend, Query, QueryData, set_timeout
from .clock import Clock, WallClock
from .geometry import Hyperrect

__all__ = [
    "Phase",
    "ScheduleRecord",
    "calc_steps",
    "refined_reach",
    "fixed_schedule_reach",
    "schedule_to_json",
    "schedule_from_json",
]


class Phase(str, Enum):
    SEARCH = "search"
    JUMP = "jump"


@dataclass(frozen=True)
class ScheduleRecord:
    """One issued query: phase at execution time, start index, depth,
    resulting status, seconds charged against the budget, and the budget
    before the query started."""

    phase: str
    t_start: int
    depth: int
    status: str
    elapsed: float
    budget_before: float

    def pushed_times(self) -> list[int]:
        if self.phase == Phase.SEARCH.value:
            return [self.t_start + self.depth]
        return list(range(self.t_start + 1, self.t_start + self.depth + 1))


def schedule_to_json(log: list[ScheduleRecord]) -> str:
    return json.dumps([asdict(r) for r in log], indent=2)


def schedule_from_json(text: str) -> list[ScheduleRecord]:
    return [ScheduleRecord(**entry) for entry in json.loads(text)]


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def calc_steps(t_start: int, b_steps: int, b: float, data: QueryData,
               t_est: float, n: int, phase: Phase, status) -> tuple[int, Phase, float]:
    """Choose the next temporal depth and phase.

    Updates the conservative per-step time estimate from the latest query,
    then either keeps searching (depth + 1) while ``n * t_est < b`` predicts
    the whole horizon still fits, or switches to the jump phase with jumps
    equalized over the remaining steps. An early-stopped query switches to
    (or shrinks within) the jump phase immediately.
    """
    status_value = getattr(status, "value", status)
    t_cur = t_start + b_steps
    if t_cur not in data:
        raise KeyError(f"no timing record for end time {t_cur}")
    record = data[t_cur]
    t_est = max(t_est, record.time / record.steps)

    if phase == Phase.SEARCH:
        if status_value == "nominal":
            if n * t_est < b:
                return b_steps + 1, Phase.SEARCH, t_est
            s_left = n - b_steps
            if s_left <= 0:
                # horizon already reached; depth placeholder gets clamped away
                return 1, Phase.JUMP, t_est
            num_jumps = _ceil_div(s_left, b_steps)
            return _ceil_div(s_left, num_jumps), Phase.JUMP, t_est
        s_left = n - b_steps
        if s_left <= 0:
            return 1, Phase.JUMP, t_est
        num_jumps = _ceil_div(s_left, max(b_steps - 1, 1))
        return _ceil_div(s_left, num_jumps), Phase.JUMP, t_est

    if status_value == "stopped_early":
        return max(b_steps - 1, 1), Phase.JUMP, t_est
    return b_steps, Phase.JUMP, t_est


def refined_reach(q: Query, x0: Hyperrect, b: float,
                  backend=None, clock: Optional[Clock] = None
                  ) -> tuple[list[Hyperrect], list[ScheduleRecord]]:
    """Compute sets for times 1..q.n under an approximate budget of ``b``
    seconds; returns the (time-indexed, position i holds time i+1) sets and
    the schedule log."""
    if backend is None:
        backend = BoundPropagationBackend()
    if clock is None:
        clock = WallClock()
    n = q.n
    if n < 1:
        raise ValueError("horizon n must be >= 1")
    if not b > 0:
        raise ValueError("budget must be > 0")

    set_timeout(q, b)
    phase = Phase.SEARCH
    b_steps = 1
    t_start = 0
    t_cur = 0
    x_start = x0
    sets: list[Optional[Hyperrect]] = [None] * (n + 1)  # index by time step
    t_est = 0.0
    log: list[ScheduleRecord] = []
    mark = clock.now()

    while t_cur < n:
        q.h = b_steps
        budget_before = b
        data, r_out = backend.symbolic_reach(q, x_start, t_start, clock)
        if phase == Phase.SEARCH:
            sets[t_start + b_steps] = r_out[-1]
        else:
            for k, box in enumerate(r_out, start=1):
                sets[t_start + k] = box
        t_cur = t_start + b_steps
        now = clock.now()
        b -= now - mark
        query_status = backend.status(q)
        log.append(ScheduleRecord(
            phase=phase.value, t_start=t_start, depth=b_steps,
            status=query_status.value, elapsed=now - mark,
            budget_before=budget_before,
        ))
        mark = now
        b_steps0, new_phase, t_est = calc_steps(
            t_start, b_steps, b, data, t_est, n, phase, query_status)
        if new_phase == Phase.JUMP:
            t_start = t_start + b_steps
            x_start = sets[t_start]
        phase = new_phase
        b_steps = min(b_steps0, n - t_start)
        set_timeout(q, max(b, 0.0))

    assert all(s is not None for s in sets[1:])
    return list(sets[1:]), log


def fixed_schedule_reach(q: Query, x0: Hyperrect, depths: list[int],
                         backend=None, clock: Optional[Clock] = None
                         ) -> tuple[list[Hyperrect], list[ScheduleRecord]]:
    """Run a user-supplied sequence of symbolic depths covering 1..q.n.

    This is the hand-tuned/naive baseline driver: no budget, no timeouts,
    every query pushes all of its sets. ``depths`` must sum to the horizon.
    """
    if backend is None:
        backend = BoundPropagationBackend()
    if clock is None:
        clock = WallClock()
    n = q.n
    if any(d < 1 for d in depths):
        raise ValueError("all schedule depths must be >= 1")
    if sum(depths) != n:
        raise ValueError(f"schedule depths sum to {sum(depths)}, horizon is {n}")

    set_timeout(q, math.inf)
    sets: list[Optional[Hyperrect]] = [None] * (n + 1)
    log: list[ScheduleRecord] = []
    t_start = 0
    x_start = x0
    mark = clock.now()
    for depth in depths:
        q.h = depth
        data, r_out = backend.symbolic_reach(q, x_start, t_start, clock)
        for k, box in enumerate(r_out, start=1):
            sets[t_start + k] = box
        now = clock.now()
        log.append(ScheduleRecord(
            phase="fixed", t_start=t_start, depth=depth,
            status=backend.status(q).value, elapsed=now - mark,
            budget_before=math.inf,
        ))
        mark = now
        t_start += depth
        x_start = sets[t_start]
    return list(sets[1:]), log
