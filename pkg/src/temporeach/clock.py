"""Clocks for budget accounting.

The scheduler and backend only see ``now()`` plus a work notification
``charge_pass(depth, level)`` that the backend emits after completing one
refinement pass of a depth-``depth`` query. The wall clock ignores the
notification (real time passes by itself); the simulated clock advances by a
cost model amount, which makes every budget decision deterministic and
testable.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Union

__all__ = ["Clock", "WallClock", "SimulatedClock", "CostModel", "load_cost_model"]


class Clock(Protocol):
    def now(self) -> float:
        """Non-decreasing time in seconds."""
        ...

    def charge_pass(self, depth: int, level: int) -> None:
        """Account for one completed refinement pass of a depth-`depth` query."""
        ...


class WallClock:
    """Monotonic wall time; pass notifications are no-ops."""

    def now(self) -> float:
        return time.monotonic()

    def charge_pass(self, depth: int, level: int) -> None:
        pass


@dataclass(frozen=True)
class CostModel:
    """Seconds per (depth, pass level), with an affine default.

    ``cost(depth, level) = base + rate * depth * level`` unless an explicit
    entry overrides that pair.
    """

    base: float = 0.0
    rate: float = 1.0
    entries: dict = field(default_factory=dict)

    def cost(self, depth: int, level: int) -> float:
        override = self.entries.get((depth, level))
        if override is not None:
            return float(override)
        return self.base + self.rate * depth * level

    def query_cost(self, depth: int, levels: int) -> float:
        """Total cost of a full query: all passes 1..levels at this depth."""
        return sum(self.cost(depth, r) for r in range(1, levels + 1))

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "rate": self.rate,
            "entries": [
                {"depth": d, "pass": r, "seconds": s}
                for (d, r), s in sorted(self.entries.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CostModel":
        entries = {}
        for e in doc.get("entries", []):
            entries[(int(e["depth"]), int(e["pass"]))] = float(e["seconds"])
        return cls(base=float(doc.get("base", 0.0)),
                   rate=float(doc.get("rate", 1.0)),
                   entries=entries)


def load_cost_model(path: Union[str, Path]) -> CostModel:
    return CostModel.from_dict(json.loads(Path(path).read_text()))


class SimulatedClock:
    """Deterministic clock driven by a cost model."""

    def __init__(self, model: CostModel):
        self.model = model
        self._t = 0.0

    def now(self) -> float:
        return self._t

    def charge_pass(self, depth: int, level: int) -> None:
        self._t += self.model.cost(depth, level)

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot move a clock backwards")
        self._t += seconds
