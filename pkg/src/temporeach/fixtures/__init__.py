"""Built-in benchmark systems with hand-constructed ReLU controllers.

Four closed loops ship with the package, sized like the standard benchmark
families for neural-feedback-loop reachability:

* ``pendulum`` -- 2 states, torque controller with 2 hidden layers x 25
* ``tora``     -- 4 states, controller with 3 hidden layers x 25
* ``car_c1``   -- 4-state unicycle, controller with 1 hidden layer x 100
* ``car_c2``   -- same dynamics, controller with 1 hidden layer x 200

Each fixture is a pair of JSON files (system + controller weights) in
``data/`` using the same formats the CLI accepts, so they double as format
examples.
"""

from __future__ import annotations

from pathlib import Path

from ..model import SystemSpec, load_system

__all__ = ["names", "path", "load"]

_DATA_DIR = Path(__file__).parent / "data"
_NAMES = ("pendulum", "tora", "car_c1", "car_c2")


def names() -> tuple[str, ...]:
    return _NAMES


def path(name: str) -> Path:
    if name not in _NAMES:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(_NAMES)}")
    return _DATA_DIR / f"{name}.json"


def load(name: str) -> SystemSpec:
    return load_system(path(name))
