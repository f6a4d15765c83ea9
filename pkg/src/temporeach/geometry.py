"""Axis-aligned hyperrectangles and the set measures used by every other module."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = ["Hyperrect", "hull", "intersect"]


@dataclass(frozen=True, eq=False)
class Hyperrect:
    """Closed box ``[lo[i], hi[i]]`` for each axis ``i`` in R^d.

    Boxes are closed on both ends: boundary points count as contained, so
    sampled trajectories landing exactly on a face are never flagged as
    violations. Empty boxes cannot be constructed; operations that may
    produce an empty result (see :func:`intersect`) return ``None`` instead.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.size == 0:
            raise ValueError("box must have dimension >= 1")
        if lo.shape != hi.shape:
            raise ValueError(f"lo/hi length mismatch: {lo.size} vs {hi.size}")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("box bounds must not be NaN")
        if np.any(lo > hi):
            axis = int(np.argmax(lo > hi))
            raise ValueError(
                f"inverted bounds on axis {axis}: lo={lo[axis]} > hi={hi[axis]}"
            )
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def volume(self) -> float:
        """Product of side lengths; 0 iff some side is degenerate."""
        return float(np.prod(self.widths))

    def radius_sum(self) -> float:
        """Sum over axes of half the side length."""
        return float(np.sum(self.widths) * 0.5)

    def contains(self, x: Sequence[float]) -> bool:
        """Closed-box membership test."""
        p = np.asarray(x, dtype=float).reshape(-1)
        if p.size != self.dim:
            raise ValueError(f"point dimension {p.size} != box dimension {self.dim}")
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (N, d) array; returns an (N,) bool mask."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"expected (N, {self.dim}) array, got {pts.shape}")
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def contains_box(self, other: "Hyperrect") -> bool:
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return bool(np.all(other.lo >= self.lo) and np.all(other.hi <= self.hi))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperrect":
        return cls(d["lo"], d["hi"])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Hyperrect):
            return NotImplemented
        return bool(
            self.dim == other.dim
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __hash__(self) -> int:
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self) -> str:
        sides = " x ".join(f"[{a:g}, {b:g}]" for a, b in zip(self.lo, self.hi))
        return f"Hyperrect({sides})"


def hull(points: Iterable[Sequence[float]]) -> Hyperrect:
    """Tightest box containing every point (per-axis min/max)."""
    arr = np.asarray(list(points) if not isinstance(points, np.ndarray) else points,
                     dtype=float)
    if arr.size == 0:
        raise ValueError("hull of an empty point set is undefined")
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected (N, d) points, got shape {arr.shape}")
    return Hyperrect(arr.min(axis=0), arr.max(axis=0))


def intersect(a: Hyperrect, b: Hyperrect) -> Optional[Hyperrect]:
    """Per-axis max(lo)/min(hi); ``None`` if any axis inverts (empty)."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    if np.any(lo > hi):
        return None
    return Hyperrect(lo, hi)
