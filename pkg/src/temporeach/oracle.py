"""Monte-Carlo ground truth: sampled hulls, error metrics, soundness audits.

The true reachable set cannot be computed, so error is measured against the
hyperrectangular hull of sampled trajectories, which underapproximates the
true set. For a sound backend both error ratios are therefore >= 1.

Sampling uses numpy's PCG64 generator (named, portable, seedable). Hulls are
per-axis min/max reductions, so they are order-independent, and the first N
rows of a larger draw from the same seed equal the N-row draw, which gives
prefix monotonicity of hulls in the sample count.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from .geometry import Hyperrect
from .model import SystemSpec, step_batch

__all__ = [
    "ErrorMetric",
    "ErrorReport",
    "sample_hulls",
    "error_total",
    "error_per_step",
    "audit_soundness",
    "evaluate_run",
]


class ErrorMetric(Enum):
    VOLUME = "volume"
    RADIUS_SUM = "radius_sum"


def _measure(box: Hyperrect, metric: ErrorMetric) -> float:
    if metric == ErrorMetric.VOLUME:
        return box.volume()
    return box.radius_sum()


def _rollout(sys: SystemSpec, x0: Hyperrect, n: int, num_samples: int,
             seed: int) -> Iterator[np.ndarray]:
    """Yield the (N, d) state batch after each of n closed-loop steps."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(x0.lo, x0.hi, size=(num_samples, x0.dim))
    for _ in range(n):
        x = step_batch(sys, x)
        yield x


def sample_hulls(sys: SystemSpec, x0: Hyperrect, n: int, num_samples: int,
                 seed: int) -> list[Hyperrect]:
    """Per-step hulls of ``num_samples`` trajectories started uniformly in x0."""
    if num_samples < 1:
        raise ValueError("need at least one sample")
    if n < 1:
        raise ValueError("need at least one step")
    hulls = []
    for x in _rollout(sys, x0, n, num_samples, seed):
        hulls.append(Hyperrect(x.min(axis=0), x.max(axis=0)))
    return hulls


def error_total(approx: Sequence[Hyperrect], hulls: Sequence[Hyperrect],
                metric: ErrorMetric) -> float:
    """Ratio of summed set measures over the horizon."""
    if len(approx) != len(hulls):
        raise ValueError(f"length mismatch: {len(approx)} vs {len(hulls)}")
    if not approx:
        raise ValueError("empty horizon")
    num = sum(_measure(b, metric) for b in approx)
    den = sum(_measure(b, metric) for b in hulls)
    if den == 0.0:
        raise ValueError("all reference hulls are degenerate under this metric")
    return num / den


def error_per_step(approx_t: Hyperrect, hull_t: Hyperrect,
                   metric: ErrorMetric) -> float:
    return error_total([approx_t], [hull_t], metric)


def audit_soundness(sys: SystemSpec, x0: Hyperrect, sets: Sequence[Hyperrect],
                    num_samples: int, seed: int) -> list[tuple[int, int]]:
    """Simulate seeded trajectories; report (sample, t) pairs that escape.

    An empty list certifies the audit; t is 1-based to match the set index.
    """
    if num_samples == 0:
        return []
    violations: list[tuple[int, int]] = []
    for t, x in enumerate(_rollout(sys, x0, len(sets), num_samples, seed), start=1):
        inside = sets[t - 1].contains_points(x)
        for i in np.nonzero(~inside)[0]:
            violations.append((int(i), t))
    return violations


@dataclass(frozen=True)
class ErrorReport:
    """Both total error ratios plus per-step volume errors for one run."""

    e_total_volume: float
    e_total_radius: float
    per_step_e: tuple[float, ...]
    n: int
    samples: int
    seed: int


def evaluate_run(sys: SystemSpec, x0: Hyperrect, sets: Sequence[Hyperrect],
                 num_samples: int, seed: int) -> ErrorReport:
    """Score computed sets against freshly sampled hulls."""
    hulls = sample_hulls(sys, x0, len(sets), num_samples, seed)
    per_step = tuple(
        error_per_step(a, h, ErrorMetric.VOLUME) for a, h in zip(sets, hulls))
    return ErrorReport(
        e_total_volume=error_total(sets, hulls, ErrorMetric.VOLUME),
        e_total_radius=error_total(sets, hulls, ErrorMetric.RADIUS_SUM),
        per_step_e=per_step,
        n=len(sets),
        samples=num_samples,
        seed=seed,
    )
