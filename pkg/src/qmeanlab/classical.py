"""Classical sampling baselines: empirical mean and median-of-means.

These run against the same random variables as the quantum estimators and
charge every draw to the ledger, so error-per-budget comparisons are direct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qmeanlab.oracles import CostLedger
from qmeanlab.probspace import RandomVariable

__all__ = [
    "SampleBatch",
    "sample",
    "empirical_mean",
    "coordinate_median",
    "median_of_means",
    "subgaussian_groups",
    "subgaussian_estimate",
]


@dataclass(frozen=True)
class SampleBatch:
    """i.i.d. draws from a random variable; ``seed`` is informational."""

    draws: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        draws.flags.writeable = False
        object.__setattr__(self, "draws", draws)

    @property
    def count(self) -> int:
        return self.draws.shape[0]


def sample(
    rv: RandomVariable,
    count: int,
    rng: np.random.Generator,
    ledger: CostLedger | None = None,
    seed: int | None = None,
) -> SampleBatch:
    """Draw ``count`` i.i.d. outcomes; charges ``count`` classical samples."""
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    idx = rng.choice(rv.size, size=count, p=rv.prob)
    if ledger is not None:
        ledger.charge(classical_samples=float(count))
    return SampleBatch(draws=rv.values[idx], seed=seed)


def _shifted_mean(rows: np.ndarray) -> np.ndarray:
    # mean computed against the first row as origin: exact (not just close)
    # when all rows coincide, which degenerate distributions rely on
    return rows[0] + (rows - rows[0]).mean(axis=0)


def empirical_mean(batch: SampleBatch) -> np.ndarray:
    if batch.count == 0:
        raise ValueError("empty batch")
    return _shifted_mean(batch.draws)


def coordinate_median(estimates) -> np.ndarray:
    """Per coordinate, the ceil(r/2)-th smallest of r values (lower median)."""
    arr = np.atleast_2d(np.asarray(estimates, dtype=float))
    r = arr.shape[0]
    if r == 0:
        raise ValueError("empty estimate list")
    return np.sort(arr, axis=0)[(r - 1) // 2]


def median_of_means(batch: SampleBatch, groups: int) -> np.ndarray:
    """Coordinate-wise median of contiguous-block means.

    Blocks have size count // groups; the remainder is appended to the last
    block.  Fixed grouping keeps the output deterministic given the batch.
    """
    if groups < 1:
        raise ValueError(f"groups must be at least 1, got {groups}")
    if groups > batch.count:
        raise ValueError(f"groups={groups} exceeds the batch size {batch.count}")
    block = batch.count // groups
    means = np.empty((groups, batch.draws.shape[1]))
    for g in range(groups):
        stop = (g + 1) * block if g < groups - 1 else batch.count
        means[g] = _shifted_mean(batch.draws[g * block : stop])
    return coordinate_median(means)


def subgaussian_groups(n: int, delta: float) -> int:
    """Group count for the sub-Gaussian baseline: 8*ceil(log2(2/delta)).

    Clamped into [1, n] so the grouping is always feasible; delta >= 1 (a
    vacuous failure budget) degenerates to a single group, i.e. the plain
    empirical mean.
    """
    if delta >= 1.0:
        return 1
    return max(1, min(8 * math.ceil(math.log2(2.0 / delta)), n))


def subgaussian_estimate(
    rv: RandomVariable,
    n: int,
    delta: float,
    rng: np.random.Generator,
    ledger: CostLedger | None = None,
) -> tuple[np.ndarray, SampleBatch]:
    """Median-of-means baseline: draws exactly n samples, returns (estimate, batch)."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    needed = max(1, math.ceil(math.log2(1.0 / delta))) if delta < 1 else 1
    if n < needed:
        raise ValueError(f"n={n} is below ceil(log2(1/delta)) = {needed}")
    batch = sample(rv, n, rng, ledger)
    return median_of_means(batch, subgaussian_groups(n, delta)), batch
