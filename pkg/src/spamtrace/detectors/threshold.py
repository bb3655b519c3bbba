"""Score distributions and the distribution-free Cantelli threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Optional


@dataclass
class ScoreDistribution:
    """Running count, mean and second central moment (Welford)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, s: float) -> None:
        self.count += 1
        d = s - self.mean
        self.mean += d / self.count
        self.m2 += d * (s - self.mean)

    def merge(self, other: "ScoreDistribution") -> None:
        """Chan et al. parallel combination of two running moments."""
        if other.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return
        n = self.count + other.count
        d = other.mean - self.mean
        self.mean += d * other.count / n
        self.m2 += other.m2 + d * d * self.count * other.count / n
        self.count = n

    @property
    def variance(self) -> float:
        # population variance: Cantelli is stated for the true second moment
        return self.m2 / self.count if self.count else 0.0

    @property
    def std(self) -> float:
        return math.sqrt(max(self.variance, 0.0))


def threshold_update(dist: ScoreDistribution, s: float) -> ScoreDistribution:
    if not math.isfinite(s) or s < 0:
        raise ValueError(f"scores must be finite and non-negative, got {s}")
    dist.add(s)
    return dist


def cantelli_threshold(dist: ScoreDistribution, eta: float, min_samples: int = 2) -> Optional[float]:
    """``mean + std * sqrt((1 - eta) / eta)``, so that P(S >= delta) <= eta.

    Returns None while the distribution has fewer than ``min_samples``
    observations (no threshold yet, nothing may be flagged).
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must be in (0, 1)")
    if dist.count < max(2, min_samples):
        return None
    return dist.mean + dist.std * math.sqrt((1.0 - eta) / eta)


class PooledThresholds:
    """One score distribution per key, shared by all products.

    Scores produced while a window is being processed are staged and merged
    at the window barrier (:meth:`commit`), so thresholds read during window
    t reflect scores up to window t-1 regardless of product order.
    """

    def __init__(self, eta: float, min_samples: int = 30):
        self.eta = eta
        self.min_samples = min_samples
        self.dists: dict[Hashable, ScoreDistribution] = {}
        self._staged: dict[Hashable, ScoreDistribution] = {}
        self._cache: dict[Hashable, Optional[float]] = {}

    def threshold(self, key) -> Optional[float]:
        if key in self._cache:
            return self._cache[key]
        dist = self.dists.get(key)
        delta = None if dist is None else cantelli_threshold(dist, self.eta, self.min_samples)
        self._cache[key] = delta
        return delta

    def stage(self, key, s: float) -> None:
        threshold_update(self._staged.setdefault(key, ScoreDistribution()), s)

    def stage_many(self, key, scores: Iterable[float]) -> None:
        for s in scores:
            self.stage(key, s)

    def commit(self) -> None:
        for key, staged in self._staged.items():
            self.dists.setdefault(key, ScoreDistribution()).merge(staged)
        self._staged.clear()
        self._cache.clear()
