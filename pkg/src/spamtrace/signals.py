"""The nine per-product, per-window indicative signals.

Ratios and entropies are ``None`` (absent) when their denominator is
undefined, never zero: a silent product is not a maximally suspicious one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, astuple, fields
from typing import Optional, Sequence

import numpy as np

from .ingest import SECONDS_PER_DAY

SIGNALS = (
    "avg_rating",
    "num_reviews",
    "num_pos",
    "num_neg",
    "rating_entropy",
    "ratio_singletons",
    "ratio_first_timers",
    "youth_score",
    "gap_entropy",
)

# direction in which a move is suspicious
SUSPICIOUS_DIRECTION = {
    "avg_rating": "change",
    "num_reviews": "increase",
    "num_pos": "increase",
    "num_neg": "increase",
    "rating_entropy": "decrease",
    "ratio_singletons": "increase",
    "ratio_first_timers": "increase",
    "youth_score": "increase",
    "gap_entropy": "decrease",
}

MAX_RATING_ENTROPY = math.log2(5)


@dataclass(frozen=True)
class SignalVector:
    avg_rating: Optional[float]
    num_reviews: int
    num_pos: int
    num_neg: int
    rating_entropy: Optional[float]
    ratio_singletons: Optional[float]
    ratio_first_timers: Optional[float]
    youth_score: Optional[float]
    gap_entropy: Optional[float]

    def values(self) -> tuple:
        return astuple(self)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ProductCumulativeState:
    cumulative_rating_sum: float = 0.0
    cumulative_review_count: int = 0
    last_review_timestamp_in_window: Optional[int] = None

    @property
    def average_rating(self) -> Optional[float]:
        if self.cumulative_review_count == 0:
            return None
        return self.cumulative_rating_sum / self.cumulative_review_count


def _entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    p = counts[counts > 0] / total
    h = -float(np.sum(p * np.log2(p)))
    return h if h > 0 else 0.0


def rating_entropy(counts: Sequence[int]) -> float:
    """Base-2 entropy of the rating histogram (counts for ratings 1..5)."""
    if len(counts) != 5:
        raise ValueError("expected counts for ratings 1..5")
    if sum(counts) <= 0:
        raise ValueError("rating entropy of an empty window is undefined")
    return _entropy(counts)


def youth_score(ages: Sequence[float], delta_t: float) -> float:
    """Mean of ``2 * (1 - sigmoid(age / delta_t))`` over reviews.

    Ages are in seconds; dividing by the window length keeps the sigmoid from
    saturating on raw seconds (one window old gives ~0.54).
    """
    if len(ages) == 0:
        raise ValueError("youth score of an empty window is undefined")
    a = np.asarray(ages, dtype=float) / float(delta_t)
    # 2 * (1 - 1/(1+exp(-a))) == 2 * exp(-a)/(1+exp(-a)) == 2 / (1 + exp(a))
    return float(np.mean(2.0 / (1.0 + np.exp(np.minimum(a, 700.0)))))


def gap_bin_count(delta_t: float) -> int:
    """Number of logarithmic gap bins for a window of ``delta_t`` seconds."""
    days = delta_t / SECONDS_PER_DAY
    if days <= 1:
        return 1
    return math.ceil(math.log2(days)) + 1


def gap_bin_edges(delta_t: float) -> list[int]:
    """Lower edges (in days) of the logarithmic gap bins: 0, 1, 2, 4, ..."""
    return [0] + [2 ** (b - 1) for b in range(1, gap_bin_count(delta_t))]


def gap_bins(gap_days: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin index per gap: 0 for 0 days, b >= 1 for days in [2**(b-1), 2**b)."""
    gap_days = np.asarray(gap_days, dtype=np.int64)
    idx = np.zeros(gap_days.shape, dtype=np.int64)
    pos = gap_days > 0
    # floor(log2(d)) + 1 via bit length, exact for integers
    idx[pos] = np.array([int(d).bit_length() for d in gap_days[pos]], dtype=np.int64)
    return np.minimum(idx, n_bins - 1)


def gap_entropy(timestamps: Sequence[int], delta_t: float) -> float:
    """Entropy of log-binned day gaps between consecutive reviews.

    Gaps are floored to whole days, so sub-day gaps land in bin 0.
    """
    if len(timestamps) < 2:
        raise ValueError("gap entropy needs at least two reviews")
    ts = np.sort(np.asarray(timestamps, dtype=np.int64))
    gap_days = np.diff(ts) // SECONDS_PER_DAY
    n_bins = gap_bin_count(delta_t)
    counts = np.bincount(gap_bins(gap_days, n_bins), minlength=n_bins)
    return _entropy(counts)


def max_gap_entropy(delta_t: float) -> float:
    return math.log2(gap_bin_count(delta_t))


def close_window(product_state: ProductCumulativeState, window_reviews, user_stats, ages, delta_t) -> SignalVector:
    """Compute the signal vector of one (product, window) and fold the
    window's ratings into the cumulative state.

    ``window_reviews`` are this window's ReviewUnits for the product,
    ``user_stats`` the registry's (singleton_count, first_timer_count) for the
    same key and ``ages`` the reviewers' account ages in seconds, one per review.
    """
    n = len(window_reviews)
    if n == 0:
        product_state.last_review_timestamp_in_window = None
        return SignalVector(product_state.average_rating, 0, 0, 0, None, None, None, None, None)

    counts = [0, 0, 0, 0, 0]
    rating_sum = 0
    for rv in window_reviews:
        counts[rv.rating - 1] += 1
        rating_sum += rv.rating
    product_state.cumulative_rating_sum += rating_sum
    product_state.cumulative_review_count += n
    product_state.last_review_timestamp_in_window = max(rv.timestamp for rv in window_reviews)

    singles, first_timers = user_stats
    gap = None
    if n >= 2:
        gap = gap_entropy([rv.timestamp for rv in window_reviews], delta_t)
    return SignalVector(
        avg_rating=product_state.average_rating,
        num_reviews=n,
        num_pos=counts[3] + counts[4],
        num_neg=counts[0] + counts[1],
        rating_entropy=_entropy(counts),
        ratio_singletons=singles / n,
        ratio_first_timers=first_timers / n,
        youth_score=youth_score(ages, delta_t),
        gap_entropy=gap,
    )
