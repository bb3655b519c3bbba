"""Two-sided CUSUM for the cumulative average rating lead.

The cumulative average drifts slowly by construction (it converges as
reviews accumulate, and organic quality trends bend it gradually), so the
recursion runs on its per-window increments: the reference mean ``mu`` is
the running mean increment and each deviation is measured in units of
``sigma``, the running standard deviation of increments, with allowance
``kappa``. Both are exponentially discounted (``discount`` = 0 gives plain
running moments): the increments of a cumulative average shrink roughly
like 1/N, so the scale must follow recent windows. A slow trend is absorbed into ``mu``; an abrupt jump of the level,
or a sustained change of its slope, accumulates in ``G+`` / ``G-``.

Standardizing makes scores of products with very different volumes
comparable, which matters because one threshold is shared by all products.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional


# smallest increment scale worth reacting to, in rating units
MIN_SIGMA = 1e-3


class CusumResult(NamedTuple):
    score: float
    change: bool


class Cusum:
    def __init__(self, kappa: float = 0.5, discount: float = 0.1, min_sigma: float = MIN_SIGMA):
        if not 0.0 <= discount < 1.0:
            raise ValueError("discount must be in [0, 1)")
        self.kappa = kappa
        self.discount = discount
        self.min_sigma = min_sigma
        self.g_pos = 0.0
        self.g_neg = 0.0
        self.previous: Optional[float] = None
        self.n = 0          # increments folded into the reference statistics
        self.weight = 0.0   # discounted sums of 1, inc, inc**2
        self.s1 = 0.0
        self.s2 = 0.0
        self.resets = 0

    @property
    def inc_mean(self) -> float:
        return self.s1 / self.weight if self.weight else 0.0

    @property
    def sigma(self) -> float:
        if self.n < 2:
            return 0.0
        m = self.inc_mean
        return math.sqrt(max(self.s2 / self.weight - m * m, 0.0))

    def calibrate(self, value: Optional[float]) -> None:
        """Fold one value into the increment statistics without scoring it."""
        if value is None:
            return
        value = float(value)
        if self.previous is not None:
            self._fold(value - self.previous)
        self.previous = value

    def step(self, value: Optional[float], threshold: Optional[float] = None) -> Optional[CusumResult]:
        """Consume one lead value; returns None when there is nothing to score.

        ``threshold`` is the decision interval; with None nothing is flagged.
        On a flagged change both sums restart from zero and the level reference
        moves to the post-change value, and the jump is kept out of the
        increment statistics so it does not widen the allowance.
        """
        if value is None:
            return None
        value = float(value)
        if self.previous is None:
            self.previous = value
            return None
        inc = value - self.previous
        if self.n < 2:
            self.previous = value
            self._fold(inc)
            return None
        z = (inc - self.inc_mean) / max(self.sigma, self.min_sigma)
        self.g_pos = max(0.0, self.g_pos + z - self.kappa)
        self.g_neg = max(0.0, self.g_neg - z - self.kappa)
        score = max(self.g_pos, self.g_neg)
        change = threshold is not None and score > threshold
        self.previous = value
        if change:
            self.g_pos = self.g_neg = 0.0
            self.resets += 1
        else:
            self._fold(inc)
        return CusumResult(score, change)

    def _fold(self, inc: float) -> None:
        keep = 1.0 - self.discount
        self.n += 1
        self.weight = keep * self.weight + 1.0
        self.s1 = keep * self.s1 + inc
        self.s2 = keep * self.s2 + inc * inc


def cusum_step(state: Cusum, new_value: Optional[float], threshold: Optional[float] = None):
    """Returns ``(score, change_flag, state)``; score is None for absent input."""
    res = state.step(new_value, threshold)
    if res is None:
        return None, False, state
    return res.score, res.change, state
