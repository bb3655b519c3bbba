"""Lead-signal detectors: SDAR forecast error for counts, CUSUM for rating."""

from __future__ import annotations

from typing import NamedTuple, Optional

from .ar import SdarModel
from .cusum import Cusum
from .support import sem_sus

LEAD_SIGNAL = {
    "avg_rating_cusum": "avg_rating",
    "pos_count_ar": "num_pos",
    "neg_count_ar": "num_neg",
    "total_count_ar": "num_reviews",
}


class LeadResult(NamedTuple):
    score: Optional[float]
    alarm: bool
    warm: bool


class ArLead:
    """Squared one-step SDAR forecast error of a count series."""

    detector = "global_ar"

    def __init__(self, signal: str, order: int = 4, discount: float = 0.01, warmup: int = 9):
        self.signal = signal
        self.model = SdarModel(order, discount)
        self.warmup = warmup
        self.observed = 0
        self.previous: Optional[float] = None

    def step(self, value, threshold: Optional[float]) -> LeadResult:
        if value is None:
            return LeadResult(None, False, False)
        score = self.model.update(value)
        self.observed += 1
        prev, self.previous = self.previous, value
        warm = score is not None and self.observed >= self.warmup
        alarm = (
            warm
            and threshold is not None
            and score > threshold
            and sem_sus(self.signal, value, prev)
        )
        return LeadResult(score, alarm, warm)


def ar_lead_step(model: ArLead, new_value, threshold=None):
    """Returns ``(score, model)``; the score is None during warm-up."""
    res = model.step(new_value, threshold)
    return res.score, model


class CusumLead:
    detector = "cusum"

    def __init__(self, signal: str = "avg_rating", kappa: float = 0.5, warmup: int = 9, discount: float = 0.1):
        self.signal = signal
        self.cusum = Cusum(kappa, discount)
        self.warmup = warmup
        self.observed = 0

    def step(self, value, threshold: Optional[float]) -> LeadResult:
        if value is None:
            return LeadResult(None, False, False)
        self.observed += 1
        if self.observed < self.warmup:
            # warm-up only calibrates the increment scale
            self.cusum.calibrate(value)
            return LeadResult(None, False, False)
        res = self.cusum.step(value, threshold)
        if res is None:
            return LeadResult(None, False, False)
        return LeadResult(res.score, res.change, True)


def make_lead(kind: str, order: int, discount: float, kappa: float, warmup: int, cusum_discount: float = 0.1):
    if kind not in LEAD_SIGNAL:
        raise ValueError(f"unknown lead kind {kind!r}; expected one of {sorted(LEAD_SIGNAL)}")
    if kind == "avg_rating_cusum":
        return CusumLead(LEAD_SIGNAL[kind], kappa, warmup, cusum_discount)
    return ArLead(LEAD_SIGNAL[kind], order, discount, warmup)
