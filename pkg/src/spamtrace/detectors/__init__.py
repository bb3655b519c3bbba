"""Lead and support anomaly detectors, thresholds and records."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

from .ar import SdarModel, ArFit, fit_ar, ar_predict, fit_predict_batch, levinson_durbin, sdar_update
from .cusum import Cusum, cusum_step
from .lead import LEAD_SIGNAL, ArLead, CusumLead, ar_lead_step, make_lead
from .support import GlobalAR, LocalAR, LocalStep, Label, global_ar_step, local_ar_step, select_order, selection_errors, sem_sus
from .threshold import PooledThresholds, ScoreDistribution, cantelli_threshold, threshold_update

DETECTOR_KINDS = ("cusum", "global_ar", "local_ar")


@dataclass
class DetectorConfig:
    discount: float = 0.01
    order: int = 4
    local_window: int = 8
    eta: float = 0.04
    lag_radius: int = 2
    leads: tuple = ("pos_count_ar",)
    cusum_kappa: float = 0.5
    cusum_discount: float = 0.1
    min_threshold_samples: int = 30
    local_fit_window: int = 12
    local_max_order: int = 5
    ridge: float = 1e-6

    def __post_init__(self):
        if isinstance(self.leads, str):
            self.leads = (self.leads,)
        self.leads = tuple(self.leads)
        self.validate()

    @property
    def warmup(self) -> int:
        return max(self.order, self.local_window) + 1

    def validate(self) -> None:
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount r must be in [0, 1)")
        if self.order < 1:
            raise ValueError("order k must be >= 1")
        if self.local_window < 2:
            raise ValueError("local window L must be >= 2")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must be in (0, 1)")
        if self.lag_radius < 0:
            raise ValueError("lag radius must be >= 0")
        if not self.leads:
            raise ValueError("at least one lead is required")
        for kind in self.leads:
            if kind not in LEAD_SIGNAL:
                raise ValueError(f"unknown lead kind {kind!r}")
        if self.cusum_kappa < 0:
            raise ValueError("cusum kappa must be >= 0")
        if not 0.0 <= self.cusum_discount < 1.0:
            raise ValueError("cusum discount must be in [0, 1)")
        if self.min_threshold_samples < 2:
            raise ValueError("min threshold samples must be >= 2")
        if self.local_fit_window < 2:
            raise ValueError("local fit window must be >= 2")
        if not 1 <= self.local_max_order < self.local_fit_window:
            raise ValueError("local max order must be in [1, local_fit_window)")


@dataclass
class AnomalyRecord:
    product_id: str
    signal: str
    window: int
    score: float
    label: int
    detector: str
    threshold: float

    def to_dict(self) -> dict:
        return asdict(self)


__all__ = [
    "AnomalyRecord", "ArFit", "ArLead", "Cusum", "CusumLead", "DETECTOR_KINDS", "DetectorConfig",
    "GlobalAR", "LEAD_SIGNAL", "Label", "LocalAR", "LocalStep", "PooledThresholds", "ScoreDistribution",
    "SdarModel", "ar_lead_step", "ar_predict", "cantelli_threshold", "cusum_step", "fit_ar",
    "fit_predict_batch", "global_ar_step", "levinson_durbin", "local_ar_step", "make_lead",
    "sdar_update", "select_order", "selection_errors", "sem_sus", "threshold_update",
]
