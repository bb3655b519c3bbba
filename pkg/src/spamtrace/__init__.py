"""Streaming detection of opinion-spam campaigns in product review streams."""

from .ingest import ReviewUnit, WindowIndex, assign_window, read_reviews, write_reviews
from .pipeline import Engine, PipelineConfig, RunResult, bench, run, run_file
from .registry import UserRegistry
from .scoring import EcdfStore, ProductScore, compute_features, product_rank
from .signals import SIGNALS, SignalVector
from .synth import CampaignSpec, GroundTruth, ScenarioSpec, evaluate, generate

__version__ = "0.1.0"

__all__ = [
    "CampaignSpec", "EcdfStore", "Engine", "GroundTruth", "PipelineConfig", "ProductScore",
    "ReviewUnit", "RunResult", "SIGNALS", "ScenarioSpec", "SignalVector", "UserRegistry",
    "WindowIndex", "assign_window", "bench", "compute_features", "evaluate", "generate",
    "product_rank", "read_reviews", "run", "run_file", "write_reviews",
]
