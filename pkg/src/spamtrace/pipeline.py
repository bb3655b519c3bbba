"""Window-serial engine: ingest -> registry -> signals -> detectors -> scoring.

Windows close in global order when a review from a later window arrives (or
at :meth:`Engine.finish`). All shared state (user registry, pooled score
distributions, ECDF stores) is updated at the window barrier, so results for
window t never depend on reviews of later windows.
"""

from __future__ import annotations

import json
import pickle
import time
from collections import deque
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

from .detectors import (
    LEAD_SIGNAL,
    AnomalyRecord,
    DetectorConfig,
    GlobalAR,
    LocalAR,
    PooledThresholds,
    make_lead,
)
from .ingest import (
    DEFAULT_DELTA_T,
    SECONDS_PER_DAY,
    ReviewUnit,
    assign_window,
    midnight_utc,
    read_reviews,
    validate_ordering,
)
from .registry import UserRegistry
from .report import Exporter
from .scoring import ProductScorer, product_rank
from .signals import SIGNALS, ProductCumulativeState, SignalVector, close_window

MODES = ("global_ar", "local_ar")
SNAPSHOT_MAGIC = b"SPAMTRACE-ENGINE-SNAPSHOT\n"
SNAPSHOT_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    delta_t: int = DEFAULT_DELTA_T
    origin: Optional[int] = None  # None: first record's UTC midnight
    format: str = "jsonl"
    csv_header: bool = False
    mode: str = "local_ar"
    lead: tuple = ("pos_count_ar",)
    r: float = 0.01
    k: int = 4
    L: int = 8
    eta: float = 0.04
    lag_radius: int = 2
    cusum_kappa: float = 0.5
    cusum_discount: float = 0.1
    min_threshold_samples: int = 30
    local_fit_window: int = 12
    min_support_labels: int = 1
    exclude_flagged: bool = True  # flagged scores stay out of the threshold distributions
    top_n: int = 20
    out_dir: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.lead, str):
            self.lead = tuple(s for s in self.lead.split(",") if s)
        self.lead = tuple(self.lead)

    def validate(self) -> "PipelineConfig":
        if self.delta_t <= 0:
            raise ConfigError("delta_t must be positive")
        if self.origin is not None and self.origin < 0:
            raise ConfigError("origin must be >= 0")
        if self.format not in ("jsonl", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        if self.min_support_labels < 0:
            raise ConfigError("min_support_labels must be >= 0")
        try:
            self.detector_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(
            discount=self.r,
            order=self.k,
            local_window=self.L,
            eta=self.eta,
            lag_radius=self.lag_radius,
            leads=self.lead,
            cusum_kappa=self.cusum_kappa,
            cusum_discount=self.cusum_discount,
            min_threshold_samples=self.min_threshold_samples,
            local_fit_window=self.local_fit_window,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lead"] = list(self.lead)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


class FlaggedCell(NamedTuple):
    product_id: str
    window: int
    n_support: int
    detected_at: int


@dataclass
class WindowResult:
    window: int
    signals: dict
    scores: dict          # pid -> {signal: score} computed at this window
    records: list         # AnomalyRecords emitted at this window
    alarms: list          # (pid, lead kind, score, threshold)
    ranking: list         # ProductScores, best first
    flagged: list         # FlaggedCells confirmed at this window
    characterization: list


@dataclass
class Counters:
    windows: int = 0
    reviews: int = 0
    lead_fits: int = 0
    global_fits: int = 0
    local_fits: int = 0
    local_active_steps: int = 0
    local_skipped_short: int = 0
    support_points: int = 0   # support points with data
    scored_points: int = 0    # support points that received a score
    alarms: int = 0
    labels: int = 0
    flagged: int = 0
    time_signals: float = 0.0
    time_lead: float = 0.0
    time_support: float = 0.0
    time_scoring: float = 0.0

    @property
    def support_fits(self) -> int:
        return self.global_fits + self.local_fits


class _Product:
    __slots__ = (
        "pid", "state", "reviews", "ages", "leads", "supports", "last_alarm",
        "alarm_windows", "label_windows", "flagged", "daily",
    )

    def __init__(self, pid, leads, supports):
        self.pid = pid
        self.state = ProductCumulativeState()
        self.reviews: list[ReviewUnit] = []
        self.ages: list[int] = []
        self.leads = leads
        self.supports = supports
        self.last_alarm: Optional[int] = None
        self.alarm_windows: deque = deque()       # recent alarm windows, ascending
        self.label_windows: dict[int, set] = {}   # window -> labeled support signals
        self.flagged: set[int] = set()
        self.daily: dict[int, list[int]] = {}     # day index -> counts per rating


class Engine:
    """Streaming engine; feed ordered reviews, collect one result per window."""

    def __init__(self, config: PipelineConfig):
        self.config = config.validate()
        self.dcfg = config.detector_config()
        self.registry = UserRegistry()
        self.thresholds = PooledThresholds(self.dcfg.eta, self.dcfg.min_threshold_samples)
        self.scorer = ProductScorer()
        self.products: dict[str, _Product] = {}
        self.origin = config.origin
        self.current: Optional[int] = None
        self.counters = Counters()
        self.lead_signals = {LEAD_SIGNAL[k] for k in self.dcfg.leads}
        # AR leads forecast from the last ``order`` windows; CUSUM resets on a flag
        self.echo_span = self.dcfg.order if any(k.endswith("_ar") for k in self.dcfg.leads) else 0
        self.support_signals = tuple(s for s in SIGNALS if s not in self.lead_signals)
        self._pending_char: list[tuple[str, int]] = []
        self._last_ts: Optional[int] = None

    # -- construction helpers -------------------------------------------

    def _new_product(self, pid: str) -> _Product:
        d = self.dcfg
        leads = {kind: make_lead(kind, d.order, d.discount, d.cusum_kappa, d.warmup, d.cusum_discount) for kind in d.leads}
        if self.config.mode == "global_ar":
            supports = {s: GlobalAR(s, d.order, d.discount, d.lag_radius, d.warmup) for s in self.support_signals}
        else:
            supports = {
                s: LocalAR(s, d.local_window, d.local_fit_window, d.local_max_order, d.lag_radius, d.warmup, d.ridge)
                for s in self.support_signals
            }
        return _Product(pid, leads, supports)

    @property
    def days_per_window(self) -> int:
        return max(1, -(-self.config.delta_t // SECONDS_PER_DAY))

    # -- streaming --------------------------------------------------------

    def feed(self, review: ReviewUnit) -> list[WindowResult]:
        if self._last_ts is not None and review.timestamp < self._last_ts:
            from .ingest import OrderingError

            raise OrderingError(self.counters.reviews + 1, review.timestamp, self._last_ts)
        self._last_ts = review.timestamp
        if self.origin is None:
            self.origin = midnight_utc(review.timestamp)
        w = assign_window(review.timestamp, self.origin, self.config.delta_t).index
        out = []
        if self.current is None:
            self.current = w
        while w > self.current:
            out.append(self._close_window(self.current))
            self.current += 1
        self.registry.advance(w)
        obs = self.registry.observe_review(review, w)
        prod = self.products.get(review.product_id)
        if prod is None:
            prod = self.products[review.product_id] = self._new_product(review.product_id)
        prod.reviews.append(review)
        prod.ages.append(obs.account_age_at_post)
        day = (review.timestamp - self.origin) // SECONDS_PER_DAY
        counts = prod.daily.get(day)
        if counts is None:
            counts = prod.daily[day] = [0, 0, 0, 0, 0]
        counts[review.rating - 1] += 1
        self.counters.reviews += 1
        return out

    def finish(self) -> list[WindowResult]:
        """Close the last open window (end of stream)."""
        if self.current is None:
            return []
        res = self._close_window(self.current)
        self.current += 1
        res.characterization.extend(self._characterize(res.window, flush_all=True))
        return [res]

    # -- window barrier ---------------------------------------------------

    def _close_window(self, t: int) -> WindowResult:
        c = self.counters
        lag = self.dcfg.lag_radius
        delta_t = self.config.delta_t
        t0 = time.perf_counter()
        signals: dict[str, SignalVector] = {}
        for pid, prod in self.products.items():
            if prod.reviews:
                stats = self.registry.close_window_user_stats(pid, t)
            else:
                stats = (0, 0)
            signals[pid] = close_window(prod.state, prod.reviews, stats, prod.ages, delta_t)
            prod.reviews = []
            prod.ages = []
        self.registry.forget_closed(t)
        t1 = time.perf_counter()
        c.time_signals += t1 - t0

        records: list[AnomalyRecord] = []
        alarms = []
        scores: dict[str, dict] = {pid: {} for pid in self.products}
        labels_now: dict[str, dict] = {pid: {} for pid in self.products}
        th = self.thresholds
        exclude = self.config.exclude_flagged
        for pid, prod in self.products.items():
            sv = signals[pid]
            for kind, det in prod.leads.items():
                sig = det.signal
                key = ("lead", kind)
                delta = th.threshold(key)
                res = det.step(getattr(sv, sig), delta)
                if res.score is None:
                    continue
                c.lead_fits += 1
                if res.warm:
                    if not (res.alarm and exclude):
                        th.stage(key, res.score)
                    scores[pid][sig] = res.score
                if res.alarm:
                    c.alarms += 1
                    prod.last_alarm = t
                    if not prod.alarm_windows or prod.alarm_windows[-1] != t:
                        prod.alarm_windows.append(t)
                    alarms.append((pid, kind, res.score, delta))
                    labels_now[pid][sig] = 1
                    records.append(AnomalyRecord(pid, sig, t, res.score, 1, det.detector, delta))
        t2 = time.perf_counter()
        c.time_lead += t2 - t1

        mode = self.config.mode
        for pid, prod in self.products.items():
            sv = signals[pid]
            t_a = prod.last_alarm
            for sig, det in prod.supports.items():
                value = getattr(sv, sig)
                key = (mode, sig)
                delta = th.threshold(key)
                if value is not None:
                    c.support_points += 1
                in_check = t_a is not None and t - t_a <= lag
                if mode == "global_ar":
                    det.update(t, value)
                    if value is None:
                        continue
                    c.global_fits += 1
                    c.scored_points += 1
                    warm_score = det.warm_score(t)
                    labels = det.label(t, t_a, delta)
                    if warm_score is not None:
                        held = in_check and (delta is None or any(lab.window == t for lab in labels))
                        if not (exclude and held):
                            th.stage(key, warm_score)
                        scores[pid][sig] = warm_score
                else:
                    fits_before = det.fits
                    out = det.step(t, value, t_a, delta)
                    c.local_fits += det.fits - fits_before
                    if out is None:
                        continue
                    c.local_active_steps += 1
                    labels = out.labels
                    c.scored_points += len(out.new)
                    if exclude:
                        # the lag window holds the campaign and its aftermath;
                        # calibrate on the ordinary history before it instead
                        th.stage_many(key, out.calibration)
                    else:
                        th.stage_many(key, out.new.values())
                    if t in out.new:
                        scores[pid][sig] = out.new[t]
                for lab in labels:
                    c.labels += 1
                    records.append(AnomalyRecord(pid, sig, lab.window, lab.score, 1, mode, lab.threshold))
                    prod.label_windows.setdefault(lab.window, set()).add(sig)
                    if lab.window == t:
                        labels_now[pid][sig] = 1
        th.commit()
        t3 = time.perf_counter()
        c.time_support += t3 - t2

        flagged = self._corroborate(t)
        per_product = {pid: (scores[pid], labels_now[pid]) for pid in self.products}
        ranking = product_rank(self.scorer.score_window(t, per_product))
        characterization = self._characterize(t)
        self._prune(t)
        c.time_scoring += time.perf_counter() - t3
        c.windows += 1
        return WindowResult(t, signals, scores, records, alarms, ranking, flagged, characterization)

    def _corroborate(self, t: int) -> list[FlaggedCell]:
        """Flag lead alarms backed by enough distinct support signals.

        Labels within ``lag`` of several alarms count for the nearest one.

        An alarm of an AR lead whose forecast used a flagged window as one of
        its ``k`` lags is an echo of that anomaly and is not flagged again.
        """
        lag = self.dcfg.lag_radius
        k = self.echo_span
        need = self.config.min_support_labels
        out = []
        for pid, prod in self.products.items():
            for t_a in prod.alarm_windows:
                if t_a in prod.flagged or t - t_a > lag:
                    continue
                if any(w in prod.flagged for w in range(t_a - k, t_a)):
                    continue
                sigs = set()
                for w in range(t_a - lag, t_a + lag + 1):
                    # a label backs the nearest alarm only
                    if any(abs(w - b) < abs(w - t_a) for b in prod.alarm_windows):
                        continue
                    sigs |= prod.label_windows.get(w, set())
                n = len(sigs)
                if n >= need:
                    prod.flagged.add(t_a)
                    out.append(FlaggedCell(pid, t_a, n, t))
                    self._pending_char.append((pid, t_a))
                    self.counters.flagged += 1
        return out

    def _characterize(self, t: int, flush_all: bool = False) -> list[list]:
        """Daily rating counts for the window before, at and after each flagged cell."""
        if not self._pending_char:
            return []
        dpw = self.days_per_window
        rows, keep = [], []
        for pid, t_a in self._pending_char:
            if not flush_all and t_a + 1 > t:
                keep.append((pid, t_a))
                continue
            daily = self.products[pid].daily
            start = (t_a * self.config.delta_t) // SECONDS_PER_DAY
            for rel in range(-dpw, 2 * dpw):
                phase = "before" if rel < 0 else ("during" if rel < dpw else "after")
                counts = daily.get(start + rel, [0, 0, 0, 0, 0])
                rows.append([pid, t_a, rel, phase, *counts])
        self._pending_char = keep
        return rows

    def _prune(self, t: int) -> None:
        lag = self.dcfg.lag_radius
        keep_from_day = ((t - 3) * self.config.delta_t) // SECONDS_PER_DAY
        for prod in self.products.values():
            while prod.alarm_windows and prod.alarm_windows[0] < t - 2 * lag - 1:
                prod.alarm_windows.popleft()
            if prod.label_windows and len(prod.label_windows) > 4 * lag + 4:
                prod.label_windows = {w: n for w, n in prod.label_windows.items() if w >= t - 3 * lag - 1}
            if len(prod.flagged) > 4 * lag + 4 + self.dcfg.order:
                prod.flagged = {w for w in prod.flagged if w >= t - 3 * lag - 1 - self.dcfg.order}
            if len(prod.daily) > 4 * self.days_per_window:
                prod.daily = {d: cnt for d, cnt in prod.daily.items() if d >= keep_from_day}

    # -- snapshots ----------------------------------------------------------

    def snapshot(self) -> bytes:
        meta = {"version": SNAPSHOT_VERSION, "window": self.current, "config": self.config.to_dict()}
        return SNAPSHOT_MAGIC + json.dumps(meta, sort_keys=True).encode() + b"\n" + pickle.dumps(self, protocol=4)

    def save_snapshot(self, path) -> None:
        Path(path).write_bytes(self.snapshot())

    @staticmethod
    def restore(blob: bytes) -> "Engine":
        if not blob.startswith(SNAPSHOT_MAGIC):
            raise ValueError("not an engine snapshot")
        rest = blob[len(SNAPSHOT_MAGIC):]
        header, _, payload = rest.partition(b"\n")
        meta = json.loads(header)
        if meta.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {meta.get('version')}")
        return pickle.loads(payload)

    @staticmethod
    def load_snapshot(path) -> "Engine":
        return Engine.restore(Path(path).read_bytes())


@dataclass
class RunResult:
    config: dict
    summary: dict
    windows: list = field(default_factory=list)  # WindowResults when kept

    @property
    def alarms(self) -> list:
        return [(w.window, *a) for w in self.windows for a in w.alarms]

    @property
    def flagged(self) -> list[FlaggedCell]:
        return [cell for w in self.windows for cell in w.flagged]

    @property
    def records(self) -> list[AnomalyRecord]:
        return [r for w in self.windows for r in w.records]

    def labeled_cells(self, include_lead: bool = False) -> set:
        leads = set()
        if not include_lead:
            leads = {LEAD_SIGNAL[k] for k in self.config["lead"]}
        return {(r.product_id, r.signal, r.window) for r in self.records if r.signal not in leads}

    def rank_of(self, product_id: str, window: int) -> Optional[int]:
        for w in self.windows:
            if w.window == window:
                for i, ps in enumerate(w.ranking, start=1):
                    if ps.product_id == product_id:
                        return i
        return None


def _summary(engine: Engine, wall: float) -> dict:
    c = engine.counters
    d = asdict(c)
    d["support_fits"] = c.support_fits
    d["wall_time"] = wall
    d["products"] = len(engine.products)
    d["users"] = len(engine.registry)
    d["origin"] = engine.origin
    d["mode"] = engine.config.mode
    d["config"] = engine.config.to_dict()
    return d


def run(config: PipelineConfig, reviews: Optional[Iterable[ReviewUnit]] = None, keep: bool = True,
        engine: Optional[Engine] = None) -> RunResult:
    """Run the full pipeline over an ordered review stream.

    Exports go to ``config.out_dir`` when set, flushed after every window.
    With ``keep`` the per-window results are returned as well. ``engine``
    resumes from a restored snapshot instead of starting fresh.
    """
    config.validate()
    if engine is None:
        engine = Engine(config)
    exporter = Exporter(config.out_dir, config.to_dict(), config.top_n) if config.out_dir else None
    kept: list[WindowResult] = []
    t0 = time.perf_counter()

    def emit(results):
        for res in results:
            if exporter is not None:
                exporter.write_window(res)
            if keep:
                kept.append(res)

    try:
        for review in validate_ordering(reviews if reviews is not None else ()):
            emit(engine.feed(review))
        emit(engine.finish())
        summary = _summary(engine, time.perf_counter() - t0)
    finally:
        if exporter is not None:
            exporter.close(summary if "summary" in locals() else None)
    return RunResult(config.to_dict(), summary, kept)


def run_file(config: PipelineConfig, path, keep: bool = False) -> RunResult:
    return run(config, read_reviews(path, config.format, config.csv_header), keep=keep)


def bench(config: PipelineConfig, reviews) -> dict:
    """Run both support modes on the same stream and compare their cost."""
    reviews = list(reviews)
    out = {}
    for mode in MODES:
        cfg = PipelineConfig(**{**config.to_dict(), "mode": mode, "out_dir": None})
        res = run(cfg, reviews, keep=False)
        s = res.summary
        out[mode] = {
            "wall_time": s["wall_time"],
            "support_time": s["time_support"],
            "ar_fits": s["support_fits"],
            "scored_points": s["scored_points"],
            "support_points": s["support_points"],
            "alarms": s["alarms"],
            "labels": s["labels"],
            "flagged": s["flagged"],
        }
    g, l = out["global_ar"], out["local_ar"]
    out["support_speedup"] = g["support_time"] / l["support_time"] if l["support_time"] > 0 else float("inf")
    out["wall_speedup"] = g["wall_time"] / l["wall_time"] if l["wall_time"] > 0 else float("inf")
    return out
