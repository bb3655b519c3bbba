"""Synthetic review streams with injected spam campaigns and known ground truth.

Organic traffic: every product receives Poisson(rate) reviews per window at
uniform times, ratings drawn from the product's rating distribution
(optionally drifting linearly between two distributions). Reviewers are
either fresh accounts (probability ``new_user_rate``) or previously seen
accounts picked with lognormal activity weights.

Campaigns add a fixed number of reviews to a target product in chosen
windows, posted by a mix of singletons (fresh accounts used once),
first-timers (fresh accounts that also review another product in the same
window) and aged accounts (organic users first seen at least two windows
earlier).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .ingest import DEFAULT_DELTA_T, SECONDS_PER_DAY, ReviewUnit

DEFAULT_ORIGIN = 1325376000  # 2012-01-01T00:00:00Z
PATTERNS = ("uniform", "bursty-robotic")


class SynthError(ValueError):
    """The scenario is invalid or cannot be realized."""


def _check_probs(p, what: str) -> tuple:
    p = tuple(float(x) for x in p)
    if len(p) != 5:
        raise SynthError(f"{what}: need 5 rating probabilities, got {len(p)}")
    if any(x < 0 for x in p) or abs(sum(p) - 1.0) > 1e-9:
        raise SynthError(f"{what}: rating probabilities must be >= 0 and sum to 1, got {p}")
    return p


@dataclass
class CampaignSpec:
    target: str
    start: int
    duration: int = 1
    reviews_per_window: int = 100
    ratings: tuple = (0.0, 0.0, 0.0, 0.0, 1.0)
    singleton_frac: float = 1.0
    first_timer_frac: float = 0.0
    aged_frac: float = 0.0
    period: int = 0               # windows between occurrence starts; 0 = one-shot
    repeats: int = 1              # occurrences when period > 0
    pattern: str = "uniform"
    daily_profile: Optional[tuple] = None  # relative weights per day of the window
    crew: Optional[str] = None    # campaigns of one crew share first-timer accounts
    campaign_id: Optional[str] = None

    def validate(self, spec: "ScenarioSpec") -> None:
        self.ratings = _check_probs(self.ratings, f"campaign {self.campaign_id}")
        fr = (self.singleton_frac, self.first_timer_frac, self.aged_frac)
        if any(not 0.0 <= x <= 1.0 for x in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise SynthError(f"campaign {self.campaign_id}: reviewer fractions must be in [0,1] and sum to 1")
        if self.pattern not in PATTERNS:
            raise SynthError(f"campaign {self.campaign_id}: unknown pattern {self.pattern!r}")
        if self.duration < 1 or self.reviews_per_window < 0 or self.period < 0 or self.repeats < 1:
            raise SynthError(f"campaign {self.campaign_id}: invalid duration/size/period/repeats")
        if self.target not in spec.product_ids():
            raise SynthError(f"campaign {self.campaign_id}: unknown target {self.target!r}")
        for w in self.windows():
            if not 0 <= w < spec.n_windows:
                raise SynthError(f"campaign {self.campaign_id}: window {w} outside the stream")
        if self.daily_profile is not None:
            prof = np.asarray(self.daily_profile, dtype=float)
            if prof.ndim != 1 or len(prof) == 0 or (prof < 0).any() or prof.sum() <= 0:
                raise SynthError(f"campaign {self.campaign_id}: bad daily profile")

    def occurrences(self) -> list[int]:
        if self.period <= 0:
            return [self.start]
        return [self.start + i * self.period for i in range(self.repeats)]

    def windows(self) -> list[int]:
        return [s + d for s in self.occurrences() for d in range(self.duration)]


@dataclass
class DriftSpec:
    """Linear move of a product's organic rating distribution."""

    product: str
    start: int
    end: int
    ratings_end: tuple


@dataclass
class ScenarioSpec:
    n_products: int = 100
    n_windows: int = 60
    rate: float = 10.0
    ratings: tuple = (0.08, 0.06, 0.12, 0.30, 0.44)
    n_users: int = 200_000
    new_user_rate: float = 0.15
    activity_sigma: float = 1.0
    campaigns: list = field(default_factory=list)
    drifts: list = field(default_factory=list)
    rate_overrides: dict = field(default_factory=dict)
    delta_t: int = DEFAULT_DELTA_T
    origin: int = DEFAULT_ORIGIN

    def product_ids(self) -> list[str]:
        return [f"p{i:04d}" for i in range(self.n_products)]

    def validate(self) -> "ScenarioSpec":
        if self.n_products < 1 or self.n_windows < 1:
            raise SynthError("need at least one product and one window")
        if self.rate < 0 or any(v < 0 for v in self.rate_overrides.values()):
            raise SynthError("arrival rates must be >= 0")
        if not 0.0 <= self.new_user_rate <= 1.0:
            raise SynthError("new_user_rate must be in [0, 1]")
        if self.delta_t <= 0 or self.origin < 0:
            raise SynthError("delta_t must be positive and origin >= 0")
        self.ratings = _check_probs(self.ratings, "organic ratings")
        ids = set(self.product_ids())
        for pid in self.rate_overrides:
            if pid not in ids:
                raise SynthError(f"rate override for unknown product {pid!r}")
        for d in self.drifts:
            d.ratings_end = _check_probs(d.ratings_end, f"drift of {d.product}")
            if d.product not in ids or d.end < d.start:
                raise SynthError(f"bad drift for {d.product!r}")
        for i, c in enumerate(self.campaigns):
            if c.campaign_id is None:
                c.campaign_id = f"c{i}"
            c.validate(self)
        if len({c.campaign_id for c in self.campaigns}) != len(self.campaigns):
            raise SynthError("campaign ids must be unique")
        if self.campaign_accounts() > self.n_users:
            raise SynthError(
                f"campaigns need {self.campaign_accounts()} fresh accounts but the user pool holds {self.n_users}"
            )
        return self

    def campaign_accounts(self) -> int:
        """Fresh accounts the campaigns consume (singletons + first-timers)."""
        total = 0
        crew_need: dict[tuple, int] = {}
        for c in self.campaigns:
            n_single, n_first, _ = _split(c)
            for w in c.windows():
                total += n_single
                if c.crew is None:
                    total += n_first
                else:
                    key = (c.crew, w)
                    crew_need[key] = max(crew_need.get(key, 0), n_first)
        return total + sum(crew_need.values())

    # -- (de)serialization -------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        return json.loads(json.dumps(d))

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        data = dict(data)
        campaigns = [CampaignSpec(**c) for c in data.pop("campaigns", [])]
        drifts = [DriftSpec(**d) for d in data.pop("drifts", [])]
        for c in campaigns:
            c.ratings = tuple(c.ratings)
            if c.daily_profile is not None:
                c.daily_profile = tuple(c.daily_profile)
        for d in drifts:
            d.ratings_end = tuple(d.ratings_end)
        if "ratings" in data:
            data["ratings"] = tuple(data["ratings"])
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise SynthError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(campaigns=campaigns, drifts=drifts, **data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _split(c: CampaignSpec) -> tuple[int, int, int]:
    n = c.reviews_per_window
    n_single = int(round(n * c.singleton_frac))
    n_first = min(n - n_single, int(round(n * c.first_timer_frac)))
    return n_single, n_first, n - n_single - n_first


@dataclass
class GroundTruth:
    cells: list  # (product_id, window, campaign_id), campaign_id "<id>#<occurrence>"

    def cell_set(self) -> set:
        return {(p, w) for p, w, _ in self.cells}

    def save(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["product_id", "window", "campaign_id"])
            wr.writerows(self.cells)

    @classmethod
    def load(cls, path) -> "GroundTruth":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls([(r["product_id"], int(r["window"]), r["campaign_id"]) for r in rows])


def _times(rng, n: int, w_start: int, delta_t: int, pattern: str, profile=None) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if pattern == "bursty-robotic":
        first = int(rng.integers(0, SECONDS_PER_DAY))
        step = max(1, (delta_t - first) // n)
        return w_start + first + step * np.arange(n, dtype=np.int64)
    if profile is None:
        return w_start + rng.integers(0, delta_t, size=n)
    prof = np.asarray(profile, dtype=float)
    days = min(len(prof), max(1, delta_t // SECONDS_PER_DAY))
    prof = prof[:days] / prof[:days].sum()
    day = rng.choice(days, size=n, p=prof)
    return w_start + day * SECONDS_PER_DAY + rng.integers(0, SECONDS_PER_DAY, size=n)


def _ratings_at(spec: ScenarioSpec, drifts: dict, pid: str, w: int) -> np.ndarray:
    base = np.asarray(spec.ratings)
    d = drifts.get(pid)
    if d is None:
        return base
    end = np.asarray(d.ratings_end)
    if w <= d.start:
        return base
    if w >= d.end:
        return end
    a = (w - d.start) / (d.end - d.start)
    return (1 - a) * base + a * end


def generate(spec: ScenarioSpec, seed: int = 0) -> tuple[list[ReviewUnit], GroundTruth]:
    """Generate an ordered review stream and its campaign ground truth.

    Deterministic for a given (spec, seed).
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    pids = spec.product_ids()
    n_p = len(pids)
    rates = np.array([spec.rate_overrides.get(p, spec.rate) for p in pids], dtype=float)
    drifts = {d.product: d for d in spec.drifts}
    organic_cap = spec.n_users - spec.campaign_accounts()

    by_window: dict[int, list[CampaignSpec]] = {}
    for c in spec.campaigns:
        for w in c.windows():
            by_window.setdefault(w, []).append(c)

    pool_first_window: list[int] = []        # organic user index -> first window
    pool_weight: list[float] = []
    reviews: list[tuple] = []                # (timestamp, seq, user, product, rating)
    truth: list[tuple] = []
    seq = 0
    counters = {"fresh": 0}

    def fresh(prefix: str) -> str:
        counters["fresh"] += 1
        return f"{prefix}{counters['fresh']:07d}"

    for w in range(spec.n_windows):
        w_start = spec.origin + w * spec.delta_t
        counts = rng.poisson(rates)
        total = int(counts.sum())
        prod_idx = np.repeat(np.arange(n_p), counts)
        times = _times(rng, total, w_start, spec.delta_t, "uniform")
        stars = np.empty(total, dtype=np.int64)
        off = 0
        for i in range(n_p):
            n = int(counts[i])
            if n:
                probs = _ratings_at(spec, drifts, pids[i], w)
                stars[off:off + n] = rng.choice(5, size=n, p=probs) + 1
                off += n
        is_new = rng.random(total) < spec.new_user_rate
        n_pool = len(pool_weight)
        if n_pool == 0:
            is_new[:] = True
        users = np.empty(total, dtype=np.int64)
        if n_pool:
            p = np.asarray(pool_weight)
            picks = rng.choice(n_pool, size=total, p=p / p.sum())
            users[:] = picks
        for j in np.flatnonzero(is_new):
            if len(pool_weight) >= organic_cap:
                break
            users[j] = len(pool_weight)
            pool_weight.append(float(rng.lognormal(0.0, spec.activity_sigma)))
            pool_first_window.append(w)
        if len(pool_weight) == 0:
            raise SynthError("user pool exhausted before any organic review")
        # users that fell through the cap reuse the pool
        stale = is_new & (users >= len(pool_weight))
        users[stale] = rng.integers(0, len(pool_weight), size=int(stale.sum()))
        for j in range(total):
            u = int(users[j])
            if pool_first_window[u] > w:
                pool_first_window[u] = w
            reviews.append((int(times[j]), seq, f"u{u:07d}", pids[prod_idx[j]], int(stars[j])))
            seq += 1

        crew_accounts: dict[str, list[str]] = {}
        crew_members: dict[str, list[CampaignSpec]] = {}
        for c in by_window.get(w, []):
            if c.crew is not None:
                crew_members.setdefault(c.crew, []).append(c)
        for c in by_window.get(w, []):
            n_single, n_first, n_aged = _split(c)
            occ = next(i for i, s in enumerate(c.occurrences()) if s <= w < s + c.duration)
            truth.append((c.target, w, f"{c.campaign_id}#{occ}"))
            accounts = [fresh("s") for _ in range(n_single)]
            decoy_needed = []
            if c.crew is None:
                firsts = [fresh("f") for _ in range(n_first)]
                decoy_needed = firsts
            else:
                pool = crew_accounts.setdefault(c.crew, [])
                need = max(_split(m)[1] for m in crew_members[c.crew])
                while len(pool) < need:
                    pool.append(fresh(f"k{c.crew}_"))
                firsts = pool[:n_first]
                if len(crew_members[c.crew]) < 2:
                    decoy_needed = firsts
            accounts += firsts
            if n_aged:
                eligible = [u for u, fw in enumerate(pool_first_window) if fw <= w - 2]
                if len(eligible) < n_aged:
                    raise SynthError(
                        f"campaign {c.campaign_id} needs {n_aged} aged accounts in window {w}, "
                        f"only {len(eligible)} exist"
                    )
                aged = rng.choice(np.asarray(eligible), size=n_aged, replace=False)
                accounts += [f"u{int(u):07d}" for u in aged]
            accounts = [accounts[i] for i in rng.permutation(len(accounts))]
            ts = _times(rng, len(accounts), w_start, spec.delta_t, c.pattern, c.daily_profile)
            stars = rng.choice(5, size=len(accounts), p=np.asarray(c.ratings)) + 1
            for a, t, r in zip(accounts, ts, stars):
                reviews.append((int(t), seq, a, c.target, int(r)))
                seq += 1
            others = [p for p in pids if p != c.target]
            for a in decoy_needed:
                if not others:
                    break
                t = w_start + int(rng.integers(0, spec.delta_t))
                reviews.append((t, seq, a, others[int(rng.integers(len(others)))], int(rng.choice(5, p=spec.ratings)) + 1))
                seq += 1

    reviews.sort(key=lambda x: (x[0], x[1]))
    stream = [ReviewUnit(u, p, t, r) for t, _, u, p, r in reviews]
    truth.sort(key=lambda x: (x[1], x[0], x[2]))
    return stream, GroundTruth(truth)


def evaluate(detected: Iterable, truth, tolerance: int = 1) -> dict:
    """Cell-level precision/recall with a +-``tolerance`` window match.

    ``detected`` holds (product, window) cells; ``truth`` is a GroundTruth or
    an iterable of (product, window[, campaign_id]). With no detections the
    precision is reported as 1.0 and ``no_detections`` is set.
    """
    det = sorted({(str(p), int(w)) for p, w, *_ in detected})
    if isinstance(truth, GroundTruth):
        rows = truth.cells
    else:
        rows = [tuple(r) if len(r) >= 3 else (r[0], r[1], f"{r[0]}@{r[1]}") for r in truth]
    tcells = {(p, int(w)) for p, w, _ in rows}

    by_product: dict[str, list[int]] = {}
    for p, w in tcells:
        by_product.setdefault(p, []).append(w)
    det_by_product: dict[str, list[int]] = {}
    for p, w in det:
        det_by_product.setdefault(p, []).append(w)

    def near(ws, w):
        return any(abs(x - w) <= tolerance for x in ws)

    tp_det = sum(1 for p, w in det if near(by_product.get(p, ()), w))
    hit = sum(1 for p, w in tcells if near(det_by_product.get(p, ()), w))
    precision = tp_det / len(det) if det else 1.0
    recall = hit / len(tcells) if tcells else 1.0

    occurrences: dict[str, list] = {}
    for p, w, cid in rows:
        occurrences.setdefault(cid, []).append((p, int(w)))
    latency = {}
    for cid, cells in sorted(occurrences.items()):
        p = cells[0][0]
        start = min(w for _, w in cells)
        end = max(w for _, w in cells)
        hits = [w for w in det_by_product.get(p, ()) if start - tolerance <= w <= end + tolerance]
        latency[cid] = (min(hits) - start) if hits else None
    return {
        "precision": precision,
        "recall": recall,
        "n_detected": len(det),
        "n_truth": len(tcells),
        "true_detections": tp_det,
        "truth_hit": hit,
        "no_detections": not det,
        "latency": latency,
        "tolerance": tolerance,
    }


# -- preset scenarios ---------------------------------------------------------


def case_one_replica(n_organic: int = 500, n_windows: int = 64, first_campaign: int = 36,
                     campaign_size: int = 100) -> ScenarioSpec:
    """Declining app hit by four five-star singleton campaigns, 7 windows apart."""
    n = n_organic + 1
    target = "p0000"
    return ScenarioSpec(
        n_products=n,
        n_windows=n_windows,
        rate=10.0,
        rate_overrides={target: 15.0},
        n_users=max(200_000, 40 * n * n_windows),
        drifts=[DriftSpec(target, 2, first_campaign - 2, (0.55, 0.20, 0.12, 0.08, 0.05))],
        campaigns=[
            CampaignSpec(
                target=target,
                start=first_campaign,
                reviews_per_window=campaign_size,
                ratings=(0.0, 0.0, 0.0, 0.1, 0.9),
                singleton_frac=1.0,
                period=7,
                repeats=4,
                campaign_id="case1",
            )
        ],
    )


def case_two_replica(n_organic: int = 50, n_windows: int = 40, campaign_window: int = 30) -> ScenarioSpec:
    """One voluminous campaign: >4000 mostly five-star reviews in a single week,
    peaking around 900 per day."""
    target = "p0000"
    return ScenarioSpec(
        n_products=n_organic + 1,
        n_windows=n_windows,
        rate=10.0,
        rate_overrides={target: 60.0},
        campaigns=[
            CampaignSpec(
                target=target,
                start=campaign_window,
                reviews_per_window=4200,
                ratings=(0.02, 0.01, 0.02, 0.10, 0.85),
                singleton_frac=0.8,
                first_timer_frac=0.2,
                daily_profile=(0.6, 0.8, 1.0, 1.25, 1.5, 1.0, 0.85),
                campaign_id="case2",
            )
        ],
    )


def camouflage_replica(n_organic: int = 100, n_windows: int = 50, campaign_window: int = 35) -> ScenarioSpec:
    """Mixed 3-4 star campaign by young non-singleton accounts shared by two
    products of one seller."""
    a, b = "p0000", "p0001"
    common = dict(
        start=campaign_window,
        reviews_per_window=80,
        ratings=(0.0, 0.0, 0.35, 0.45, 0.20),
        singleton_frac=0.0,
        first_timer_frac=1.0,
        aged_frac=0.0,
        crew="seller",
    )
    return ScenarioSpec(
        n_products=n_organic + 2,
        n_windows=n_windows,
        rate=8.0,
        campaigns=[CampaignSpec(target=a, campaign_id="hair-a", **common),
                   CampaignSpec(target=b, campaign_id="hair-b", **common)],
    )


def sweep_scenario(magnitude: float, singleton_frac: float, n_products: int = 60, n_windows: int = 56,
                   rate: float = 10.0, n_targets: int = 3, seed: int = 0) -> ScenarioSpec:
    """Detection-quality scenario: ``n_targets`` products each hit by two
    campaigns of ``magnitude`` x the organic rate; the non-singleton share of
    the campaign reviewers is split between first-timers and aged accounts."""
    if n_windows < 39:
        raise SynthError("sweep scenarios need at least 39 windows (24 of history plus two campaigns)")
    if not 0.0 <= singleton_frac <= 1.0:
        raise SynthError("singleton_frac must be in [0, 1]")
    rng = np.random.default_rng(seed)
    rest = 1.0 - singleton_frac
    campaigns = []
    targets = rng.choice(n_products, size=n_targets, replace=False)
    for i, t in enumerate(targets):
        start = int(rng.integers(24, n_windows - 14))
        period = int(rng.integers(5, 10))
        campaigns.append(
            CampaignSpec(
                target=f"p{int(t):04d}",
                start=start,
                reviews_per_window=int(round(magnitude * rate)),
                ratings=(0.0, 0.0, 0.0, 0.15, 0.85),
                singleton_frac=singleton_frac,
                first_timer_frac=rest / 2,
                aged_frac=rest - rest / 2,
                period=period,
                repeats=2,
                campaign_id=f"s{i}",
            )
        )
    return ScenarioSpec(n_products=n_products, n_windows=n_windows, rate=rate, campaigns=campaigns)
