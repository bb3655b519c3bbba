"""Product suspiciousness: anomaly features, empirical-CDF normalization, ranking."""

from __future__ import annotations

from bisect import bisect_right, insort
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .signals import SIGNALS

N_FEATURES = 4


@dataclass
class ProductScore:
    product_id: str
    window_index: int
    f: tuple  # (f1, f2, f3, f4)
    F: tuple  # (F1, F2, F3, F4)
    A: float

    def row(self) -> dict:
        d = {"product_id": self.product_id, "window": self.window_index, "A": self.A}
        for g in range(N_FEATURES):
            d[f"F{g + 1}"] = self.F[g]
        for g in range(N_FEATURES):
            d[f"f{g + 1}"] = self.f[g]
        return d


def compute_features(
    scores: Mapping[str, float],
    labels: Mapping[str, int],
    label_history: Mapping[str, int],
    n_signals: int = len(SIGNALS),
) -> tuple:
    """Four suspiciousness features of one product at one window.

    ``scores`` holds the anomaly score of every signal that was scored at this
    window, ``labels`` the 0/1 label per signal and ``label_history`` the
    product's label count per signal over all windows up to and including
    this one.

    f1 is the labeled fraction of the signals, f2 the summed score per label
    (0 without labels), f3 the largest score and f4 the score sum weighted by
    the inverse label history of each signal (weight 1 for a signal that never
    fired).
    """
    n_labels = sum(1 for v in labels.values() if v)
    total = sum(scores.values())
    f1 = n_labels / n_signals
    f2 = total / n_labels if n_labels else 0.0
    f3 = max(scores.values()) if scores else 0.0
    f4 = 0.0
    for sig, s in scores.items():
        hist = label_history.get(sig, 0)
        f4 += s / hist if hist > 0 else s
    return (f1, f2, f3, f4)


class EcdfStore:
    """Exact empirical CDF over every value inserted so far (sorted multiset)."""

    def __init__(self):
        self.values: list[float] = []

    def __len__(self):
        return len(self.values)

    def cdf(self, x: float) -> float:
        """Fraction of stored values <= x."""
        if not self.values:
            raise ValueError("empty ECDF store")
        return bisect_right(self.values, x) / len(self.values)

    def normalize(self, x: float) -> float:
        """CDF of ``x`` over the stored values plus ``x`` itself.

        The value is counted as one observation (<= itself), so the very
        first observation maps to 1 and a value below everything stored maps
        to 1/(n+1). The store is not modified; see :meth:`insert`.
        """
        return (bisect_right(self.values, x) + 1) / (len(self.values) + 1)

    def insert(self, x: float) -> None:
        insort(self.values, x)

    def insert_many(self, xs: Iterable[float]) -> None:
        xs = sorted(xs)
        if not xs:
            return
        if not self.values or len(xs) * 8 < len(self.values):
            for x in xs:
                insort(self.values, x)
        else:
            self.values = sorted(self.values + xs)


def ecdf_normalize(store: EcdfStore, value: float, insert: bool = True) -> float:
    """Normalize one value against the store, then insert it."""
    F = store.normalize(value)
    if insert:
        store.insert(value)
    return F


class ProductScorer:
    """Keeps one ECDF store per feature and per-product label histories.

    Every product of a window is normalized against the stores as they stood
    at the end of the previous window; the window's feature values are
    inserted afterwards, so results do not depend on product order.
    """

    def __init__(self):
        self.stores = [EcdfStore() for _ in range(N_FEATURES)]
        self.label_history: dict[str, dict[str, int]] = {}

    def score_window(self, window: int, per_product: Mapping[str, tuple]) -> list[ProductScore]:
        """``per_product`` maps product id -> (scores, labels) for this window."""
        feats = {}
        for pid, (scores, labels) in per_product.items():
            hist = self.label_history.setdefault(pid, {})
            for sig, lab in labels.items():
                if lab:
                    hist[sig] = hist.get(sig, 0) + 1
            feats[pid] = compute_features(scores, labels, hist)
        out = []
        for pid, f in feats.items():
            F = tuple(self.stores[g].normalize(f[g]) for g in range(N_FEATURES))
            out.append(ProductScore(pid, window, f, F, sum(F) / N_FEATURES))
        for g in range(N_FEATURES):
            self.stores[g].insert_many([f[g] for f in feats.values()])
        return out


def product_rank(scores: Sequence[ProductScore], top_n: Optional[int] = None) -> list[ProductScore]:
    """Descending by A; ties by larger f3, then product id."""
    ranked = sorted(scores, key=lambda ps: (-ps.A, -ps.f[2], ps.product_id))
    return ranked if top_n is None else ranked[:top_n]
