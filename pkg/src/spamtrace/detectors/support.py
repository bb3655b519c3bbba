"""Support-signal detectors around lead alarms: GlobalAR and LocalAR.

Both label a point ``t_j`` in the lag window ``[t_a - lag, t_i]`` when its
squared forecast error exceeds the pooled threshold and the move goes in the
signal's suspicious direction. GlobalAR scores every point with a discounted
AR model; LocalAR does no work at all unless the lead alarmed within ``lag``
windows, then fits small AR models on the recent history only.
"""

from __future__ import annotations

import logging
from collections import deque
from typing import NamedTuple, Optional

import numpy as np

from ..signals import SUSPICIOUS_DIRECTION
from .ar import SdarModel, fit_predict_batch

logger = logging.getLogger(__name__)
_warned_short: set = set()  # signals already warned about, one warning each per process


def sem_sus(signal: str, value: Optional[float], previous: Optional[float]) -> bool:
    """Whether ``previous -> value`` moves in the signal's suspicious direction."""
    if value is None or previous is None:
        return False
    direction = SUSPICIOUS_DIRECTION[signal]
    if direction == "increase":
        return value > previous
    if direction == "decrease":
        return value < previous
    return value != previous


class Label(NamedTuple):
    window: int
    score: float
    threshold: float


class LocalStep(NamedTuple):
    scores: dict        # window -> squared error, lag-window points checked this step
    labels: list
    new: dict           # lag-window points scored for the first time
    calibration: list   # order-selection errors of targets seen for the first time


class GlobalAR:
    """Per-(product, signal) GlobalAR state: one SDAR model fed every point."""

    def __init__(self, signal: str, order: int = 4, discount: float = 0.01, lag: int = 2, warmup: int = 9):
        self.signal = signal
        self.lag = lag
        self.warmup = warmup
        self.model = SdarModel(order, discount)
        self.observed = 0
        self.fits = 0
        self.previous: Optional[float] = None
        # (window, value, previous value, score or None, warm)
        self.recent: deque = deque(maxlen=2 * lag + 1)
        self.labeled: set[int] = set()

    def update(self, window: int, value: Optional[float]) -> Optional[float]:
        """Update the model with one present value and return its score."""
        if value is None:
            return None
        score = self.model.update(value)
        self.fits += 1
        self.observed += 1
        warm = score is not None and self.observed >= self.warmup
        self.recent.append((window, value, self.previous, score, warm))
        self.previous = value
        return score

    def warm_score(self, window: int) -> Optional[float]:
        if self.recent and self.recent[-1][0] == window and self.recent[-1][4]:
            return self.recent[-1][3]
        return None

    def label(self, t_i: int, t_a: Optional[int], threshold: Optional[float]) -> list[Label]:
        """Label the lag window around a recent lead alarm."""
        if t_a is None or threshold is None or t_i - t_a > self.lag:
            return []
        out = []
        for window, value, prev, score, warm in self.recent:
            if window < t_a - self.lag or window > t_i or not warm or window in self.labeled:
                continue
            if score > threshold and sem_sus(self.signal, value, prev):
                self.labeled.add(window)
                out.append(Label(window, score, threshold))
        if len(self.labeled) > 4 * self.lag + 4:
            self.labeled = {w for w in self.labeled if w >= t_i - 2 * self.lag}
        return out


def global_ar_step(state: GlobalAR, t_i: int, value, t_a, threshold):
    """Returns ``(score, labels)`` for one window of one support signal."""
    score = state.update(t_i, value)
    return score, state.label(t_i, t_a, threshold)


WINSOR = 3.0


def bounded_forecast(windows: np.ndarray, order: int, ridge: float = 1e-6) -> np.ndarray:
    """Row-wise AR(order) forecasts clipped to the range of each fitting window.

    Coefficients are fitted on a winsorized copy of each row (median plus or
    minus WINSOR robust spreads) but applied to the raw values. A short window
    holding one outlier can otherwise give an OLS fit whose forecast lands far
    outside anything observed; the final clip keeps one bad fit from
    producing an absurd score.
    """
    med = np.median(windows, axis=1, keepdims=True)
    spread = WINSOR * 1.4826 * np.median(np.abs(windows - med), axis=1, keepdims=True)
    fit_rows = np.clip(windows, med - spread, med + spread)
    preds = fit_predict_batch(fit_rows, order, ridge, inputs=windows)
    return np.clip(preds, windows.min(axis=1), windows.max(axis=1))


def selection_errors(values: np.ndarray, n_targets: int, fit_window: int, max_order: int = 5,
                     ridge: float = 1e-6) -> np.ndarray:
    """Squared one-step errors, shape ``(orders, n_targets)``, for the
    ``n_targets`` values before the last one, oldest target first.

    Each target is forecast from an AR fit on the ``fit_window`` values right
    before it.
    """
    v = np.asarray(values, dtype=float)
    i = len(v) - 1
    starts = np.arange(i - n_targets - fit_window, i - fit_window)
    idx = starts[:, None] + np.arange(fit_window)[None, :]
    windows = v[idx]
    targets = v[starts + fit_window]
    orders = range(1, min(max_order, fit_window - 1) + 1)
    return np.array([(targets - bounded_forecast(windows, k, ridge)) ** 2 for k in orders])


def select_order(values: np.ndarray, n_targets: int, fit_window: int, max_order: int = 5, ridge: float = 1e-6):
    """Pick the AR order minimizing the summed squared one-step error over the
    ``n_targets`` values before the last one.

    Returns ``(order, errors)`` with ``errors[k-1]`` the summed squared error
    of order ``k``; ties go to the smaller order.
    """
    errors = selection_errors(values, n_targets, fit_window, max_order, ridge).sum(axis=1)
    return int(np.argmin(errors)) + 1, errors


class LocalAR:
    """Per-(product, signal) LocalAR state.

    Only the recent present values are kept (O(L + fit_window) memory);
    nothing is fitted on windows farther than ``lag`` from the last alarm.
    """

    def __init__(
        self,
        signal: str,
        n_targets: int = 8,
        fit_window: int = 12,
        max_order: int = 5,
        lag: int = 2,
        warmup: int = 9,
        ridge: float = 1e-6,
    ):
        self.signal = signal
        self.n_targets = n_targets
        self.fit_window = fit_window
        self.max_order = max_order
        self.lag = lag
        self.warmup = warmup
        self.ridge = ridge
        self.windows: deque = deque(maxlen=n_targets + fit_window + 2 * lag + 2)
        self.values: deque = deque(maxlen=n_targets + fit_window + 2 * lag + 2)
        self.observed = 0
        self.fits = 0
        self.active_steps = 0
        self.skipped_short = 0
        self.labeled: set[int] = set()
        self.scored: set[int] = set()
        self.targets_seen: set[int] = set()
        self.cache: dict[int, float] = {}  # window -> squared error, fitted once
        self.alarm: Optional[int] = None    # alarm the current order was selected for
        self.last_order: Optional[int] = None

    def push(self, window: int, value: Optional[float]) -> None:
        if value is None:
            return
        self.windows.append(window)
        self.values.append(float(value))
        self.observed += 1

    def step(self, t_i: int, value, t_a: Optional[int], threshold: Optional[float]):
        """Consume the value of window ``t_i`` and, near an alarm, score the
        lag window.

        The order is selected once per alarm and every point is fitted once;
        later steps of the same lag window only fit the new points and
        re-check labels of the earlier ones against the current threshold.

        Returns None when skipped, otherwise a :class:`LocalStep`. Its
        ``calibration`` holds the squared errors (all candidate orders) of the
        order-selection targets not seen by an earlier step: errors on the
        ordinary history before the alarm.
        """
        self.push(t_i, value)
        if t_a is None or t_i - t_a > self.lag:
            return None
        n = len(self.values)
        if n == 0 or self.windows[-1] < t_a - self.lag:
            return None
        v = np.fromiter(self.values, dtype=float, count=n)
        wins = list(self.windows)
        first_obs = self.observed - n  # observations before the oldest kept value
        calibration: list[float] = []
        if self.alarm != t_a:
            h = n - 1
            n_targets = min(self.n_targets, h - self.fit_window)
            if n_targets < 2:
                self.skipped_short += 1
                log = logger.debug if self.signal in _warned_short else logger.warning
                _warned_short.add(self.signal)
                log(
                    "LocalAR %s: %d values of history are too few to select an order at window %d",
                    self.signal, h, t_i,
                )
                return None
            errs = selection_errors(v, n_targets, self.fit_window, self.max_order, self.ridge)
            self.fits += errs.size
            self.alarm = t_a
            self.last_order = int(np.argmin(errs.sum(axis=1))) + 1
            for j, p in enumerate(range(h - n_targets, h)):
                w = wins[p]
                if first_obs + p + 1 < self.warmup or w in self.targets_seen or w >= t_a - self.lag:
                    continue
                self.targets_seen.add(w)
                # a fit touching an earlier checked lag window is not ordinary history
                if not any(wins[q] in self.scored for q in range(p - self.fit_window, p + 1)):
                    calibration.extend(float(e) for e in errs[:, j])
        self.active_steps += 1

        pos = [p for p in range(n) if t_a - self.lag <= wins[p] <= t_i and p >= self.fit_window]
        scores: dict[int, float] = {}
        new: dict[int, float] = {}
        labels: list[Label] = []
        fresh = [p for p in pos if wins[p] not in self.cache]
        if fresh:
            idx = np.array(fresh)[:, None] - self.fit_window + np.arange(self.fit_window)[None, :]
            preds = bounded_forecast(v[idx], self.last_order, self.ridge)
            self.fits += len(fresh)
            for p, pred in zip(fresh, preds):
                self.cache[wins[p]] = float((v[p] - pred) ** 2)
        for p in pos:
            w = wins[p]
            s = self.cache[w]
            scores[w] = s
            warm = first_obs + p + 1 >= self.warmup
            if warm and w not in self.scored:
                self.scored.add(w)
                new[w] = s
            if (
                warm
                and threshold is not None
                and w not in self.labeled
                and s > threshold
                and sem_sus(self.signal, v[p], v[p - 1])
            ):
                self.labeled.add(w)
                labels.append(Label(w, s, threshold))
        lo = t_i - self.n_targets - self.fit_window - 4 * self.lag - 2
        cap = 2 * (self.n_targets + self.fit_window + 4 * self.lag)
        if len(self.scored) > cap:
            self.scored = {w for w in self.scored if w >= lo}
            self.labeled = {w for w in self.labeled if w >= lo}
        if len(self.cache) > cap:
            self.cache = {w: e for w, e in self.cache.items() if w >= lo}
        if len(self.targets_seen) > cap:
            self.targets_seen = {w for w in self.targets_seen if w >= lo}
        return LocalStep(scores, labels, new, calibration)


def local_ar_step(state: LocalAR, t_i: int, value, t_a, threshold):
    return state.step(t_i, value, t_a, threshold)
