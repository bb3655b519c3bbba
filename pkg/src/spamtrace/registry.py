"""Global per-user history for the singleton, first-timer and youth signals.

Singleton status is decided when a window closes: a reviewer counts as a
singleton of product p in window t if the review to p is the only review the
user has posted by the end of t. Whether the user posts again afterwards is
unknowable online, so later reviews never revise an emitted count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import NamedTuple

from .ingest import ReviewUnit

SNAPSHOT_FORMAT = "spamtrace-user-registry"
SNAPSHOT_VERSION = 1


@dataclass
class UserRecord:
    user_id: str
    first_review_time: int
    total_review_count: int
    first_review_product: str
    first_review_window: int


class UserObservation(NamedTuple):
    is_users_first_review: bool
    account_age_at_post: int


class UserWindowStats(NamedTuple):
    singleton_count: int
    first_timer_count: int


class RegistryError(RuntimeError):
    pass


class UserRegistry:
    """Single-writer registry of every user seen in the stream.

    Reviews must be observed in global timestamp order. ``window`` passed to
    :meth:`observe_review` is the window index of the review; the registry
    keeps, per open (product, window), the users whose first-ever review was
    posted in that window so the counts can be taken at window close.
    """

    def __init__(self):
        self.users: dict[str, UserRecord] = {}
        # (product, window) -> user ids whose first review fell in `window`,
        # in order of first appearance; a user may show up under several products
        self._pending: dict[tuple[str, int], list[str]] = {}
        self._closed: set[tuple[str, int]] = set()
        self._current_window: int | None = None

    def __len__(self):
        return len(self.users)

    def observe_review(self, review: ReviewUnit, window: int) -> UserObservation:
        if self._current_window is not None and window < self._current_window:
            raise RegistryError(f"window {window} observed after window {self._current_window}")
        self._current_window = window
        key = (review.product_id, window)
        if key in self._closed:
            raise RegistryError(f"review for closed window {key}")
        rec = self.users.get(review.user_id)
        if rec is None:
            self.users[review.user_id] = UserRecord(
                review.user_id, review.timestamp, 1, review.product_id, window
            )
            self._pending.setdefault(key, []).append(review.user_id)
            return UserObservation(True, 0)
        rec.total_review_count += 1
        if rec.first_review_window == window:
            # first-timer in this window reviewing another product too
            lst = self._pending.setdefault(key, [])
            if review.user_id not in lst:
                lst.append(review.user_id)
        return UserObservation(False, review.timestamp - rec.first_review_time)

    def close_window_user_stats(self, product_id: str, window: int) -> UserWindowStats:
        """Singleton and first-timer counts for (product, window).

        Must be called once, after every review of ``window`` was observed.
        """
        key = (product_id, window)
        if key in self._closed:
            raise RegistryError(f"user stats for {key} already closed")
        if self._current_window is not None and window > self._current_window:
            raise RegistryError(f"window {window} is not closed yet (current {self._current_window})")
        self._closed.add(key)
        first_timers = self._pending.pop(key, [])
        singles = 0
        for uid in first_timers:
            rec = self.users[uid]
            if rec.total_review_count == 1 and rec.first_review_product == product_id:
                singles += 1
        return UserWindowStats(singles, len(first_timers))

    def advance(self, window: int) -> None:
        """Mark the stream as having reached ``window`` (all earlier windows may close)."""
        if self._current_window is None or window > self._current_window:
            self._current_window = window

    def forget_closed(self, before_window: int) -> None:
        """Drop close-bookkeeping for windows older than ``before_window``."""
        self._closed = {k for k in self._closed if k[1] >= before_window}

    # -- persistence -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "current_window": self._current_window,
            "users": [asdict(r) for r in self.users.values()],
            "pending": [[p, w, uids] for (p, w), uids in self._pending.items()],
            "closed": sorted([p, w] for p, w in self._closed),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UserRegistry":
        if data.get("format") != SNAPSHOT_FORMAT:
            raise RegistryError(f"not a registry snapshot: {data.get('format')!r}")
        if data.get("version") != SNAPSHOT_VERSION:
            raise RegistryError(f"unsupported registry snapshot version {data.get('version')}")
        reg = cls()
        reg._current_window = data["current_window"]
        for r in data["users"]:
            reg.users[r["user_id"]] = UserRecord(**r)
        reg._pending = {(p, w): list(uids) for p, w, uids in data["pending"]}
        reg._closed = {(p, w) for p, w in data["closed"]}
        return reg

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "UserRegistry":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
