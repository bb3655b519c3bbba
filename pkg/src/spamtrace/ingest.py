"""Review stream parsing, validation and windowing.

A review stream is an iterable of :class:`ReviewUnit` records ordered by
timestamp. Downstream state (user registry, signal accumulators, detector
models) is order dependent, so :func:`validate_ordering` refuses unordered
input instead of buffering it; use :func:`sort_reviews` for offline dumps.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

FORMATS = ("jsonl", "csv")
CSV_FIELDS = ("user_id", "product_id", "timestamp", "rating", "text")
SECONDS_PER_DAY = 86400
DEFAULT_DELTA_T = 7 * SECONDS_PER_DAY


class ReviewParseError(ValueError):
    """A record could not be turned into a valid ReviewUnit."""

    def __init__(self, message: str, line_no: Optional[int] = None, field: Optional[str] = None):
        self.line_no = line_no
        self.field = field
        where = []
        if line_no is not None:
            where.append(f"line {line_no}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class OrderingError(ValueError):
    """A record arrived with a timestamp earlier than its predecessor."""

    def __init__(self, position: int, timestamp: int, previous: int):
        self.position = position
        self.timestamp = timestamp
        self.previous = previous
        super().__init__(
            f"record {position} has timestamp {timestamp} < previous {previous}; "
            "sort the input first (see spamtrace.ingest.sort_reviews)"
        )


@dataclass(frozen=True, slots=True)
class ReviewUnit:
    user_id: str
    product_id: str
    timestamp: int
    rating: int
    text: Optional[str] = None

    def __post_init__(self):
        if not self.user_id:
            raise ReviewParseError("user_id is empty", field="user_id")
        if not self.product_id:
            raise ReviewParseError("product_id is empty", field="product_id")
        if self.timestamp < 0:
            raise ReviewParseError("negative timestamp", field="timestamp")
        if self.rating not in (1, 2, 3, 4, 5):
            raise ReviewParseError(f"rating out of range: {self.rating}", field="rating")

    def to_dict(self) -> dict:
        d = {
            "user_id": self.user_id,
            "product_id": self.product_id,
            "timestamp": self.timestamp,
            "rating": self.rating,
        }
        if self.text is not None:
            d["text"] = self.text
        return d


@dataclass(frozen=True, slots=True)
class WindowIndex:
    index: int
    window_length_seconds: int
    origin: int

    @property
    def start(self) -> int:
        return self.origin + self.index * self.window_length_seconds

    @property
    def end(self) -> int:
        return self.start + self.window_length_seconds


def _as_int(value, field: str, line_no: Optional[int]) -> int:
    if isinstance(value, bool):
        raise ReviewParseError(f"expected integer, got {value!r}", line_no, field)
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value.is_integer():
            return int(value)
        raise ReviewParseError(f"expected integer, got {value!r}", line_no, field)
    try:
        return int(str(value).strip())
    except ValueError:
        raise ReviewParseError(f"expected integer, got {value!r}", line_no, field) from None


def _build(fields: dict, line_no: Optional[int]) -> ReviewUnit:
    for name in CSV_FIELDS[:4]:
        if name not in fields or fields[name] is None or fields[name] == "":
            raise ReviewParseError("missing field", line_no, name)
    user_id = str(fields["user_id"])
    product_id = str(fields["product_id"])
    timestamp = _as_int(fields["timestamp"], "timestamp", line_no)
    rating = _as_int(fields["rating"], "rating", line_no)
    if timestamp < 0:
        raise ReviewParseError("negative timestamp", line_no, "timestamp")
    if rating not in (1, 2, 3, 4, 5):
        raise ReviewParseError(f"rating out of range: {rating}", line_no, "rating")
    text = fields.get("text")
    if text == "":
        text = None
    return ReviewUnit(user_id, product_id, timestamp, rating, None if text is None else str(text))


def parse_review_line(line: str, format: str = "jsonl", line_no: Optional[int] = None) -> ReviewUnit:
    """Parse one JSONL object or one CSV row into a validated ReviewUnit.

    CSV rows are positional: ``user_id,product_id,timestamp,rating[,text]``.
    Errors carry the line number (when given) and the offending field.
    """
    if format == "jsonl":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ReviewParseError(f"malformed JSON: {exc.msg}", line_no) from None
        if not isinstance(obj, dict):
            raise ReviewParseError("expected a JSON object", line_no)
        return _build(obj, line_no)
    if format == "csv":
        # through a file object so quoted line breaks stay inside their field
        rows = list(csv.reader(io.StringIO(line.rstrip("\r\n"), newline="")))
        if len(rows) != 1:
            raise ReviewParseError("expected exactly one CSV row", line_no)
        return parse_csv_row(rows[0], line_no)
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def parse_csv_row(row: list, line_no: Optional[int] = None) -> ReviewUnit:
    if not row:
        raise ReviewParseError("empty CSV row", line_no)
    if len(row) < 4:
        raise ReviewParseError(f"expected at least 4 columns, got {len(row)}", line_no, CSV_FIELDS[len(row)])
    if len(row) > 5:
        raise ReviewParseError(f"expected at most 5 columns, got {len(row)}", line_no)
    return _build(dict(zip(CSV_FIELDS, row)), line_no)


def format_review(review: ReviewUnit, format: str = "jsonl") -> str:
    """Serialize a review to one line (no trailing newline)."""
    if format == "jsonl":
        return json.dumps(review.to_dict(), ensure_ascii=False)
    if format == "csv":
        buf = io.StringIO()
        row = [review.user_id, review.product_id, review.timestamp, review.rating]
        if review.text is not None:
            row.append(review.text)
        # the writer quotes fields containing terminator characters
        csv.writer(buf, lineterminator="\r\n").writerow(row)
        return buf.getvalue()[:-2]
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def read_reviews(path, format: str = "jsonl", header: bool = False) -> Iterator[ReviewUnit]:
    """Lazily parse a review file. Blank lines are skipped.

    For CSV, ``header=True`` skips the first line.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        if format == "csv":
            # csv.reader handles quoted newlines inside the text column
            reader = csv.reader(fh)
            for row_no, row in enumerate(reader, start=1):
                if header and row_no == 1:
                    continue
                if not row:
                    continue
                yield parse_csv_row(row, line_no=reader.line_num)
        else:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                yield parse_review_line(line, format, line_no=line_no)


def write_reviews(reviews: Iterable[ReviewUnit], path, format: str = "jsonl") -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for review in reviews:
            fh.write(format_review(review, format))
            fh.write("\n")
            n += 1
    return n


def assign_window(timestamp: int, origin: int, delta_t: int) -> WindowIndex:
    """Map a timestamp to its half-open window ``[start, start + delta_t)``."""
    if delta_t <= 0:
        raise ValueError(f"delta_t must be positive, got {delta_t}")
    if timestamp < origin:
        raise ValueError(f"timestamp {timestamp} precedes window origin {origin}")
    return WindowIndex((timestamp - origin) // delta_t, delta_t, origin)


def midnight_utc(timestamp: int) -> int:
    return timestamp - timestamp % SECONDS_PER_DAY


def validate_ordering(reviews: Iterable[ReviewUnit]) -> Iterator[ReviewUnit]:
    """Pass reviews through unchanged, raising OrderingError on a decrease.

    Positions in the error are 1-based. Equal timestamps are allowed and keep
    their input order.
    """
    previous = None
    for position, review in enumerate(reviews, start=1):
        if previous is not None and review.timestamp < previous:
            raise OrderingError(position, review.timestamp, previous)
        previous = review.timestamp
        yield review


def sort_reviews(reviews: Iterable[ReviewUnit]) -> list[ReviewUnit]:
    """Offline stable sort by timestamp, for dumps that are not in order."""
    return sorted(reviews, key=lambda r: r.timestamp)
