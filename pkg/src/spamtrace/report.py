"""File exports: signal/score timelines, anomalies, rankings, characterization.

Every CSV starts with one ``# config: {...}`` comment line echoing the run
configuration (``pandas.read_csv(path, comment="#")`` skips it). The
anomaly JSONL starts with a ``{"header": true, "config": ...}`` object.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Optional

from .signals import SIGNALS

SIGNAL_COLUMNS = ["product_id", "window", *SIGNALS]
RANKING_COLUMNS = ["window", "rank", "product_id", "A", "F1", "F2", "F3", "F4", "f1", "f2", "f3", "f4"]
FLAGGED_COLUMNS = ["product_id", "window", "n_support", "detected_at"]
CHARACTERIZATION_COLUMNS = ["product_id", "alarm_window", "day", "phase", "r1", "r2", "r3", "r4", "r5"]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_table(path) -> list[dict]:
    """Read one of our CSV exports, skipping the config comment line."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = (line for line in fh if not line.startswith("#"))
        return list(csv.DictReader(lines))


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                if not obj.get("header"):
                    out.append(obj)
    return out


class _CsvSink:
    def __init__(self, path: Path, columns, config: dict):
        self.fh = open(path, "w", newline="", encoding="utf-8")
        self.fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(columns)

    def write(self, row) -> None:
        self.writer.writerow([_cell(v) for v in row])

    def flush(self):
        self.fh.flush()

    def close(self):
        self.fh.close()


class Exporter:
    """Writes a run's outputs into ``out_dir`` window by window."""

    def __init__(self, out_dir, config: dict, top_n: int = 20):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.top_n = top_n
        self.signals = _CsvSink(self.dir / "signals.csv", SIGNAL_COLUMNS, config)
        self.scores = _CsvSink(self.dir / "scores.csv", SIGNAL_COLUMNS, config)
        self.ranking = _CsvSink(self.dir / "ranking.csv", RANKING_COLUMNS, config)
        self.flagged = _CsvSink(self.dir / "flagged.csv", FLAGGED_COLUMNS, config)
        self.characterization = _CsvSink(self.dir / "characterization.csv", CHARACTERIZATION_COLUMNS, config)
        self.anomalies = open(self.dir / "anomalies.jsonl", "w", encoding="utf-8")
        self.anomalies.write(json.dumps({"header": True, "config": config}, sort_keys=True) + "\n")
        self.top: list[dict] = []

    def write_window(self, res) -> None:
        for pid, sv in res.signals.items():
            self.signals.write([pid, res.window, *sv.values()])
        for pid, sc in res.scores.items():
            self.scores.write([pid, res.window, *(sc.get(s) for s in SIGNALS)])
        for rank, ps in enumerate(res.ranking, start=1):
            self.ranking.write([res.window, rank, ps.product_id, ps.A, *ps.F, *ps.f])
        for rec in res.records:
            self.anomalies.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
        for cell in res.flagged:
            self.flagged.write([cell.product_id, cell.window, cell.n_support, cell.detected_at])
        for row in res.characterization:
            self.characterization.write(row)
        self.top.append(
            {
                "window": res.window,
                "top": [
                    {"rank": i, "product_id": ps.product_id, "A": ps.A}
                    for i, ps in enumerate(res.ranking[: self.top_n], start=1)
                ],
            }
        )
        for sink in (self.signals, self.scores, self.ranking, self.flagged, self.characterization):
            sink.flush()
        self.anomalies.flush()

    def close(self, summary: Optional[dict] = None) -> None:
        for sink in (self.signals, self.scores, self.ranking, self.flagged, self.characterization):
            sink.close()
        self.anomalies.close()
        with open(self.dir / "ranking_top.json", "w", encoding="utf-8") as fh:
            json.dump({"config": self.config, "top_n": self.top_n, "windows": self.top}, fh, indent=1)
        if summary is not None:
            with open(self.dir / "summary.json", "w", encoding="utf-8") as fh:
                json.dump(summary, fh, indent=2, sort_keys=True)
