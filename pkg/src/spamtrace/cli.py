"""Command-line entry point: ``spamtrace {run,bench,synth,sort}``.

Exit codes: 0 success, 1 input error, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional

from . import synth
from .ingest import OrderingError, ReviewParseError, read_reviews, sort_reviews, write_reviews
from .pipeline import ConfigError, PipelineConfig, bench, run
from .report import read_table

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2

# CLI flag -> PipelineConfig field
FLAG_FIELDS = {
    "format": "format",
    "csv_header": "csv_header",
    "delta_t": "delta_t",
    "origin": "origin",
    "lead": "lead",
    "mode": "mode",
    "eta": "eta",
    "r": "r",
    "k": "k",
    "L": "L",
    "lag_radius": "lag_radius",
    "cusum_kappa": "cusum_kappa",
    "min_support": "min_support_labels",
    "out": "out_dir",
    "top_n": "top_n",
}

PRESETS = ("case-one", "case-two", "camouflage", "sweep")


class InputError(Exception):
    pass


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of PipelineConfig fields; flags override it")
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.add_argument("--csv-header", action="store_true", default=None, help="CSV input has a header row")
    p.add_argument("--delta-t", type=int, help="window length in seconds (default one week)")
    p.add_argument("--origin", type=int, help="epoch second of window 0 (default: first record's UTC midnight)")
    p.add_argument("--lead", help="comma-separated lead detectors, e.g. pos_count_ar,avg_rating_cusum")
    p.add_argument("--mode", choices=("global_ar", "local_ar"))
    p.add_argument("--eta", type=float, help="expected anomaly rate for the Cantelli threshold")
    p.add_argument("--r", type=float, help="SDAR discount")
    p.add_argument("--k", type=int, help="AR order of lead and GlobalAR models")
    p.add_argument("--L", type=int, help="LocalAR order-selection targets")
    p.add_argument("--lag-radius", type=int)
    p.add_argument("--cusum-kappa", type=float)
    p.add_argument("--min-support", type=int, help="distinct support signals needed to flag a cell")
    p.add_argument("--top-n", type=int)


def build_config(args: argparse.Namespace, out_dir: Optional[str] = None) -> PipelineConfig:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    for flag, field in FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[field] = value
    if out_dir is not None:
        data["out_dir"] = out_dir
    try:
        cfg = PipelineConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def _reviews(path: str, cfg: PipelineConfig):
    try:
        return list(read_reviews(path, cfg.format, cfg.csv_header))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def cmd_run(args) -> int:
    cfg = build_config(args)
    if cfg.out_dir is None:
        raise ConfigError("run needs --out")
    # streamed: windows are exported as they close
    res = run(cfg, read_reviews(args.input, cfg.format, cfg.csv_header), keep=False)
    s = res.summary
    print(
        f"{s['windows']} windows, {s['reviews']} reviews, {s['alarms']} lead alarms, "
        f"{s['labels']} support labels, {s['flagged']} flagged cells -> {cfg.out_dir}"
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = build_config(args)
    cfg.out_dir = None
    out = bench(cfg, _reviews(args.input, cfg))
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def _preset(args) -> synth.ScenarioSpec:
    if args.scenario:
        try:
            return synth.ScenarioSpec.load(args.scenario)
        except OSError as exc:
            raise InputError(f"cannot read scenario {args.scenario}: {exc}") from None
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad scenario {args.scenario}: {exc}") from None
    if args.preset == "case-one":
        return synth.case_one_replica()
    if args.preset == "case-two":
        return synth.case_two_replica()
    if args.preset == "camouflage":
        return synth.camouflage_replica()
    return synth.sweep_scenario(args.magnitude, args.singleton_frac, seed=args.seed)


def cmd_synth_generate(args) -> int:
    try:
        spec = _preset(args)
        reviews, truth = synth.generate(spec, seed=args.seed)
    except synth.SynthError as exc:
        raise ConfigError(str(exc)) from None
    n = write_reviews(reviews, args.output, args.format)
    if args.truth:
        truth.save(args.truth)
    if args.spec_out:
        spec.save(args.spec_out)
    print(f"{n} reviews, {len(truth.cells)} campaign cells, origin {spec.origin}")
    return EXIT_OK


def cmd_synth_evaluate(args) -> int:
    try:
        truth = synth.GroundTruth.load(args.truth)
        rows = read_table(args.flagged)
        detected = [(r["product_id"], int(r["window"])) for r in rows]
    except OSError as exc:
        raise InputError(str(exc)) from None
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed input: {exc}") from None
    print(json.dumps(synth.evaluate(detected, truth, args.tolerance), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_sort(args) -> int:
    try:
        reviews = sort_reviews(read_reviews(args.input, args.format, args.csv_header))
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from None
    n = write_reviews(reviews, args.output, args.format)
    print(f"{n} reviews sorted -> {args.output}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spamtrace", description="Streaming opinion-spam campaign detection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the detector over a time-ordered review file")
    p.add_argument("--input", required=True)
    _add_config_flags(p)
    p.add_argument("--out", help="export directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run GlobalAR and LocalAR on the same input and compare cost")
    p.add_argument("--input", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="synthetic scenarios with injected campaigns")
    ssub = p.add_subparsers(dest="synth_command", required=True)
    g = ssub.add_parser("generate", help="write a scenario's review stream and ground truth")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="scenario JSON file")
    src.add_argument("--preset", choices=PRESETS, default="case-one")
    g.add_argument("--magnitude", type=float, default=10.0, help="sweep preset: campaign size over baseline")
    g.add_argument("--singleton-frac", type=float, default=1.0, help="sweep preset: singleton reviewer share")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output", required=True)
    g.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    g.add_argument("--truth", help="ground-truth CSV path")
    g.add_argument("--spec-out", help="write the scenario JSON here")
    g.set_defaults(func=cmd_synth_generate)
    e = ssub.add_parser("evaluate", help="score flagged cells against ground truth")
    e.add_argument("--flagged", required=True, help="flagged.csv from a run")
    e.add_argument("--truth", required=True)
    e.add_argument("--tolerance", type=int, default=1)
    e.set_defaults(func=cmd_synth_evaluate)

    p = sub.add_parser("sort", help="sort a review dump by timestamp")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--csv-header", action="store_true")
    p.set_defaults(func=cmd_sort)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, ReviewParseError, OrderingError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
