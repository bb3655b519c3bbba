import numpy as np
import pytest

from spamtrace import synth
from spamtrace.ingest import SECONDS_PER_DAY, format_review, validate_ordering
from spamtrace.pipeline import PipelineConfig, run
from spamtrace.synth import CampaignSpec, GroundTruth, ScenarioSpec, SynthError, evaluate, generate


def small(**kw):
    base = dict(n_products=20, n_windows=30, rate=6.0, n_users=5000)
    base.update(kw)
    return ScenarioSpec(**base)


def test_same_seed_same_bytes():
    spec = synth.sweep_scenario(5.0, 0.5, n_products=20, n_windows=40, seed=3)
    a, ta = generate(spec, seed=3)
    b, tb = generate(spec, seed=3)
    assert "\n".join(format_review(r) for r in a) == "\n".join(format_review(r) for r in b)
    assert ta.cells == tb.cells
    c, _ = generate(spec, seed=4)
    assert [format_review(r) for r in c] != [format_review(r) for r in a]


def test_stream_is_ordered_and_in_range():
    spec = synth.sweep_scenario(10.0, 1.0, n_products=20, n_windows=40, seed=1)
    reviews, _ = generate(spec, seed=1)
    assert list(validate_ordering(reviews)) == reviews
    end = spec.origin + spec.n_windows * spec.delta_t
    assert all(spec.origin <= r.timestamp < end for r in reviews)


def test_zero_campaigns_has_empty_truth():
    _, truth = generate(small(), seed=0)
    assert truth.cells == []


def test_truth_marks_exactly_the_campaign_cells():
    spec = small(campaigns=[CampaignSpec("p0003", start=10, duration=2, reviews_per_window=40,
                                         period=7, repeats=2, campaign_id="c")])
    reviews, truth = generate(spec, seed=0)
    assert truth.cell_set() == {("p0003", w) for w in (10, 11, 17, 18)}
    per_window = {}
    for r in reviews:
        if r.product_id == "p0003":
            w = (r.timestamp - spec.origin) // spec.delta_t
            per_window[w] = per_window.get(w, 0) + 1
    assert all(per_window[w] >= 40 for w in (10, 11, 17, 18))


def test_case_one_replica_has_four_cells():
    spec = synth.case_one_replica(n_organic=20)
    spec.validate()
    assert len(spec.campaigns[0].windows()) == 4
    assert spec.campaigns[0].windows() == [36, 43, 50, 57]


def test_case_two_replica_volume():
    spec = synth.case_two_replica(n_organic=5)
    reviews, truth = generate(spec, seed=0)
    (cell,) = truth.cell_set()
    w0 = spec.origin + cell[1] * spec.delta_t
    in_window = [r for r in reviews if r.product_id == cell[0] and w0 <= r.timestamp < w0 + spec.delta_t]
    assert len(in_window) > 4000
    per_day = np.bincount([(r.timestamp - w0) // SECONDS_PER_DAY for r in in_window], minlength=7)
    assert 800 <= per_day.max() <= 1100


def test_infeasible_and_invalid_specs():
    with pytest.raises(SynthError):
        generate(small(n_users=50, campaigns=[CampaignSpec("p0000", start=5, reviews_per_window=100)]), seed=0)
    with pytest.raises(SynthError):
        generate(small(campaigns=[CampaignSpec("p0000", start=5, singleton_frac=0.5)]), seed=0)
    with pytest.raises(SynthError):
        generate(small(ratings=(0.5, 0.5, 0.5, 0.0, 0.0)), seed=0)
    with pytest.raises(SynthError):
        generate(small(campaigns=[CampaignSpec("zzz", start=5)]), seed=0)
    with pytest.raises(SynthError):
        synth.sweep_scenario(5.0, 0.5, n_windows=30)


def test_spec_round_trip(tmp_path):
    spec = synth.case_one_replica(n_organic=10)
    spec.save(tmp_path / "s.json")
    again = ScenarioSpec.load(tmp_path / "s.json")
    assert generate(again, seed=2)[0] == generate(spec, seed=2)[0]


def test_truth_csv_round_trip(tmp_path):
    t = GroundTruth([("p1", 3, "a#0"), ("p2", 9, "b#1")])
    t.save(tmp_path / "t.csv")
    assert GroundTruth.load(tmp_path / "t.csv").cells == t.cells


def test_campaign_cells_move_signals_the_suspicious_way():
    spec = small(n_products=10, n_windows=30, rate=10.0,
                 campaigns=[CampaignSpec("p0002", start=24, reviews_per_window=80, pattern="bursty-robotic",
                                         campaign_id="c")])
    reviews, _ = generate(spec, seed=5)
    res = run(PipelineConfig(), reviews)
    series = {w.window: w.signals.get("p0002") for w in res.windows}
    base = [series[w] for w in range(10, 24) if series.get(w) is not None]
    camp = series[24]

    def mean(name):
        return np.mean([getattr(s, name) for s in base if getattr(s, name) is not None])

    assert camp.num_pos > mean("num_pos")
    for name in ("ratio_singletons", "ratio_first_timers", "youth_score"):
        assert getattr(camp, name) > mean(name)
    for name in ("rating_entropy", "gap_entropy"):
        assert getattr(camp, name) < mean(name)


def test_evaluate_conventions():
    truth = [("p", 10), ("p", 20)]
    perfect = evaluate(truth, truth, tolerance=1)
    assert perfect["precision"] == perfect["recall"] == 1.0
    none = evaluate([], truth)
    assert none["recall"] == 0.0 and none["precision"] == 1.0 and none["no_detections"]
    off = evaluate([("p", 11)], [("p", 10)], tolerance=1)
    assert off["precision"] == off["recall"] == 1.0
    miss = evaluate([("p", 12), ("q", 10)], [("p", 10)], tolerance=1)
    assert miss["precision"] == 0.0 and miss["recall"] == 0.0


def test_evaluate_latency():
    truth = GroundTruth([("p", 10, "c#0"), ("p", 11, "c#0"), ("p", 30, "c#1")])
    out = evaluate([("p", 11), ("p", 29)], truth)
    assert out["latency"] == {"c#0": 1, "c#1": -1}
