import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spamtrace.detectors.threshold import (
    PooledThresholds,
    ScoreDistribution,
    cantelli_threshold,
    threshold_update,
)


def dist_of(xs):
    d = ScoreDistribution()
    for x in xs:
        threshold_update(d, x)
    return d


def test_unit_gaussian_example():
    d = ScoreDistribution(count=100, mean=0.0, m2=100.0)  # mean 0, population stdev 1
    assert cantelli_threshold(d, 0.04) == pytest.approx(math.sqrt(24))
    assert cantelli_threshold(d, 0.04) == pytest.approx(4.899, abs=1e-3)


def test_eta_towards_one_gives_the_mean():
    d = dist_of([1.0, 2.0, 3.0, 10.0])
    assert cantelli_threshold(d, 1 - 1e-12) == pytest.approx(d.mean, abs=1e-5)


def test_identical_scores():
    d = dist_of([2.5] * 40)
    assert d.mean == 2.5 and d.std == 0.0
    delta = cantelli_threshold(d, 0.04)
    assert delta == 2.5
    assert not 2.5 > delta


def test_too_few_samples_and_bad_eta():
    assert cantelli_threshold(dist_of([1.0]), 0.04) is None
    assert cantelli_threshold(dist_of([1.0] * 10), 0.04, min_samples=30) is None
    with pytest.raises(ValueError):
        cantelli_threshold(dist_of([1.0, 2.0]), 0.0)
    with pytest.raises(ValueError):
        threshold_update(ScoreDistribution(), -1.0)
    with pytest.raises(ValueError):
        threshold_update(ScoreDistribution(), float("nan"))


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=200))
def test_running_moments_match_batch(xs):
    d = dist_of(xs)
    a = np.array(xs)
    assert d.mean == pytest.approx(a.mean(), rel=1e-9, abs=1e-9)
    assert d.variance == pytest.approx(a.var(), rel=1e-9, abs=1e-6)


@given(st.lists(st.floats(0, 1e4), max_size=60), st.lists(st.floats(0, 1e4), max_size=60))
def test_merge_matches_concatenation(xs, ys):
    d = dist_of(xs)
    d.merge(dist_of(ys))
    want = dist_of(xs + ys)
    assert d.count == want.count
    assert d.mean == pytest.approx(want.mean, rel=1e-9, abs=1e-9)
    assert d.m2 == pytest.approx(want.m2, rel=1e-9, abs=1e-5)


@pytest.mark.parametrize(
    "draw",
    [
        lambda rng, n: rng.normal(size=n) ** 2,
        lambda rng, n: rng.exponential(size=n),
        lambda rng, n: np.abs(rng.standard_t(3, size=n)),
        lambda rng, n: rng.uniform(size=n),
        lambda rng, n: rng.pareto(2.5, size=n),
    ],
)
def test_cantelli_bound_monte_carlo(draw):
    rng = np.random.default_rng(0)
    for eta in (0.01, 0.04, 0.2):
        xs = draw(rng, 10_000)
        delta = cantelli_threshold(dist_of(xs), eta)
        # the bound holds for the sample's own distribution
        assert np.mean(xs >= delta) <= eta


def test_pooling_is_shared_and_staged():
    pool = PooledThresholds(0.04, min_samples=3)
    for s in (1.0, 1.0, 1.0):
        pool.stage("num_pos", s)
    assert pool.threshold("num_pos") is None  # staged scores are invisible until commit
    pool.commit()
    assert pool.threshold("num_pos") == 1.0
    # a large score from another product raises the threshold everyone reads
    pool.stage("num_pos", 100.0)
    pool.commit()
    assert pool.threshold("num_pos") > 1.0
    assert pool.threshold("gap_entropy") is None
