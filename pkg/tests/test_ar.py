import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import solve_toeplitz

from spamtrace.detectors.ar import (
    SdarModel,
    ar_predict,
    fit_ar,
    fit_predict_batch,
    levinson_durbin,
    sdar_update,
)
from spamtrace.detectors.support import WINSOR, bounded_forecast, select_order, selection_errors


def ar_stream(rng, coef, n, noise=1.0, burn=200):
    k = len(coef)
    x = np.zeros(n + burn)
    for i in range(k, n + burn):
        x[i] = np.dot(coef, x[i - k : i][::-1]) + noise * rng.normal()
    return x[burn:]


def batch_state(values, order):
    """Equal-weight statistics recomputed from scratch."""
    v = np.asarray(values, dtype=float)
    mu = v.mean()
    z = v - mu
    # biased estimator: every lag divided by the full length
    c = np.array([np.dot(z[j:], z[: len(z) - j]) / len(z) for j in range(order + 1)])
    return mu, c


def test_levinson_matches_scipy():
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = ar_stream(rng, [0.6, -0.2, 0.1], 300)
        order = int(rng.integers(1, 6))
        c = np.array([np.mean(x[j:] * x[: len(x) - j]) for j in range(order + 1)])
        np.testing.assert_allclose(levinson_durbin(c, order), solve_toeplitz(c[:order], c[1:]), rtol=1e-9, atol=1e-12)


def test_levinson_degenerate():
    assert np.all(levinson_durbin(np.zeros(4), 3) == 0)
    # a perfectly predictable sequence stops the recursion instead of dividing by zero
    w = levinson_durbin(np.array([1.0, 1.0, 1.0]), 2)
    assert np.all(np.isfinite(w))


def test_sdar_r0_equals_batch():
    rng = np.random.default_rng(2)
    order = 3
    x = ar_stream(rng, [0.5, -0.3, 0.2], 400) + 7.0
    m = SdarModel(order, 0.0)
    scores = []
    for i, v in enumerate(x):
        s = m.update(v)
        if i < order:
            assert s is None
            continue
        scores.append(s)
        if i >= 2 * order:
            # forecast from the updated batch state: scipy solve, no recursion
            mu, c = batch_state(x[: i + 1], order)
            w = solve_toeplitz(c[:order], c[1:])
            pred = mu + np.dot(w, x[i - order : i][::-1] - mu)
            assert s == pytest.approx((v - pred) ** 2, rel=1e-6, abs=1e-9)
    mu, c = batch_state(x, order)
    assert m.mean == pytest.approx(mu, rel=1e-9)
    np.testing.assert_allclose(m.autocov, c, rtol=1e-6)
    np.testing.assert_allclose(m.coef, solve_toeplitz(c[:order], c[1:]), rtol=1e-6)
    assert m.variance == pytest.approx(np.mean(scores), rel=1e-9)


def test_sdar_constant_series():
    m = SdarModel(2, 0.01)
    for _ in range(50):
        s = sdar_update(m, 3.0)
    assert m.mean == pytest.approx(3.0)
    assert m.predict_next() == pytest.approx(3.0)
    assert s == pytest.approx(0.0, abs=1e-20)
    assert m.variance == pytest.approx(0.0, abs=1e-20)


def test_sdar_large_discount_forgets_a_level_shift():
    m = SdarModel(2, 0.5)
    for _ in range(100):
        m.update(0.0)
    for _ in range(5):
        m.update(10.0)
    assert abs(m.mean - 10.0) < 0.05 * 10.0


def test_sdar_discounted_weights_closed_form():
    # with r > 0 the mean is the normalized geometric average
    r = 0.2
    m = SdarModel(1, r)
    xs = np.random.default_rng(3).normal(size=30)
    for v in xs:
        m.update(v)
    w = (1 - r) ** np.arange(len(xs))[::-1]
    assert m.mean == pytest.approx(np.dot(w, xs) / w.sum(), rel=1e-9)


def test_sdar_rejects_bad_parameters():
    with pytest.raises(ValueError):
        SdarModel(0, 0.1)
    with pytest.raises(ValueError):
        SdarModel(2, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=30), st.integers(1, 4))
def test_fit_ar_matches_lstsq(values, order):
    v = np.asarray(values)
    if len(v) <= order:
        return
    fit = fit_ar(v, order, ridge=1e-6)
    z = v - v.mean()
    X = np.column_stack([z[order - j : len(z) - j] for j in range(1, order + 1)])
    # ridge as extra rows, so the oracle is a plain least-squares solve
    Xa = np.vstack([X, np.sqrt(1e-6) * np.eye(order)])
    ya = np.concatenate([z[order:], np.zeros(order)])
    coef = np.linalg.lstsq(Xa, ya, rcond=None)[0]
    pred_oracle = v.mean() + np.dot(coef, z[::-1][:order])
    scale = max(1.0, float(np.abs(v).max()))
    assert ar_predict(fit, v) == pytest.approx(pred_oracle, abs=1e-5 * scale)


def test_batch_fit_equals_row_by_row():
    rng = np.random.default_rng(4)
    W = rng.normal(size=(20, 12)) * 3 + 5
    for order in range(1, 6):
        want = [ar_predict(fit_ar(row, order), row) for row in W]
        np.testing.assert_allclose(fit_predict_batch(W, order), want, rtol=1e-10, atol=1e-10)


def test_bounded_forecast_stays_in_window_range():
    rng = np.random.default_rng(5)
    W = rng.normal(size=(200, 12))
    W[::7, 3] = 1e4  # outliers
    for order in range(1, 6):
        p = bounded_forecast(W, order)
        assert np.all(p >= W.min(axis=1) - 1e-12) and np.all(p <= W.max(axis=1) + 1e-12)


def _exhaustive_errors(v, n_targets, fit_window, max_order):
    """Per-target loop over fit_ar/ar_predict: the non-vectorized route."""
    i = len(v) - 1
    out = np.zeros((max_order, n_targets))
    for k in range(1, max_order + 1):
        for j, t in enumerate(range(i - n_targets, i)):
            win = v[t - fit_window : t]
            med = np.median(win)
            spread = WINSOR * 1.4826 * np.median(np.abs(win - med))
            fit = fit_ar(np.clip(win, med - spread, med + spread), k)
            pred = min(max(ar_predict(fit, win), win.min()), win.max())
            out[k - 1, j] = (v[t] - pred) ** 2
    return out


def test_selection_errors_match_exhaustive_oracle():
    rng = np.random.default_rng(6)
    for _ in range(20):
        v = ar_stream(rng, [1.2, -0.6], 40) + rng.normal() * 5
        got = selection_errors(v, 8, 12, 5)
        np.testing.assert_allclose(got, _exhaustive_errors(v, 8, 12, 5), rtol=1e-9, atol=1e-12)
        k, sums = select_order(v, 8, 12, 5)
        assert k == int(np.argmin(_exhaustive_errors(v, 8, 12, 5).sum(axis=1))) + 1


def test_order_selection_recovers_ar2():
    # with enough one-step targets the minimum-error order is the true one
    rng = np.random.default_rng(1)
    hits = 0
    for _ in range(100):
        v = ar_stream(rng, [1.5, -0.75], 341)
        k, _ = select_order(v, 300, 40)
        hits += k == 2
    assert hits >= 90
