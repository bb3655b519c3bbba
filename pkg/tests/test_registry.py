import itertools
import json

import pytest
from hypothesis import given, settings, strategies as st

from spamtrace.ingest import ReviewUnit
from spamtrace.registry import RegistryError, UserRegistry


def rv(uid, pid, ts, rating=5):
    return ReviewUnit(uid, pid, ts, rating)


def test_first_and_second_review():
    reg = UserRegistry()
    assert reg.observe_review(rv("u1", "p", 100), 0) == (True, 0)
    assert reg.observe_review(rv("u1", "p", 700), 0) == (False, 600)
    assert reg.users["u1"].total_review_count == 2
    assert reg.users["u1"].first_review_time == 100


def test_users_are_independent():
    reg = UserRegistry()
    reg.observe_review(rv("a", "p", 1), 0)
    reg.observe_review(rv("b", "p", 5), 0)
    assert reg.observe_review(rv("a", "p", 9), 0) == (False, 8)
    assert reg.observe_review(rv("b", "p", 9), 0) == (False, 4)


def test_brand_new_single_review_is_singleton_and_first_timer():
    reg = UserRegistry()
    reg.observe_review(rv("u", "p", 1), 0)
    assert reg.close_window_user_stats("p", 0) == (1, 1)


def test_two_products_in_one_window_is_not_singleton():
    # every ordering of the two reviews gives the same answer for both products
    for first, second in itertools.permutations(["p", "q"]):
        reg = UserRegistry()
        reg.observe_review(rv("u", first, 1), 0)
        reg.observe_review(rv("u", second, 2), 0)
        assert reg.close_window_user_stats("p", 0) == (0, 1)
        assert reg.close_window_user_stats("q", 0) == (0, 1)


def test_established_user_is_neither():
    reg = UserRegistry()
    reg.observe_review(rv("u", "old", 1), 0)
    reg.close_window_user_stats("old", 0)
    reg.observe_review(rv("u", "p", 10**6), 3)
    assert reg.close_window_user_stats("p", 3) == (0, 0)


def test_repeat_review_of_same_product_is_not_singleton():
    reg = UserRegistry()
    reg.observe_review(rv("u", "p", 1), 0)
    reg.observe_review(rv("u", "p", 2), 0)
    assert reg.close_window_user_stats("p", 0) == (0, 1)


def test_close_twice_and_close_early_are_errors():
    reg = UserRegistry()
    reg.observe_review(rv("u", "p", 1), 0)
    reg.close_window_user_stats("p", 0)
    with pytest.raises(RegistryError):
        reg.close_window_user_stats("p", 0)
    with pytest.raises(RegistryError):
        reg.close_window_user_stats("p", 5)


def test_review_into_closed_window_is_an_error():
    reg = UserRegistry()
    reg.observe_review(rv("u", "p", 1), 0)
    reg.close_window_user_stats("p", 0)
    with pytest.raises(RegistryError):
        reg.observe_review(rv("v", "p", 2), 0)


events = st.lists(
    st.tuples(st.sampled_from("abcdef"), st.sampled_from("pqr"), st.integers(0, 3)), max_size=60
)


def _replay(evs):
    """Feed (user, product, window) events in window order, closing every
    (product, window) at the end of its window."""
    reg = UserRegistry()
    evs = sorted(evs, key=lambda e: e[2])
    stats = {}
    for w in range(4):
        reg.advance(w)
        win = [e for e in evs if e[2] == w]
        for i, (u, p, _) in enumerate(win):
            reg.observe_review(rv(u, p, w * 1000 + i), w)
        for p in "pqr":
            n = sum(1 for e in win if e[1] == p)
            stats[p, w] = (reg.close_window_user_stats(p, w), n)
    return reg, stats


@settings(max_examples=200)
@given(events)
def test_count_invariants(evs):
    reg, stats = _replay(evs)
    for (p, w), ((single, first), n) in stats.items():
        assert single <= first <= n
    # first-timers summed over products = distinct users first seen in the window
    firsts = {}
    for u, p, w in sorted(evs, key=lambda e: e[2]):
        firsts.setdefault(u, w)
    for w in range(4):
        # a first-timer reviewing two products counts once per product
        per_product = {
            (u, p) for u, p, ww in evs if ww == w and firsts[u] == w
        }
        assert sum(stats[p, w][0][1] for p in "pqr") == len(per_product)
        assert len({u for u, _ in per_product}) == sum(1 for v in firsts.values() if v == w)


@given(events)
def test_replay_is_deterministic(evs):
    a, _ = _replay(evs)
    b, _ = _replay(evs)
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)


def test_snapshot_round_trip(tmp_path):
    reg = UserRegistry()
    reg.observe_review(rv("u", "p", 1), 0)
    reg.observe_review(rv("v", "q", 2), 0)
    reg.close_window_user_stats("p", 0)
    path = tmp_path / "reg.json"
    reg.save(path)
    back = UserRegistry.load(path)
    assert back.to_dict() == reg.to_dict()
    # the pending key survives and closes identically
    assert back.close_window_user_stats("q", 0) == reg.close_window_user_stats("q", 0)


def test_snapshot_header_is_checked():
    with pytest.raises(RegistryError):
        UserRegistry.from_dict({"format": "other", "version": 1})
    data = UserRegistry().to_dict()
    data["version"] = 99
    with pytest.raises(RegistryError):
        UserRegistry.from_dict(data)
