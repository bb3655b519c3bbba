import json

import pytest
from hypothesis import given, strategies as st

from spamtrace.ingest import (
    OrderingError,
    ReviewParseError,
    ReviewUnit,
    assign_window,
    format_review,
    midnight_utc,
    parse_review_line,
    read_reviews,
    sort_reviews,
    validate_ordering,
    write_reviews,
)

WEEK = 604800


def test_minimal_jsonl_record():
    r = parse_review_line('{"user_id":"u1","product_id":"p1","timestamp":0,"rating":5}')
    assert r == ReviewUnit("u1", "p1", 0, 5, None)


def test_rating_out_of_range():
    with pytest.raises(ReviewParseError, match="rating out of range") as exc:
        parse_review_line('{"user_id":"u1","product_id":"p1","timestamp":0,"rating":6}', line_no=7)
    assert exc.value.line_no == 7
    assert exc.value.field == "rating"


def test_csv_field_order():
    assert parse_review_line("u2,p1,604800,1,bad app", "csv") == ReviewUnit("u2", "p1", 604800, 1, "bad app")


@pytest.mark.parametrize(
    "line, field",
    [
        ('{"product_id":"p1","timestamp":0,"rating":5}', "user_id"),
        ('{"user_id":"u1","product_id":"p1","timestamp":-1,"rating":5}', "timestamp"),
        ('{"user_id":"u1","product_id":"p1","timestamp":"x","rating":5}', "timestamp"),
        ('{"user_id":"u1","product_id":"","timestamp":3,"rating":5}', "product_id"),
    ],
)
def test_bad_records_name_the_field(line, field):
    with pytest.raises(ReviewParseError) as exc:
        parse_review_line(line, line_no=3)
    assert exc.value.field == field
    assert exc.value.line_no == 3


def test_malformed_json_and_short_csv():
    with pytest.raises(ReviewParseError):
        parse_review_line("{nope")
    with pytest.raises(ReviewParseError):
        parse_review_line("u1,p1,5", "csv")


def test_assign_window_examples():
    assert assign_window(0, 0, WEEK).index == 0
    assert assign_window(604800, 0, WEEK).index == 1
    assert assign_window(1209599, 0, WEEK).index == 1


def test_assign_window_against_scan():
    # brute force: walk window boundaries instead of dividing
    delta = 1000
    for t in range(0, 3 * delta, 7):
        idx, start = 0, 0
        while not (start <= t < start + delta):
            idx += 1
            start += delta
        assert assign_window(t, 0, delta).index == idx


def test_assign_window_rejects_early_timestamps():
    with pytest.raises(ValueError):
        assign_window(5, 10, WEEK)
    with pytest.raises(ValueError):
        assign_window(5, 0, 0)


@given(st.integers(0, 10**10), st.integers(0, 10**10), st.integers(1, 10**7))
def test_assign_window_monotone(a, b, delta):
    t1, t2 = sorted((a, b))
    assert assign_window(t1, 0, delta).index <= assign_window(t2, 0, delta).index


def _r(ts, uid="u"):
    return ReviewUnit(uid, "p", ts, 3)


def test_validate_ordering_is_stable_on_ties():
    rs = [_r(1, "a"), _r(1, "b"), _r(2, "c")]
    assert list(validate_ordering(rs)) == rs


def test_validate_ordering_reports_position():
    with pytest.raises(OrderingError) as exc:
        list(validate_ordering([_r(2), _r(1)]))
    assert exc.value.position == 2


def test_validate_ordering_empty():
    assert list(validate_ordering([])) == []


# the csv module cannot write NUL
chars = st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00")
reviews = st.builds(
    ReviewUnit,
    st.text(chars, min_size=1, max_size=8),
    st.text(chars, min_size=1, max_size=8),
    st.integers(0, 2**40),
    st.integers(1, 5),
    st.one_of(st.none(), st.text(chars, min_size=1, max_size=30)),
)


@given(reviews)
def test_jsonl_round_trip(r):
    assert parse_review_line(format_review(r, "jsonl"), "jsonl") == r


@given(r=reviews)
def test_csv_round_trip(tmp_path_factory, r):
    # quoted newlines survive only through the file reader
    path = tmp_path_factory.mktemp("rt") / "r.csv"
    write_reviews([r], path, "csv")
    assert list(read_reviews(path, "csv")) == [r]


@given(st.lists(st.integers(0, 50), max_size=40))
def test_validate_ordering_preserves_valid_streams(ts):
    rs = [_r(t, f"u{i}") for i, t in enumerate(sorted(ts))]
    assert list(validate_ordering(rs)) == rs


def test_sort_is_stable(tmp_path):
    rs = [_r(5, "a"), _r(1, "b"), _r(5, "c"), _r(0, "d")]
    assert [r.user_id for r in sort_reviews(rs)] == ["d", "b", "a", "c"]


def test_csv_file_with_header(tmp_path):
    path = tmp_path / "in.csv"
    path.write_text("user_id,product_id,timestamp,rating,text\nu1,p1,10,4,\"ok, fine\"\n\nu2,p1,11,2\n")
    got = list(read_reviews(path, "csv", header=True))
    assert got == [ReviewUnit("u1", "p1", 10, 4, "ok, fine"), ReviewUnit("u2", "p1", 11, 2)]


def test_jsonl_file_reports_line_numbers(tmp_path):
    path = tmp_path / "in.jsonl"
    good = json.dumps({"user_id": "u", "product_id": "p", "timestamp": 1, "rating": 1})
    path.write_text(good + "\n\n" + good.replace('"rating": 1', '"rating": 9') + "\n")
    with pytest.raises(ReviewParseError) as exc:
        list(read_reviews(path))
    assert exc.value.line_no == 3


def test_midnight_utc():
    assert midnight_utc(86400 * 3 + 5000) == 86400 * 3
