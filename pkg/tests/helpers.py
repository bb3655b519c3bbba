"""Stream builders shared by the pipeline and acceptance tests."""

from spamtrace.ingest import DEFAULT_DELTA_T, ReviewUnit
from spamtrace.synth import DEFAULT_ORIGIN

RATINGS = (5, 4, 4, 3, 5)


def steady_stream(n_products, n_windows, per_window=5, burst=None, origin=DEFAULT_ORIGIN):
    """Deterministic organic traffic: every product gets the same reviews
    from the same accounts at the same offsets in every window.

    ``burst`` maps (product index, window) -> extra five-star singleton
    reviews, which is the only source of anomalies.
    """
    burst = burst or {}
    out = []
    for w in range(n_windows):
        base = origin + w * DEFAULT_DELTA_T
        for p in range(n_products):
            pid = f"p{p:04d}"
            for j in range(per_window):
                ts = base + 3600 * (1 + 20 * j) + p
                out.append(ReviewUnit(f"u{p}_{j}", pid, ts, RATINGS[j % len(RATINGS)]))
            for j in range(burst.get((p, w), 0)):
                out.append(ReviewUnit(f"s{p}_{w}_{j}", pid, base + 7200 + 60 * j + p, 5))
    out.sort(key=lambda r: r.timestamp)
    return out
