"""Realized and expected list utilities (NDCG, PDCG, F1, TP) over sizes 1..K.

Realized values score a ranked prefix against known 0/1 relevance labels.
Expected values treat each candidate's relevance as an independent Bernoulli
variable with a calibrated probability and integrate the same formulas over
the count distribution of the total number of relevant candidates. Two modes
are provided: a fast estimator that truncates the count sum at M and reuses
one count distribution for every rank, and an exact mode that recomputes the
leave-one-out count distribution per rank and sums the full count range.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .poibin import CountDistribution, distribution

DEFAULT_M = 2000
EXACT_MODE_CAP = 2000


class Measure(Enum):
    """Utility measure: exposure-weighted relevance aggregate for a prefix."""

    NDCG = "ndcg"
    PDCG = "pdcg"
    F1 = "f1"
    TP = "tp"


@dataclass(frozen=True)
class UtilityCurve:
    """Expected utility for each candidate size k = 1..len(values)."""

    measure: Measure
    values: np.ndarray
    mode: str  # "approx" | "exact"
    user: int | None = None

    def __post_init__(self):
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class PrefixStats:
    """Prefix aggregates of ranked probabilities reused across sizes k.

    a[k] = sum of the top-k probabilities, w[k] = same discounted by rank
    exposure, ideal[j] = exposure mass of a perfect prefix of length j.
    Index 0 holds 0 so entries can be read 1-based.
    """

    a: np.ndarray
    w: np.ndarray
    ideal: np.ndarray

    @classmethod
    def from_probs(cls, p_topk: np.ndarray, ideal_len: int) -> "PrefixStats":
        disc = log_discount(np.arange(1, len(p_topk) + 1))
        a = np.concatenate([[0.0], np.cumsum(p_topk)])
        w = np.concatenate([[0.0], np.cumsum(p_topk * disc)])
        ideal = np.concatenate(
            [[0.0], np.cumsum(log_discount(np.arange(1, ideal_len + 1)))]
        )
        return cls(a=a, w=w, ideal=ideal)


def log_discount(ranks) -> np.ndarray:
    """Exposure weight 1 / log2(1 + r) for 1-based ranks."""
    return 1.0 / np.log2(1.0 + np.asarray(ranks, dtype=np.float64))


def _as_labels(prefix_labels) -> np.ndarray:
    labels = np.asarray(prefix_labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("prefix labels must be a non-empty 1-d sequence")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    return labels.astype(np.float64)


def realized_curve(measure: Measure, prefix_labels, total_relevant: int) -> np.ndarray:
    """Realized utility at every size k = 1..len(prefix_labels).

    ``total_relevant`` is the number of relevant items in the whole
    candidate set, not just the prefix; it feeds the normalizers.
    NDCG, F1, and TP are 0 by convention when it is zero.
    """
    labels = _as_labels(prefix_labels)
    s = int(total_relevant)
    hits = np.cumsum(labels)
    if s < hits[-1]:
        raise ValueError(f"total_relevant={s} is less than {int(hits[-1])} observed hits")
    ks = np.arange(1, len(labels) + 1)
    disc = log_discount(ks)

    if measure is Measure.PDCG:
        return np.cumsum((2.0 * labels - 1.0) * disc)
    if s == 0:
        return np.zeros(len(labels))
    if measure is Measure.NDCG:
        ideal = np.concatenate([[0.0], np.cumsum(disc)])
        return np.cumsum(labels * disc) / ideal[np.minimum(ks, s)]
    if measure is Measure.F1:
        return 2.0 * hits / (s + ks)
    if measure is Measure.TP:
        return hits / np.minimum(ks, s)
    raise ValueError(f"unknown measure {measure!r}")


def realized_utility(measure: Measure, prefix_labels, total_relevant: int) -> float:
    """Realized utility of the full given prefix (single size)."""
    return float(realized_curve(measure, prefix_labels, total_relevant)[-1])


def _pdcg_curve(p_topk: np.ndarray) -> np.ndarray:
    ranks = np.arange(1, len(p_topk) + 1)
    return np.cumsum((2.0 * p_topk - 1.0) * log_discount(ranks))


def expected_pdcg(p) -> float:
    """Expected PDCG of a prefix: exact by linearity, no approximation."""
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        raise ValueError("empty prefix")
    return float(_pdcg_curve(p)[-1])


def expected_curve_approx(
    measure: Measure,
    p_topk,
    all_probs,
    M: int = DEFAULT_M,
    K: int | None = None,
    dist: CountDistribution | None = None,
) -> UtilityCurve:
    """Truncated-sum estimate of expected utility for every size k.

    The count distribution is built once from ``all_probs`` (the entire
    candidate set, not just the prefix) with indices 0..M-1, the largest
    consumed by the count sum m = 1..M. It also stands in for every rank's
    leave-one-out variant; expected_curve_exact removes both shortcuts.
    ``dist`` lets callers reuse the count distribution across measures.
    Cost is O(n*M + K*M) per call.
    """
    p_topk = np.asarray(p_topk, dtype=np.float64)
    all_probs = np.asarray(all_probs, dtype=np.float64)
    if all_probs.size == 0:
        raise ValueError("empty candidate set")
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    kmax = len(p_topk)
    if K is not None and kmax != min(K, all_probs.size):
        raise ValueError(f"prefix length {kmax} != min(K={K}, n={all_probs.size})")
    if kmax == 0:
        raise ValueError("empty ranked prefix")

    if measure is Measure.PDCG:
        return UtilityCurve(measure, _pdcg_curve(p_topk), mode="approx")

    if dist is None:
        dist = distribution(all_probs, M - 1)
    d = dist.mass  # d[m-1] for m = 1..e_len
    e_len = len(d)
    stats = PrefixStats.from_probs(p_topk, ideal_len=max(kmax, e_len))
    ks = np.arange(1, kmax + 1)
    # Split the count sum at m = k: below it the normalizer varies with m,
    # above it the normalizer is frozen at k.
    kcut = np.minimum(ks, e_len)
    d_prefix = np.concatenate([[0.0], np.cumsum(d)])
    suffix = d_prefix[e_len] - d_prefix[kcut]

    if measure is Measure.NDCG:
        per_m = d / stats.ideal[1 : e_len + 1]
        head = np.concatenate([[0.0], np.cumsum(per_m)])
        values = stats.w[1:] * (head[kcut] + suffix / stats.ideal[ks])
        return UtilityCurve(measure, values, mode="approx")
    if measure is Measure.TP:
        per_m = d / np.arange(1, e_len + 1)
        head = np.concatenate([[0.0], np.cumsum(per_m)])
        values = stats.a[1:] * (head[kcut] + suffix / ks)
        return UtilityCurve(measure, values, mode="approx")
    if measure is Measure.F1:
        denom = np.arange(1, e_len + 1)[None, :] + ks[:, None]
        values = 2.0 * stats.a[1:] * (d[None, :] / denom).sum(axis=1)
        return UtilityCurve(measure, values, mode="approx")
    raise ValueError(f"unknown measure {measure!r}")


def expected_curve_exact(
    measure: Measure,
    all_probs,
    K: int,
    cap: int = EXACT_MODE_CAP,
) -> UtilityCurve:
    """Exact expected utility: per-rank leave-one-out counts, full count range.

    Removes both shortcuts of the fast estimator. Cost grows as
    min(K, n) * n^2, so candidate sets are capped (default 2000); larger
    inputs should use expected_curve_approx.
    """
    all_probs = np.asarray(all_probs, dtype=np.float64)
    n = all_probs.size
    if n == 0:
        raise ValueError("empty candidate set")
    if n > cap:
        raise ValueError(
            f"{n} candidates exceed the exact-mode cap {cap}; use approx mode"
        )
    kmax = min(K, n)
    if kmax < 1:
        raise ValueError(f"K must be >= 1, got {K}")

    if measure is Measure.PDCG:
        return UtilityCurve(measure, _pdcg_curve(all_probs[:kmax]), mode="exact")

    # contrib[r-1, m-1] = p_r * P(count without rank r = m-1), m = 1..n,
    # times the rank-r exposure when the measure discounts by position.
    contrib = np.empty((kmax, n))
    for r in range(kmax):
        loo = distribution(np.delete(all_probs, r), n - 1).mass
        contrib[r, :] = all_probs[r] * loo
    if measure is Measure.NDCG:
        contrib *= log_discount(np.arange(1, kmax + 1))[:, None]
    totals = np.cumsum(contrib, axis=0)  # totals[k-1, m-1]

    ms = np.arange(1, n + 1)
    ks = np.arange(1, kmax + 1)
    if measure is Measure.F1:
        values = (2.0 * totals / (ms[None, :] + ks[:, None])).sum(axis=1)
    elif measure is Measure.TP:
        values = (totals / np.minimum(ms[None, :], ks[:, None])).sum(axis=1)
    elif measure is Measure.NDCG:
        ideal = np.concatenate([[0.0], np.cumsum(log_discount(ms))])
        values = (totals / ideal[np.minimum(ms[None, :], ks[:, None])]).sum(axis=1)
    else:
        raise ValueError(f"unknown measure {measure!r}")
    return UtilityCurve(measure, values, mode="exact")


def expected_curves_batch(
    probs_sorted: np.ndarray,
    measures,
    M: int = DEFAULT_M,
    K: int = 50,
) -> dict:
    """Fast-estimator curves for a block of users in one set of matrix ops.

    ``probs_sorted`` is (users, n), each row in ranking order (descending).
    Returns measure -> (users, min(K, n)) value arrays. Numerically this is
    the batched twin of expected_curve_approx; large blocks amortize all
    per-user overhead and release the interpreter lock inside the heavy
    array operations, which is what makes thread pools effective.
    """
    from .poibin import distribution_batch

    probs_sorted = np.asarray(probs_sorted, dtype=np.float64)
    if probs_sorted.ndim != 2 or probs_sorted.shape[1] == 0:
        raise ValueError("expected a non-empty (users, n) probability matrix")
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    n_users, n = probs_sorted.shape
    kmax = min(K, n)
    p_topk = probs_sorted[:, :kmax]
    disc = log_discount(np.arange(1, kmax + 1))

    out = {}
    measures = list(measures)
    if Measure.PDCG in measures:
        out[Measure.PDCG] = np.cumsum((2.0 * p_topk - 1.0) * disc, axis=1)
    rest = [m for m in measures if m is not Measure.PDCG]
    if not rest:
        return out

    mass, _ = distribution_batch(probs_sorted, M - 1)
    e_len = mass.shape[1]
    ks = np.arange(1, kmax + 1)
    kcut = np.minimum(ks, e_len)
    ideal = np.concatenate([[0.0], np.cumsum(log_discount(np.arange(1, max(e_len, kmax) + 1)))])
    d_prefix = np.concatenate([np.zeros((n_users, 1)), np.cumsum(mass, axis=1)], axis=1)
    suffix = d_prefix[:, [e_len]] - d_prefix[:, kcut]

    a_stats = np.cumsum(p_topk, axis=1)
    for measure in rest:
        if measure is Measure.NDCG:
            w_stats = np.cumsum(p_topk * disc, axis=1)
            per_m = mass / ideal[1 : e_len + 1]
            head = np.concatenate([np.zeros((n_users, 1)), np.cumsum(per_m, axis=1)], axis=1)
            out[measure] = w_stats * (head[:, kcut] + suffix / ideal[ks])
        elif measure is Measure.TP:
            per_m = mass / np.arange(1, e_len + 1)
            head = np.concatenate([np.zeros((n_users, 1)), np.cumsum(per_m, axis=1)], axis=1)
            out[measure] = a_stats * (head[:, kcut] + suffix / ks)
        elif measure is Measure.F1:
            ms = np.arange(1, e_len + 1)
            values = np.empty((n_users, kmax))
            for k in ks:
                values[:, k - 1] = 2.0 * a_stats[:, k - 1] * (mass @ (1.0 / (ms + k)))
            out[measure] = values
        else:
            raise ValueError(f"unknown measure {measure!r}")
    return out


def expected_curves(
    p_topk,
    all_probs,
    measures,
    M: int = DEFAULT_M,
    K: int | None = None,
    mode: str = "approx",
    exact_cap: int = EXACT_MODE_CAP,
) -> dict:
    """Curves for several measures at once, sharing the count distribution."""
    out = {}
    dist = None
    for measure in measures:
        if mode == "approx":
            if dist is None and measure is not Measure.PDCG:
                dist = distribution(np.asarray(all_probs, dtype=np.float64), M - 1)
            out[measure] = expected_curve_approx(measure, p_topk, all_probs, M, K, dist)
        elif mode == "exact":
            out[measure] = expected_curve_exact(measure, all_probs, K or len(p_topk), exact_cap)
        else:
            raise ValueError(f"mode must be 'approx' or 'exact', got {mode!r}")
    return out
