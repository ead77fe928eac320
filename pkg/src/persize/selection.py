"""Choosing each user's recommendation-list size, plus baselines and the
held-out evaluation harness.

The personalized sizer ranks a user's candidates, calibrates the scores
into probabilities, builds the expected-utility curve over sizes 1..K, and
returns the prefix at the argmax. Baselines choose the size by a global
constant, uniformly at random, by validation utility, or (as an upper
bound) by test utility. Evaluation scores every method's emitted prefix
against held-out test positives over the identical user population.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import calibrate
from .dataset import SplitDataset
from .scorer import DegenerateUserError, ScoreTable
from .utility import (
    DEFAULT_M,
    EXACT_MODE_CAP,
    Measure,
    UtilityCurve,
    expected_curves,
    realized_curve,
)

DEFAULT_K = 50
FIXED_BASELINE_KS = (1, 5, 10, 20, 50)

METHOD_PERK = "perk"
METHOD_RAND = "rand"
METHOD_VAL_K = "val_k"
METHOD_ORACLE = "oracle"


def fixed_method_name(k: int) -> str:
    return f"top-{k}"


@dataclass(frozen=True)
class PersonalizedRec:
    """One user's emitted list: the first k_max entries of their top-K."""

    user: int
    k_max: int
    items: np.ndarray
    expected_value: float
    method: str


@dataclass(frozen=True)
class EvaluationReport:
    """Average realized utility per method and measure, plus per-user rows."""

    averages: dict  # method -> {measure name -> mean realized utility}
    n_users: int
    config: dict
    per_user: tuple = field(repr=False, default=())  # (user, method, measure, k, value)


def perk_select(curve: UtilityCurve) -> int:
    """1-based argmax of the curve; ties resolve to the smallest size."""
    if len(curve) == 0:
        raise ValueError("empty utility curve")
    return int(np.argmax(curve.values)) + 1


def recommend(
    user: int,
    scores: ScoreTable,
    params: calibrate.PlattParams,
    measure: Measure,
    K: int = DEFAULT_K,
    M: int = DEFAULT_M,
    mode: str = "approx",
    exact_cap: int = EXACT_MODE_CAP,
) -> PersonalizedRec:
    """Emit the expected-utility-maximizing prefix for one user.

    The candidate universe is whatever the score table holds for the user;
    the count distribution uses all of it, not just the top-K prefix.
    """
    items, vals = scores.get(user)
    if len(items) == 0:
        raise DegenerateUserError(f"user {user} has no scored candidates")
    order = np.lexsort((items, -vals))
    ranked_items = items[order]
    all_probs = calibrate.apply(params, vals[order])
    curve = expected_curves(
        all_probs[: min(K, len(all_probs))], all_probs, [measure], M=M, K=K,
        mode=mode, exact_cap=exact_cap,
    )[measure]
    k_max = perk_select(curve)
    return PersonalizedRec(
        user=int(user),
        k_max=k_max,
        items=ranked_items[:k_max],
        expected_value=float(curve.values[k_max - 1]),
        method=METHOD_PERK,
    )


def baseline_fixed(user: int, scores: ScoreTable, k: int, K: int = DEFAULT_K) -> PersonalizedRec:
    """Globally fixed size: the top-min(k, |candidates|) prefix."""
    items, vals = scores.get(user)
    if len(items) == 0:
        raise DegenerateUserError(f"user {user} has no scored candidates")
    order = np.lexsort((items, -vals))[: min(k, K)]
    return PersonalizedRec(
        user=int(user),
        k_max=len(order),
        items=items[order],
        expected_value=float("nan"),
        method=fixed_method_name(k),
    )


def baseline_rand(user: int, K: int, seed: int = 0) -> int:
    """Uniform size in [1, K], seeded per user (thread-count independent)."""
    rng = np.random.default_rng([seed, int(user), 0x72616E64])
    return int(rng.integers(1, K + 1))


def _argmax_size(measure: Measure, prefix_labels, total_relevant: int) -> int:
    """Smallest size maximizing realized utility of the labeled prefix."""
    if len(prefix_labels) == 0 or total_relevant == 0:
        return 1
    curve = realized_curve(measure, prefix_labels, total_relevant)
    return int(np.argmax(curve)) + 1


def baseline_val_k(
    user: int,
    scores: ScoreTable,
    val_items,
    measure: Measure,
    K: int = DEFAULT_K,
) -> int:
    """Size maximizing validation utility along the user's ranking.

    The ranking here is over everything the table scored (validation items
    included), since the validation positives must be rankable to score.
    Users without validation positives fall back to size 1.
    """
    items, vals = scores.get(user)
    order = np.lexsort((items, -vals))[:K]
    labels = np.isin(items[order], np.asarray(list(val_items), dtype=np.int64))
    return _argmax_size(measure, labels.astype(np.float64), len(val_items))


def oracle_k(
    user: int,
    scores: ScoreTable,
    test_items,
    measure: Measure,
    K: int = DEFAULT_K,
) -> int:
    """Size maximizing test utility: the per-user upper bound."""
    items, vals = scores.get(user)
    order = np.lexsort((items, -vals))[:K]
    labels = np.isin(items[order], np.asarray(list(test_items), dtype=np.int64))
    return _argmax_size(measure, labels.astype(np.float64), len(test_items))


def default_methods(K: int = DEFAULT_K) -> list[str]:
    methods = [METHOD_PERK]
    methods += [fixed_method_name(k) for k in FIXED_BASELINE_KS if k <= K]
    methods += [METHOD_RAND, METHOD_VAL_K, METHOD_ORACLE]
    return methods


def _evaluate_user(
    user: int,
    split: SplitDataset,
    scores: ScoreTable,
    params_by_user: dict,
    measures,
    methods,
    K: int,
    M: int,
    mode: str,
    seed: int,
    exclude_val: bool,
    exact_cap: int,
):
    """Realized utility of each (method, measure) for one user.

    Returns None for users that cannot be evaluated (no test positives, no
    candidates, or no calibration parameters).
    """
    test_items = split.test.items_of(user)
    if len(test_items) == 0 or user not in scores:
        return None
    items, vals = scores.get(user)
    if len(items) == 0:
        return None

    order = np.lexsort((items, -vals))
    full_items = items[order]
    full_scores = vals[order]
    val_items = split.val.items_of(user)
    if exclude_val and len(val_items):
        keep = ~np.isin(full_items, val_items)
        eval_items = full_items[keep]
        eval_scores = full_scores[keep]
    else:
        eval_items = full_items
        eval_scores = full_scores
    if len(eval_items) == 0:
        return None

    kmax = min(K, len(eval_items))
    test_labels = np.isin(eval_items[:K], test_items).astype(np.float64)
    s_test = len(test_items)
    realized = {m: realized_curve(m, test_labels, s_test) for m in measures}

    params = params_by_user.get(int(user))
    if params is None and METHOD_PERK in methods:
        return None
    perk_k: dict = {}
    if METHOD_PERK in methods:
        perk_probs = calibrate.apply(params, eval_scores)
        curves = expected_curves(
            perk_probs[:kmax], perk_probs, measures, M=M, K=K,
            mode=mode, exact_cap=exact_cap,
        )
        perk_k = {m: perk_select(curves[m]) for m in measures}
    val_labels = np.isin(full_items[:K], val_items).astype(np.float64)

    rows = []
    for measure in measures:
        for method in methods:
            if method == METHOD_PERK:
                k = perk_k[measure]
            elif method == METHOD_RAND:
                k = min(baseline_rand(user, K, seed), len(eval_items))
            elif method == METHOD_VAL_K:
                k = min(_argmax_size(measure, val_labels, len(val_items)), len(eval_items))
            elif method == METHOD_ORACLE:
                k = _argmax_size(measure, test_labels, s_test)
            elif method.startswith("top-"):
                k = min(int(method[4:]), kmax)
            else:
                raise ValueError(f"unknown method {method!r}")
            rows.append((int(user), method, measure.value, k, float(realized[measure][k - 1])))
    return rows


def evaluate(
    split: SplitDataset,
    scores: ScoreTable,
    params_by_user: dict,
    measures=tuple(Measure),
    methods=None,
    K: int = DEFAULT_K,
    M: int = DEFAULT_M,
    mode: str = "approx",
    seed: int = 0,
    exclude_val: bool = True,
    exact_cap: int = EXACT_MODE_CAP,
    threads: int = 1,
) -> EvaluationReport:
    """Score every method on every user holding at least one test positive.

    All methods emit prefixes of the same per-user ranking (validation
    positives excluded by default), so their averages are comparable and
    the test-label argmax dominates pointwise.
    """
    from .util import parallel_map

    measures = [Measure(m) if not isinstance(m, Measure) else m for m in measures]
    methods = list(methods) if methods is not None else default_methods(K)

    def worker(user):
        return _evaluate_user(
            user, split, scores, params_by_user, measures, methods,
            K, M, mode, seed, exclude_val, exact_cap,
        )

    users = sorted(int(u) for u in split.users)
    results = parallel_map(worker, users, threads)
    rows = []
    for res in results:
        if res is not None:
            rows.extend(res)
    if not rows:
        raise ValueError("no evaluable users (every user lacks test positives)")

    n_users = len({r[0] for r in rows})
    sums: dict[tuple, float] = {}
    for _, method, measure, _, value in rows:
        sums[(method, measure)] = sums.get((method, measure), 0.0) + value
    averages = {
        method: {
            measure.value: sums[(method, measure.value)] / n_users for measure in measures
        }
        for method in methods
    }
    config = {"K": K, "M": M, "mode": mode, "seed": seed, "exclude_val": exclude_val}
    return EvaluationReport(
        averages=averages, n_users=n_users, config=config, per_user=tuple(rows)
    )
