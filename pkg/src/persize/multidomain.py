"""Splitting a total recommendation budget across domains.

Given one user's expected-utility curve per domain and a cap N on the total
number of slots, pick per-domain sizes maximizing the summed expected
utility. This is a bounded-knapsack instance solved exactly by dynamic
programming over (domain, remaining budget); a brute-force twin exists as a
test oracle. Ties break toward the lexicographically smallest size vector
in sorted domain order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .utility import Measure


@dataclass(frozen=True)
class DomainCurves:
    """One user's expected-utility curves, one per domain, same measure."""

    user: int
    measure: Measure
    curves: dict  # domain id -> np.ndarray of length K

    def domain_ids(self) -> list:
        return sorted(self.curves)


@dataclass(frozen=True)
class Allocation:
    sizes: dict  # domain id -> chosen size (0 allowed when permitted)
    total: int
    objective: float


def _values(curves: DomainCurves, K: int) -> list[np.ndarray]:
    vals = []
    for dom in curves.domain_ids():
        v = np.asarray(curves.curves[dom], dtype=np.float64)
        if len(v) < K:
            raise ValueError(f"domain {dom!r}: curve shorter than K={K}")
        vals.append(v[:K])
    return vals


def _domain_value(vals: list[np.ndarray], x: int, k: int) -> float:
    return 0.0 if k == 0 else float(vals[x][k - 1])


def allocate(curves: DomainCurves, N: int, K: int, allow_zero: bool = True) -> Allocation:
    """Exact DP over (domain, budget); O(domains * N) states, O(K) moves.

    With ``allow_zero`` off every domain needs at least one slot, so N must
    cover the domain count. Negative curve values (possible for PDCG) are
    handled natively; with zeros allowed, an all-negative domain gets none.
    """
    doms = curves.domain_ids()
    x_count = len(doms)
    if x_count == 0:
        raise ValueError("no domains to allocate")
    if N < 0:
        raise ValueError(f"budget must be >= 0, got {N}")
    if not allow_zero and N < x_count:
        raise ValueError(f"budget {N} cannot give {x_count} domains one slot each")
    vals = _values(curves, K)
    kmin = 0 if allow_zero else 1

    # f[x][b]: best objective of domains x.. with budget b, summed right-to-left
    neg_inf = -np.inf
    f = np.full((x_count + 1, N + 1), neg_inf)
    f[x_count, :] = 0.0
    for x in range(x_count - 1, -1, -1):
        for b in range(N + 1):
            best = neg_inf
            for k in range(kmin, min(K, b) + 1):
                rest = f[x + 1, b - k]
                if rest == neg_inf:
                    continue
                cand = _domain_value(vals, x, k) + rest
                if cand > best:
                    best = cand
            f[x, b] = best
    if f[0, N] == neg_inf:
        raise ValueError("allocation infeasible under the given budget")

    sizes = {}
    b = N
    for x in range(x_count):
        target = f[x, b]
        for k in range(kmin, min(K, b) + 1):
            rest = f[x + 1, b - k]
            if rest != neg_inf and _domain_value(vals, x, k) + rest == target:
                sizes[doms[x]] = k
                b -= k
                break
        else:
            raise RuntimeError("DP reconstruction failed")  # pragma: no cover
    total = sum(sizes.values())
    return Allocation(sizes=sizes, total=total, objective=float(f[0, N]))


def brute_force_allocate(
    curves: DomainCurves,
    N: int,
    K: int,
    allow_zero: bool = True,
    max_combos: int = 10**6,
) -> Allocation:
    """Exhaustive oracle with the same objective arithmetic and tie-break."""
    doms = curves.domain_ids()
    x_count = len(doms)
    if x_count == 0:
        raise ValueError("no domains to allocate")
    if not allow_zero and N < x_count:
        raise ValueError(f"budget {N} cannot give {x_count} domains one slot each")
    kmin = 0 if allow_zero else 1
    if (K - kmin + 1) ** x_count > max_combos:
        raise ValueError("combination count exceeds the brute-force bound")
    vals = _values(curves, K)

    best_obj = -np.inf
    best_vec = None
    for vec in product(range(kmin, K + 1), repeat=x_count):
        if sum(vec) > N:
            continue
        # Right-fold so float addition order matches the DP exactly.
        obj = 0.0
        for x in range(x_count - 1, -1, -1):
            obj = _domain_value(vals, x, vec[x]) + obj
        if obj > best_obj:
            best_obj = obj
            best_vec = vec
    if best_vec is None:
        raise ValueError("allocation infeasible under the given budget")
    sizes = dict(zip(doms, best_vec))
    return Allocation(sizes=sizes, total=sum(best_vec), objective=float(best_obj))
