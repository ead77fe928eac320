"""Split a fixed number of recommendation slots across domains.

One screen shows items from several domains; with N total slots and one
expected-utility curve per domain, the best per-domain sizes solve a small
bounded-knapsack problem. The dynamic program is exact and is checked
against brute force in the tests.
"""

import numpy as np

from persize.multidomain import DomainCurves, allocate, brute_force_allocate
from persize.utility import Measure, expected_curves

rng = np.random.default_rng(2)

# one user, three domains of very different quality
domains = {}
for name, hi in (("books", 0.8), ("music", 0.45), ("games", 0.15)):
    probs = np.sort(rng.uniform(0, hi, 60))[::-1]
    curve = expected_curves(probs[:8], probs, [Measure.F1], M=100, K=8)[Measure.F1]
    domains[name] = curve.values

curves = DomainCurves(user=0, measure=Measure.F1, curves=domains)
for budget in (3, 6, 12, 24):
    out = allocate(curves, N=budget, K=8)
    sizes = ", ".join(f"{d}={k}" for d, k in sorted(out.sizes.items()))
    print(f"budget {budget:2d}: {sizes}  (total {out.total}, "
          f"objective {out.objective:.4f})")

# exhaustive search agrees, including the tie-break
out = allocate(curves, N=12, K=8)
ref = brute_force_allocate(curves, N=12, K=8)
assert out.sizes == ref.sizes and out.objective == ref.objective
print("dynamic program matches brute force at budget 12")
