"""End to end: choose each user's list size and score it against held-out
test interactions, next to the baselines.

The personalized sizer ranks candidates, calibrates scores, builds the
expected-utility curve, and cuts the list at its argmax. Baselines pick a
global constant, a random size, the best size on validation labels, or
(as an upper bound) the best size on test labels.
"""

from pathlib import Path

import numpy as np

from persize import calibrate, dataset, scorer, selection
from persize.utility import Measure

root = Path(__file__).resolve().parent.parent
iset, _ = dataset.load_interactions(root / "data" / "synth200" / "interactions.tsv")
dense, _, _ = dataset.compact(dataset.kcore_filter(iset, 20))
split = dataset.split(dense, seed=0)

model = scorer.train_bpr(
    split.train, scorer.BPRConfig(d=16, epochs=10, learning_rate=0.05, seed=0)
)
cands = (dataset.candidate_items(u, split) for u in sorted(split.users.tolist()))
table = scorer.build_score_table(model, cands)

calsets = [calibrate.build_calibration_set(u, split, table) for u in table.users()]
params, _ = calibrate.fit_all_users(calsets)

report = selection.evaluate(split, table, params, K=20, M=200, seed=0)
print(f"average realized utility over {report.n_users} users (K=20):")
header = "  ".join(f"{m.value:>7s}" for m in Measure)
print(f"{'method':>8s}  {header}")
for method in selection.default_methods(20):
    row = "  ".join(f"{report.averages[method][m.value]:7.4f}" for m in Measure)
    print(f"{method:>8s}  {row}")

sizes = sorted(k for _, m, meas, k, _ in report.per_user if m == "perk" and meas == "f1")
print(f"\npersonalized F1 sizes: min {sizes[0]}, median {sizes[len(sizes) // 2]}, "
      f"max {sizes[-1]} (a fixed size cannot serve all of these at once)")

one = selection.recommend(
    sorted(table.users())[0], table, params[sorted(table.users())[0]],
    Measure.F1, K=20, M=200,
)
print(f"user {one.user}: emit {one.k_max} items, "
      f"expected F1 {one.expected_value:.4f}, items {one.items.tolist()}")
