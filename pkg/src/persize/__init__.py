"""persize: choose how many items to recommend, per user.

Calibrates any recommender's ranking scores into interaction
probabilities, estimates expected list utility (NDCG, PDCG, F1, TP) at
every candidate size, and emits the size that maximizes it — plus
baselines, an evaluation harness, and a cross-domain budget allocator.
"""

from .calibrate import (
    CalibrationSet,
    FitConfig,
    PlattParams,
    build_calibration_set,
    ece,
    ece_report,
    fit_all_users,
    fit_global,
    fit_user,
)
from .dataset import (
    CandidateSet,
    InteractionSet,
    SplitDataset,
    candidate_items,
    compact,
    kcore_filter,
    load_interactions,
    split,
)
from .multidomain import Allocation, DomainCurves, allocate, brute_force_allocate
from .poibin import CountDistribution, distribution, distribution_batch, leave_one_out
from .scorer import (
    BPRConfig,
    DegenerateUserError,
    RankedList,
    ScoreModel,
    ScoreTable,
    import_scores,
    export_scores,
    rank_topk,
    score,
    train_bpr,
)
from .selection import (
    EvaluationReport,
    PersonalizedRec,
    baseline_fixed,
    baseline_rand,
    baseline_val_k,
    evaluate,
    oracle_k,
    perk_select,
    recommend,
)
from .utility import (
    Measure,
    PrefixStats,
    UtilityCurve,
    expected_curve_approx,
    expected_curve_exact,
    expected_curves,
    expected_curves_batch,
    expected_pdcg,
    realized_curve,
    realized_utility,
)

__version__ = "0.1.0"
