"""finmeta: direction-aware inverse-normal meta-analysis for RNA-seq DE.

Combines per-study differential expression evidence (p-values and log2 fold
changes) across studies with three rules — plain inverse-normal (IN), a
direction-aware modification (MIN), and a fused rule (FIN) that uses IN for
direction-concordant genes and MIN for conflicting ones — plus the
surrounding pipeline: a per-study negative-binomial test, a multi-study
count simulator, DEG calling, and a benchmark harness.
"""

from .combine import (
    CombinedResult,
    GeneEvidence,
    StudyMeta,
    combine_batch,
    combine_fin,
    combine_in,
    combine_min,
    direction,
    study_weights,
)
from .degcall import (
    DegCriteria,
    DegRecord,
    OverlapReport,
    call_degs,
    compare_deg_sets,
    presence_counts,
)
from .detest import (
    CountsMatrix,
    PerStudyResult,
    filter_low_expression,
    nb_lrt_test,
    run_per_study,
    size_factors,
)
from .estimators import MetaPValueCombiner, NegativeBinomialLRT
from .evaluate import (
    EvalReport,
    RocCurve,
    TrialMetrics,
    average_roc,
    observed_fdr,
    roc_auc,
    run_experiment,
    unique_deg_metrics,
)
from .simulate import (
    SimConfig,
    SimTruth,
    StudyCounts,
    negative_binomial,
    sample_truth,
    setting_config,
    simulate_counts,
)
from .stats import (
    bh_adjust,
    ks_uniform_stat,
    std_normal_cdf,
    std_normal_quantile,
    std_normal_upper_tail,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # stats kernels
    "std_normal_cdf",
    "std_normal_upper_tail",
    "std_normal_quantile",
    "bh_adjust",
    "ks_uniform_stat",
    # combination
    "StudyMeta",
    "GeneEvidence",
    "CombinedResult",
    "direction",
    "study_weights",
    "combine_in",
    "combine_min",
    "combine_fin",
    "combine_batch",
    # DEG calling
    "DegCriteria",
    "DegRecord",
    "OverlapReport",
    "call_degs",
    "presence_counts",
    "compare_deg_sets",
    # simulation
    "SimConfig",
    "SimTruth",
    "StudyCounts",
    "setting_config",
    "negative_binomial",
    "sample_truth",
    "simulate_counts",
    # per-study test
    "CountsMatrix",
    "PerStudyResult",
    "filter_low_expression",
    "size_factors",
    "nb_lrt_test",
    "run_per_study",
    # evaluation
    "RocCurve",
    "TrialMetrics",
    "EvalReport",
    "roc_auc",
    "average_roc",
    "observed_fdr",
    "unique_deg_metrics",
    "run_experiment",
    # estimator API
    "MetaPValueCombiner",
    "NegativeBinomialLRT",
]
