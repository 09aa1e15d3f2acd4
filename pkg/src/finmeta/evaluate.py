"""Benchmark harness: simulate, test per study, combine, call DEGs, score.

One trial runs the full pipeline on fresh simulated data; an experiment
aggregates trials into per-method mean/std AUC, observed FDR, unique-DEG
quality, and averaged ROC curves.  ROC/AUC rank the direction-concordant
genes by combined p-value (the direction-aware combiners differ from the
one-sided route only on discordant genes, whose meta p-values answer a
different question); FDR and DEG metrics use the full called lists.  Trials
are independent and may run on a thread pool; aggregation is an ordered
reduction over trial index, so the numbers do not depend on the degree of
parallelism.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .combine import GeneEvidence, combine_batch
from .degcall import DegCriteria, DegRecord, call_degs
from .detest import CountsMatrix, run_per_study
from .simulate import SimConfig, SimTruth, sample_truth, simulate_counts

__all__ = [
    "RocCurve",
    "TrialMetrics",
    "EvalReport",
    "FPR_GRID",
    "roc_auc",
    "average_roc",
    "observed_fdr",
    "unique_deg_metrics",
    "run_experiment",
]

DEFAULT_METHODS = ("IN", "MIN", "FIN")

# Fixed abscissa for vertical ROC averaging: 0, 0.01, ..., 1.00.
FPR_GRID = np.arange(101) / 100


@dataclass(frozen=True)
class RocCurve:
    """An ROC curve as parallel fpr/tpr arrays ending at (1,1).

    Raw curves from :func:`roc_auc` start at (0,0); vertically averaged
    curves may start above it, since the TPR attainable at zero FPR can be
    positive.
    """

    fpr: np.ndarray
    tpr: np.ndarray

    def __post_init__(self) -> None:
        fpr = np.asarray(self.fpr, dtype=float)
        tpr = np.asarray(self.tpr, dtype=float)
        if fpr.shape != tpr.shape or fpr.ndim != 1 or fpr.size < 2:
            raise ValueError("fpr and tpr must be equal-length 1-d arrays")
        if np.any(np.diff(fpr) < 0.0) or np.any(np.diff(tpr) < 0.0):
            raise ValueError("ROC coordinates must be nondecreasing")
        if fpr[0] != 0.0 or tpr[0] < 0.0 or fpr[-1] != 1.0 or tpr[-1] != 1.0:
            raise ValueError("ROC curve must run from fpr 0 to (1, 1)")
        object.__setattr__(self, "fpr", fpr)
        object.__setattr__(self, "tpr", tpr)


def roc_auc(scores, labels) -> tuple[RocCurve, float]:
    """ROC curve and area for ranking scores against boolean labels.

    Higher scores rank first.  Tied scores advance the curve diagonally in
    one step, so the trapezoid area equals the Mann-Whitney concordance
    statistic with ties counted half.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-d arrays")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one positive and one negative label")
    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    s_sorted = s[order]
    # one curve point per distinct score (last index of each tie block)
    block_ends = np.nonzero(np.append(np.diff(s_sorted) != 0.0, True))[0]
    tp = np.cumsum(y_sorted)[block_ends]
    fp = block_ends + 1 - tp
    fpr = np.concatenate(([0.0], fp / n_neg))
    tpr = np.concatenate(([0.0], tp / n_pos))
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))
    return RocCurve(fpr, tpr), auc


def _tpr_on_grid(curve: RocCurve, grid: np.ndarray) -> np.ndarray:
    # collapse vertical segments: at a repeated fpr the attainable tpr is the top
    fpr, tpr = curve.fpr, curve.tpr
    keep = np.append(np.diff(fpr) > 0.0, True)
    return np.interp(grid, fpr[keep], tpr[keep])


def average_roc(curves: Sequence[RocCurve]) -> RocCurve:
    """Vertical average: per-curve TPR interpolated on FPR_GRID, then meaned."""
    if not curves:
        raise ValueError("need at least one curve to average")
    stack = np.vstack([_tpr_on_grid(c, FPR_GRID) for c in curves])
    return RocCurve(FPR_GRID.copy(), stack.mean(axis=0))


def observed_fdr(degs: Sequence[DegRecord], truth: SimTruth) -> float:
    """Fraction of called DEGs that are not truly DE (0 when none called)."""
    is_de = dict(zip(truth.gene_ids, truth.is_de))
    n_false = 0
    for d in degs:
        if d.gene_id not in is_de:
            raise ValueError(f"DEG {d.gene_id!r} is not covered by the truth table")
        n_false += not is_de[d.gene_id]
    return n_false / max(1, len(degs))


def unique_deg_metrics(
    method_degs: Sequence[DegRecord],
    in_degs: Sequence[DegRecord],
    truth: SimTruth,
    effective_directions: Mapping[str, int] | None = None,
) -> tuple[int, float, float]:
    """Quality of the DEGs a method finds beyond the IN baseline.

    Returns ``(n_unique, tp_proportion, direction_correct_proportion)`` where
    the direction proportion is computed over the unique true positives only;
    empty denominators yield 0.
    """
    if effective_directions is None:
        effective_directions = {d.gene_id: d.effective_direction for d in method_degs}
    in_ids = {d.gene_id for d in in_degs}
    unique = [d for d in method_degs if d.gene_id not in in_ids]
    if not unique:
        return 0, 0.0, 0.0
    is_de = dict(zip(truth.gene_ids, truth.is_de))
    true_dir = dict(zip(truth.gene_ids, truth.true_direction))
    true_pos = [d for d in unique if is_de[d.gene_id]]
    tp_proportion = len(true_pos) / len(unique)
    if not true_pos:
        return len(unique), tp_proportion, 0.0
    n_correct = sum(
        1 for d in true_pos if effective_directions[d.gene_id] == true_dir[d.gene_id]
    )
    return len(unique), tp_proportion, n_correct / len(true_pos)


@dataclass(frozen=True)
class TrialMetrics:
    """Scores for one trial, keyed by method name where applicable."""

    trial_index: int
    n_genes_scored: int
    n_conflicting_genes: int
    n_true_degs: int
    auc: dict[str, float]
    observed_fdr: dict[str, float]
    n_degs: dict[str, int]
    n_discordant_degs: dict[str, int]
    n_unique_vs_in: dict[str, int]
    unique_tp_proportion: dict[str, float]
    unique_direction_correct: dict[str, float]


@dataclass(frozen=True)
class EvalReport:
    """Aggregated benchmark results for one simulation setting."""

    config: SimConfig
    methods: tuple[str, ...]
    criteria: DegCriteria
    trials: tuple[TrialMetrics, ...]
    mean_auc: dict[str, float]
    std_auc: dict[str, float]
    mean_observed_fdr: dict[str, float]
    mean_n_degs: dict[str, float]
    mean_n_discordant_degs: dict[str, float]
    mean_n_unique_vs_in: dict[str, float]
    mean_unique_tp_proportion: dict[str, float]
    mean_unique_direction_correct: dict[str, float]
    mean_n_genes_scored: float
    mean_n_conflicting_genes: float
    mean_n_true_degs: float
    averaged_roc: dict[str, RocCurve]


def _ranking_scores(results) -> np.ndarray:
    """Ranking scores for ROC: -p_combined, so smaller p ranks first and
    genes with identical p are genuine ties (counted half by roc_auc)."""
    return -np.array([r.p_combined for r in results])


def _run_trial(
    config: SimConfig,
    trial_index: int,
    methods: tuple[str, ...],
    criteria: DegCriteria,
) -> tuple[TrialMetrics, dict[str, RocCurve]]:
    truth = sample_truth(config, trial_index)
    study_counts = simulate_counts(truth, config, trial_index)

    per_gene_entries: dict[str, list[tuple[str, float, float]]] = {}
    for sc in study_counts:
        for r in run_per_study(CountsMatrix.from_study_counts(sc)):
            if not r.filtered:
                per_gene_entries.setdefault(r.gene_id, []).append(
                    (sc.study_id, r.p_raw, r.log2fc)
                )

    pool_ids = [g for g in truth.gene_ids if g in per_gene_entries]
    evidence = [GeneEvidence(g, per_gene_entries[g]) for g in pool_ids]
    is_de = dict(zip(truth.gene_ids, truth.is_de))
    labels = np.array([is_de[g] for g in pool_ids])

    wanted = list(methods)
    run_methods = wanted if "IN" in wanted else wanted + ["IN"]
    results = {m: combine_batch(evidence, config.studies, m) for m in run_methods}
    degs = {m: call_degs(results[m], criteria, m) for m in run_methods}

    # ROC ranks the direction-consistent genes; concordance is shared by all
    # methods, so every method is scored on the same subset and the adaptive
    # combiner's curve coincides with the one-sided route's there.
    concordant = np.array([r.concordant for r in results[run_methods[0]]])

    auc: dict[str, float] = {}
    curves: dict[str, RocCurve] = {}
    fdr: dict[str, float] = {}
    n_degs: dict[str, int] = {}
    n_disc: dict[str, int] = {}
    n_unique: dict[str, int] = {}
    tp_prop: dict[str, float] = {}
    dir_prop: dict[str, float] = {}
    for m in wanted:
        curves[m], auc[m] = roc_auc(
            _ranking_scores(results[m])[concordant], labels[concordant]
        )
        fdr[m] = observed_fdr(degs[m], truth)
        n_degs[m] = len(degs[m])
        n_disc[m] = sum(1 for d in degs[m] if not d.concordant)
        n_unique[m], tp_prop[m], dir_prop[m] = unique_deg_metrics(
            degs[m], degs["IN"], truth
        )

    n_conflicting = sum(1 for r in results["IN"] if not r.concordant)
    metrics = TrialMetrics(
        trial_index=trial_index,
        n_genes_scored=len(pool_ids),
        n_conflicting_genes=n_conflicting,
        n_true_degs=int(labels.sum()),
        auc=auc,
        observed_fdr=fdr,
        n_degs=n_degs,
        n_discordant_degs=n_disc,
        n_unique_vs_in=n_unique,
        unique_tp_proportion=tp_prop,
        unique_direction_correct=dir_prop,
    )
    return metrics, curves


def _mean_over_trials(trials, field: str, method: str) -> float:
    return float(np.mean([getattr(t, field)[method] for t in trials]))


def run_experiment(
    config: SimConfig,
    methods: Sequence[str] = DEFAULT_METHODS,
    criteria: DegCriteria = DegCriteria(),
    threads: int = 1,
) -> EvalReport:
    """Run ``config.n_trials`` trials and aggregate per-method metrics.

    ``threads`` parallelizes over trials; every RNG stream is keyed by
    (seed, trial, stream), so the report is identical at any thread count.
    """
    methods = tuple(m.upper() for m in methods)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    indices = range(config.n_trials)
    if threads == 1:
        outcomes = [_run_trial(config, t, methods, criteria) for t in indices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(
                pool.map(lambda t: _run_trial(config, t, methods, criteria), indices)
            )
    trials = tuple(m for m, _ in outcomes)

    mean_auc, std_auc = {}, {}
    for m in methods:
        per_trial = [t.auc[m] for t in trials]
        mean_auc[m] = float(np.mean(per_trial))
        std_auc[m] = float(np.std(per_trial, ddof=1)) if len(per_trial) > 1 else 0.0
    return EvalReport(
        config=config,
        methods=methods,
        criteria=criteria,
        trials=trials,
        mean_auc=mean_auc,
        std_auc=std_auc,
        mean_observed_fdr={m: _mean_over_trials(trials, "observed_fdr", m) for m in methods},
        mean_n_degs={m: _mean_over_trials(trials, "n_degs", m) for m in methods},
        mean_n_discordant_degs={
            m: _mean_over_trials(trials, "n_discordant_degs", m) for m in methods
        },
        mean_n_unique_vs_in={
            m: _mean_over_trials(trials, "n_unique_vs_in", m) for m in methods
        },
        mean_unique_tp_proportion={
            m: _mean_over_trials(trials, "unique_tp_proportion", m) for m in methods
        },
        mean_unique_direction_correct={
            m: _mean_over_trials(trials, "unique_direction_correct", m) for m in methods
        },
        mean_n_genes_scored=float(np.mean([t.n_genes_scored for t in trials])),
        mean_n_conflicting_genes=float(np.mean([t.n_conflicting_genes for t in trials])),
        mean_n_true_degs=float(np.mean([t.n_true_degs for t in trials])),
        averaged_roc={
            m: average_roc([c[m] for _, c in outcomes]) for m in methods
        },
    )
