"""Estimator-style front doors over the functional core.

``MetaPValueCombiner`` is a stateless transformer: a long-format evidence
frame goes in, a per-gene combined-results frame comes out.
``NegativeBinomialLRT`` follows the fit-then-read-attributes pattern of
sklearn's univariate feature scoring: ``fit(X, y)`` on a samples-by-genes
count matrix computes per-gene p-values and fold changes.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from . import detest
from .combine import combine_batch, GeneEvidence
from .degcall import DegCriteria, call_degs
from .validation import check_condition_labels, check_manifest, check_stats_frame

__all__ = ["MetaPValueCombiner", "NegativeBinomialLRT"]

RESULT_COLUMNS = (
    "gene_id",
    "method",
    "n_g",
    "p_combined",
    "p_bh",
    "concordant",
    "effective_direction",
    "n_present",
    "mean_abs_log2fc",
    "effect",
)


class MetaPValueCombiner(TransformerMixin, BaseEstimator):
    """Combine per-study (p-value, log2fc) evidence into meta-level results.

    Parameters
    ----------
    manifest : sequence of StudyMeta or DataFrame
        Study identities and replicate counts (columns ``study_id``,
        ``replicates_case``, ``replicates_control`` when a frame).
    method : {"fin", "in", "min"}, default "fin"
        Combination rule.
    weight_override : dict, optional
        Positive per-study weights replacing replicate-count weights;
        squared weights are renormalized per gene over present studies.

    Examples
    --------
    >>> import pandas as pd
    >>> from finmeta import MetaPValueCombiner, StudyMeta
    >>> manifest = [StudyMeta("s1", 10, 10), StudyMeta("s2", 10, 10)]
    >>> X = pd.DataFrame({
    ...     "gene_id": ["g1", "g1"], "study_id": ["s1", "s2"],
    ...     "p_value": [0.05, 0.05], "log2fc": [1.2, 1.4]})
    >>> round(MetaPValueCombiner(manifest).fit_transform(X)["p_combined"][0], 5)
    0.01
    """

    def __init__(self, manifest=None, method: str = "fin", weight_override=None):
        self.manifest = manifest
        self.method = method
        self.weight_override = weight_override

    def fit(self, X, y=None):
        """Validate inputs; the combiner learns nothing from data."""
        check_manifest(self.manifest)
        check_stats_frame(X)
        return self

    @staticmethod
    def _evidence(frame: pd.DataFrame) -> list[GeneEvidence]:
        return [
            GeneEvidence(
                gene_id,
                list(zip(group["study_id"], group["p_value"], group["log2fc"])),
            )
            for gene_id, group in frame.groupby("gene_id", sort=False)
        ]

    def transform(self, X) -> pd.DataFrame:
        """Combine evidence rows into one result row per gene."""
        manifest = check_manifest(self.manifest)
        evidence = self._evidence(check_stats_frame(X))
        results = combine_batch(evidence, manifest, self.method, self.weight_override)
        return pd.DataFrame(
            {
                "gene_id": [r.gene_id for r in results],
                "method": [r.method for r in results],
                "n_g": [r.n_g for r in results],
                "p_combined": [r.p_combined for r in results],
                "p_bh": [r.p_bh for r in results],
                "concordant": [r.concordant for r in results],
                "effective_direction": [r.effective_direction for r in results],
                "n_present": [r.n_present for r in results],
                "mean_abs_log2fc": [r.mean_abs_log2fc for r in results],
                "effect": [r.effect_string for r in results],
            },
            columns=list(RESULT_COLUMNS),
        )

    def degs(self, X, alpha: float = 0.05, lfc_threshold: float = 1.0) -> pd.DataFrame:
        """Transform, then apply DEG thresholds; rows sorted by |n_g| desc."""
        manifest = check_manifest(self.manifest)
        evidence = self._evidence(check_stats_frame(X))
        results = combine_batch(evidence, manifest, self.method, self.weight_override)
        records = call_degs(results, DegCriteria(alpha, lfc_threshold), self.method)
        return pd.DataFrame(
            {
                "gene_id": [d.gene_id for d in records],
                "n_g": [d.n_g for d in records],
                "mean_abs_log2fc": [d.mean_abs_log2fc for d in records],
                "effect": [d.effect_string for d in records],
                "bh_p": [d.p_bh for d in records],
            }
        )


class NegativeBinomialLRT(BaseEstimator):
    """Per-study differential expression over a samples-by-genes count matrix.

    After ``fit(X, y)`` (``y`` gives each sample's condition as
    ``"case"``/``"control"`` or booleans with True = case):

    * ``pvalues_`` — per-gene two-sided LRT p-values (NaN where filtered)
    * ``log2fc_`` — per-gene case/control log2 fold changes (NaN where filtered)
    * ``filtered_`` — boolean mask of genes removed by the CPM filter

    Parameters mirror the underlying test: CPM filter threshold, dispersion
    shrinkage weight and trim proportion, fold-change pseudo-count.
    """

    def __init__(
        self,
        cpm_threshold: float = detest.DEFAULT_CPM_THRESHOLD,
        shrink_weight: float = detest.DEFAULT_SHRINK_WEIGHT,
        trim_proportion: float = detest.DEFAULT_TRIM_PROPORTION,
        pseudo_count: float = detest.DEFAULT_PSEUDO_COUNT,
    ):
        self.cpm_threshold = cpm_threshold
        self.shrink_weight = shrink_weight
        self.trim_proportion = trim_proportion
        self.pseudo_count = pseudo_count

    def fit(self, X, y):
        """Filter, normalize, and test every gene (column) of ``X``."""
        if isinstance(X, pd.DataFrame):
            gene_ids = tuple(str(c) for c in X.columns)
            counts = X.to_numpy()
        else:
            counts = np.asarray(X)
            if counts.ndim != 2:
                raise ValueError(f"X must be 2-d (samples x genes), got shape {counts.shape}")
            gene_ids = tuple(f"g{i}" for i in range(counts.shape[1]))
        conditions = check_condition_labels(y, counts.shape[0])
        matrix = detest.CountsMatrix(
            gene_ids=gene_ids,
            sample_ids=tuple(f"sample_{i}" for i in range(counts.shape[0])),
            conditions=conditions,
            counts=counts.T,
        )
        results = detest.run_per_study(
            matrix,
            cpm_threshold=self.cpm_threshold,
            shrink_weight=self.shrink_weight,
            trim_proportion=self.trim_proportion,
            pseudo_count=self.pseudo_count,
        )
        self.n_features_in_ = len(gene_ids)
        self.feature_names_in_ = np.asarray(gene_ids, dtype=object)
        self.filtered_ = np.array([r.filtered for r in results])
        self.pvalues_ = np.array(
            [np.nan if r.filtered else r.p_raw for r in results], dtype=float
        )
        self.log2fc_ = np.array(
            [np.nan if r.filtered else r.log2fc for r in results], dtype=float
        )
        return self
