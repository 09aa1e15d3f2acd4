"""Per-study differential expression: CPM filtering and a closed-form NB LRT.

The test is a deliberately simple stand-in for a full GLM pipeline: library
sizes are computed once from the unfiltered matrix, size factors are
library sizes over their geometric mean, group means are averages of
size-factor-normalized counts, and the dispersion is a moment estimate with
a floor and optional shrinkage toward the across-gene trimmed mean.  With
those plugged in, the likelihood-ratio statistic against a shared-mean null
is closed-form and referred to chi-square with one degree of freedom.

Anything that produces a calibrated p-value and a log2 fold change per gene
can substitute for this module; the meta-analysis layer only consumes those
two numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import trim_mean

from .simulate import CASE, CONTROL, StudyCounts
from .stats import std_normal_upper_tail

__all__ = [
    "CountsMatrix",
    "PerStudyResult",
    "filter_low_expression",
    "size_factors",
    "nb_lrt_test",
    "run_per_study",
]

DISPERSION_FLOOR = 1e-8
DEFAULT_CPM_THRESHOLD = 0.85
DEFAULT_SHRINK_WEIGHT = 0.2
DEFAULT_TRIM_PROPORTION = 0.1
DEFAULT_PSEUDO_COUNT = 0.25

_TINY_MEAN = 1e-12  # keeps log(mu) finite for all-zero groups


@dataclass(frozen=True)
class CountsMatrix:
    """A genes-by-samples integer count matrix with condition labels.

    ``library_sizes`` defaults to the column sums; a filtered matrix carries
    the sizes of the matrix it was derived from (they are deliberately not
    recomputed, so CPM and size factors stay anchored to the full library).
    """

    gene_ids: tuple[str, ...]
    sample_ids: tuple[str, ...]
    conditions: tuple[str, ...]
    counts: np.ndarray
    library_sizes: np.ndarray | None = None

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise ValueError(f"counts must be 2-d, got shape {counts.shape}")
        g, n = counts.shape
        if g != len(self.gene_ids) or n != len(self.sample_ids) or n != len(self.conditions):
            raise ValueError("counts shape does not match gene/sample labels")
        if np.any(counts < 0) or not np.all(np.equal(np.mod(counts, 1), 0)):
            raise ValueError("counts must be nonnegative integers")
        bad = set(self.conditions) - {CASE, CONTROL}
        if bad:
            raise ValueError(f"unknown condition labels {sorted(bad)}; use {CASE!r}/{CONTROL!r}")
        if CASE not in self.conditions or CONTROL not in self.conditions:
            raise ValueError("need at least one sample per condition")
        if self.library_sizes is None:
            object.__setattr__(self, "library_sizes", counts.sum(axis=0).astype(float))
        else:
            lib = np.asarray(self.library_sizes, dtype=float)
            if lib.shape != (n,):
                raise ValueError("library_sizes length does not match sample count")
            object.__setattr__(self, "library_sizes", lib)

    @classmethod
    def from_study_counts(cls, sc: StudyCounts) -> "CountsMatrix":
        return cls(sc.gene_ids, sc.sample_ids, sc.conditions, sc.counts)

    @property
    def is_case(self) -> np.ndarray:
        return np.array([c == CASE for c in self.conditions])


@dataclass(frozen=True)
class PerStudyResult:
    """One gene's per-study test outcome; filtered genes carry no p-value."""

    gene_id: str
    p_raw: float | None
    log2fc: float | None
    filtered: bool


def filter_low_expression(
    m: CountsMatrix,
    cpm_threshold: float = DEFAULT_CPM_THRESHOLD,
) -> tuple[CountsMatrix, list[str]]:
    """Drop genes expressed below ``cpm_threshold`` CPM in too many samples.

    A gene is removed when the number of samples with
    ``count * 1e6 / library_size < cpm_threshold`` is at least the smaller
    per-condition sample count.  Library sizes pass through unchanged.
    """
    lib = m.library_sizes
    if np.any(lib <= 0.0):
        raise ValueError("library sizes must all be positive")
    cpm = m.counts * 1e6 / lib
    n_below = (cpm < cpm_threshold).sum(axis=1)
    is_case = m.is_case
    min_group = min(int(is_case.sum()), int((~is_case).sum()))
    removed = n_below >= min_group
    kept = CountsMatrix(
        gene_ids=tuple(g for g, r in zip(m.gene_ids, removed) if not r),
        sample_ids=m.sample_ids,
        conditions=m.conditions,
        counts=m.counts[~removed],
        library_sizes=lib,
    )
    return kept, [g for g, r in zip(m.gene_ids, removed) if r]


def size_factors(library_sizes: np.ndarray) -> np.ndarray:
    """Library sizes scaled by their geometric mean."""
    lib = np.asarray(library_sizes, dtype=float)
    if np.any(lib <= 0.0):
        raise ValueError("library sizes must all be positive")
    return lib / np.exp(np.mean(np.log(lib)))


def _nb_loglik(y: np.ndarray, mu: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Row sums of the NB log-pmf with size 1/phi = r, mean mu."""
    mu = np.maximum(mu, _TINY_MEAN)
    terms = (
        gammaln(y + r)
        - gammaln(r)
        - gammaln(y + 1.0)
        + r * np.log(r / (r + mu))
        + y * np.log(mu / (r + mu))
    )
    return terms.sum(axis=1)


def _moment_dispersion(
    counts: np.ndarray,
    is_case: np.ndarray,
    factors: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Floored moment dispersion per gene plus the degenerate (all-zero) mask.

    ``(s^2 - ybar) / ybar^2`` with the variance pooled within condition on
    the size-factor-normalized scale; single-replicate conditions contribute
    no degrees of freedom.
    """
    x = np.asarray(counts, dtype=float) / factors
    n1 = int(is_case.sum())
    n2 = is_case.size - n1
    m_null = x.mean(axis=1)
    df = n1 + n2 - 2
    if df > 0:
        ss = np.zeros(x.shape[0])
        if n1 > 1:
            ss += x[:, is_case].var(axis=1, ddof=1) * (n1 - 1)
        if n2 > 1:
            ss += x[:, ~is_case].var(axis=1, ddof=1) * (n2 - 1)
        pooled_var = ss / df
    else:
        pooled_var = np.zeros(x.shape[0])
    degenerate = m_null <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        moment = (pooled_var - m_null) / np.square(m_null)
    phi = np.maximum(DISPERSION_FLOOR, np.where(degenerate, DISPERSION_FLOOR, moment))
    return phi, degenerate


def _lrt_batch(
    counts: np.ndarray,
    is_case: np.ndarray,
    factors: np.ndarray,
    shrink_target: float | None,
    shrink_weight: float,
    pseudo_count: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized LRT over a genes-by-samples block.

    Returns (p_raw, log2fc, dispersion) arrays.  ``shrink_target`` of None
    skips shrinkage and uses the raw (floored) moment estimate.
    """
    y = np.asarray(counts, dtype=float)
    x = y / factors
    m_case = x[:, is_case].mean(axis=1)
    m_control = x[:, ~is_case].mean(axis=1)
    m_null = x.mean(axis=1)

    phi, degenerate = _moment_dispersion(counts, is_case, factors)
    if shrink_target is not None:
        phi = (1.0 - shrink_weight) * phi + shrink_weight * shrink_target

    r = 1.0 / phi[:, None]
    mu_alt = np.where(is_case, m_case[:, None], m_control[:, None]) * factors
    mu_null = m_null[:, None] * factors
    d = 2.0 * (_nb_loglik(y, mu_alt, r) - _nb_loglik(y, mu_null, r))
    # the plug-in group means are not exact NB MLEs, so tiny negative D can occur
    d = np.maximum(d, 0.0)

    p = 2.0 * std_normal_upper_tail(np.sqrt(d))
    log2fc = np.log2((m_case + pseudo_count) / (m_control + pseudo_count))
    p = np.where(degenerate, 1.0, p)
    log2fc = np.where(degenerate, 0.0, log2fc)
    return p, log2fc, phi


def nb_lrt_test(
    gene_counts: np.ndarray,
    condition_labels: Sequence[str],
    size_factors_: np.ndarray,
    dispersion_shrink_target: float | None = None,
    shrink_weight: float = DEFAULT_SHRINK_WEIGHT,
    pseudo_count: float = DEFAULT_PSEUDO_COUNT,
) -> tuple[float, float]:
    """Likelihood-ratio DE test for a single gene.

    Parameters
    ----------
    gene_counts : array_like
        Raw counts for one gene across samples.
    condition_labels : sequence of str
        ``"case"``/``"control"`` per sample; both must appear.
    size_factors_ : array_like
        Per-sample scaling factors (see :func:`size_factors`).
    dispersion_shrink_target : float, optional
        Across-gene trimmed-mean dispersion; when given, the gene's moment
        estimate is shrunk toward it with weight ``shrink_weight``.

    Returns
    -------
    (p_raw, log2fc)
        Two-sided chi-square(1) p-value and the pseudo-counted log2 ratio of
        normalized group means (case over control).
    """
    labels = list(condition_labels)
    is_case = np.array([c == CASE for c in labels])
    bad = set(labels) - {CASE, CONTROL}
    if bad:
        raise ValueError(f"unknown condition labels {sorted(bad)}")
    if not is_case.any() or is_case.all():
        raise ValueError("need at least one sample per condition")
    y = np.asarray(gene_counts, dtype=float).reshape(1, -1)
    if y.shape[1] != is_case.size:
        raise ValueError("gene_counts and condition_labels lengths differ")
    p, lfc, _ = _lrt_batch(
        y, is_case, np.asarray(size_factors_, dtype=float),
        dispersion_shrink_target, shrink_weight, pseudo_count,
    )
    return float(p[0]), float(lfc[0])


def run_per_study(
    m: CountsMatrix,
    cpm_threshold: float = DEFAULT_CPM_THRESHOLD,
    shrink_weight: float = DEFAULT_SHRINK_WEIGHT,
    trim_proportion: float = DEFAULT_TRIM_PROPORTION,
    pseudo_count: float = DEFAULT_PSEUDO_COUNT,
) -> list[PerStudyResult]:
    """Filter, normalize, and test one study's counts.

    Results come back in input gene order; genes removed by the
    low-expression filter are flagged and carry no statistics.
    """
    kept, removed = filter_low_expression(m, cpm_threshold)
    removed_set = set(removed)
    results: dict[str, PerStudyResult] = {
        g: PerStudyResult(g, None, None, True) for g in removed_set
    }
    if kept.gene_ids:
        factors = size_factors(kept.library_sizes)
        is_case = kept.is_case
        raw_phi, degenerate = _moment_dispersion(kept.counts, is_case, factors)
        target = None
        if shrink_weight > 0.0:
            usable = raw_phi[~degenerate]
            target = float(trim_mean(usable, trim_proportion)) if usable.size else None
        p, lfc, _ = _lrt_batch(
            kept.counts, is_case, factors, target, shrink_weight, pseudo_count
        )
        for i, g in enumerate(kept.gene_ids):
            results[g] = PerStudyResult(g, float(p[i]), float(lfc[i]), False)
    return [results[g] for g in m.gene_ids]
