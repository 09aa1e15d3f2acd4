"""DEG calling on combined results, plus presence/overlap bookkeeping.

A gene is called differentially expressed when its BH-adjusted combined
p-value clears ``alpha`` and its mean absolute log2 fold change clears the
fold-change threshold.  The IN method additionally drops genes whose
per-study directions conflict before applying the thresholds (post-hoc
discordance removal); MIN and FIN keep such genes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .combine import ABSENT_GLYPH, CombinedResult, StudyMeta, _normalize_method

__all__ = [
    "DegCriteria",
    "DegRecord",
    "OverlapReport",
    "call_degs",
    "presence_counts",
    "compare_deg_sets",
]

CONCORDANT_CLASS = "same"
DISCORDANT_CLASS = "mismatched"


@dataclass(frozen=True)
class DegCriteria:
    """Significance and effect-size gates for calling DEGs."""

    alpha: float = 0.05
    lfc_threshold: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.lfc_threshold < 0.0:
            raise ValueError(f"lfc_threshold must be >= 0, got {self.lfc_threshold}")


@dataclass(frozen=True)
class DegRecord:
    """One called DEG, ready for tabular output."""

    gene_id: str
    n_g: float
    mean_abs_log2fc: float
    effective_direction: int
    concordant: bool
    p_bh: float
    effect_string: str

    @property
    def n_present(self) -> int:
        return sum(1 for ch in self.effect_string if ch != ABSENT_GLYPH)


@dataclass(frozen=True)
class OverlapReport:
    """Set arithmetic between two DEG lists, by gene id."""

    n_common: int
    n_only_a: int
    n_only_b: int
    percent_common: float


def call_degs(
    results: Sequence[CombinedResult],
    criteria: DegCriteria,
    method: str,
) -> list[DegRecord]:
    """Select DEGs from batch-combined results.

    Parameters
    ----------
    results : sequence of CombinedResult
        Must carry batch-filled ``p_bh`` values.
    criteria : DegCriteria
        Thresholds; a gene is kept iff ``p_bh < alpha`` and
        ``mean_abs_log2fc > lfc_threshold``.
    method : str
        ``"IN"`` removes discordant genes before thresholding; ``"MIN"`` and
        ``"FIN"`` do not.

    Returns
    -------
    list of DegRecord
        Sorted by ``|n_g|`` descending, ties broken by gene id.
    """
    m = _normalize_method(method)
    for r in results:
        if r.p_bh is None:
            raise ValueError(
                f"gene {r.gene_id!r} has no BH-adjusted p-value; combine as a batch first"
            )
    pool = results if m != "IN" else [r for r in results if r.concordant]
    kept = [
        DegRecord(
            gene_id=r.gene_id,
            n_g=r.n_g,
            mean_abs_log2fc=r.mean_abs_log2fc,
            effective_direction=r.effective_direction,
            concordant=r.concordant,
            p_bh=r.p_bh,
            effect_string=r.effect_string,
        )
        for r in pool
        if r.p_bh < criteria.alpha and r.mean_abs_log2fc > criteria.lfc_threshold
    ]
    kept.sort(key=lambda d: (-abs(d.n_g), d.gene_id))
    return kept


def presence_counts(
    degs: Sequence[DegRecord],
    manifest: Sequence[StudyMeta],
) -> dict[tuple[str, int], int]:
    """Tally DEGs by concordance class and number of studies present.

    Returns a dense table keyed by ``(class, k)`` for ``k = 1..S`` with
    ``class`` in ``{"same", "mismatched"}``.  A gene present in one study
    cannot conflict with itself, so ``("mismatched", 1)`` is structurally 0.
    """
    n_studies = len(manifest)
    counts = {
        (cls, k): 0
        for cls in (CONCORDANT_CLASS, DISCORDANT_CLASS)
        for k in range(1, n_studies + 1)
    }
    for d in degs:
        if len(d.effect_string) != n_studies:
            raise ValueError(
                f"gene {d.gene_id!r}: effect string {d.effect_string!r} does not "
                f"match a {n_studies}-study manifest"
            )
        k = d.n_present
        cls = CONCORDANT_CLASS if d.concordant else DISCORDANT_CLASS
        counts[(cls, k)] += 1
    return counts


def compare_deg_sets(a: Sequence[DegRecord], b: Sequence[DegRecord]) -> OverlapReport:
    """Overlap between two DEG lists; percent common is relative to ``b``.

    An empty ``b`` yields ``percent_common = 0.0``.
    """
    ids_a = [d.gene_id for d in a]
    ids_b = [d.gene_id for d in b]
    set_a, set_b = set(ids_a), set(ids_b)
    if len(set_a) != len(ids_a) or len(set_b) != len(ids_b):
        raise ValueError("duplicate gene ids within a DEG list")
    common = set_a & set_b
    percent = 100.0 * len(common) / len(set_b) if set_b else 0.0
    return OverlapReport(
        n_common=len(common),
        n_only_a=len(set_a - set_b),
        n_only_b=len(set_b - set_a),
        percent_common=percent,
    )
