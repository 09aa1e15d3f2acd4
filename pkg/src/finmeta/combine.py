"""Directional inverse-normal combination of per-study evidence.

Three combiners over per-gene (p-value, log2 fold change) pairs from multiple
studies:

* ``IN``  — weighted sum of normal quantiles ``Phi^-1(1 - p)``, one-sided p.
* ``MIN`` — the same quantiles folded to magnitudes and re-signed by each
  study's fold-change direction, two-sided p.
* ``FIN`` — IN when all present studies agree on direction, MIN otherwise.

All three share one vectorized kernel, so FIN's branches are bit-identical to
the corresponding IN/MIN outputs, not merely close.  Genes may be missing from
some studies; weights are renormalized over the studies actually present.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .stats import bh_adjust, clamp_p_values, std_normal_quantile, std_normal_upper_tail

__all__ = [
    "StudyMeta",
    "GeneEvidence",
    "CombinedResult",
    "METHODS",
    "direction",
    "study_weights",
    "combine_in",
    "combine_min",
    "combine_fin",
    "combine_batch",
]

METHODS = ("IN", "MIN", "FIN")

ABSENT_GLYPH = "."
_SIGN_GLYPHS = {1: "+", -1: "-"}


@dataclass(frozen=True)
class StudyMeta:
    """One study's identity and replicate counts (cases, controls)."""

    study_id: str
    replicates_case: int
    replicates_control: int

    def __post_init__(self) -> None:
        if self.replicates_case < 1 or self.replicates_control < 1:
            raise ValueError(
                f"study {self.study_id!r}: replicate counts must be >= 1, "
                f"got ({self.replicates_case}, {self.replicates_control})"
            )

    @property
    def total_replicates(self) -> int:
        return self.replicates_case + self.replicates_control


@dataclass(frozen=True)
class GeneEvidence:
    """Per-study evidence for one gene.

    ``entries`` holds ``(study_id, p_raw, log2fc)`` tuples, one per study in
    which the gene survived filtering; a study without an entry is treated as
    missing for this gene.
    """

    gene_id: str
    entries: tuple[tuple[str, float, float], ...]

    def __init__(self, gene_id: str, entries: Iterable[tuple[str, float, float]]):
        object.__setattr__(self, "gene_id", gene_id)
        object.__setattr__(self, "entries", tuple(entries))
        if not self.entries:
            raise ValueError(f"gene {gene_id!r}: evidence must contain at least one study")
        seen = [e[0] for e in self.entries]
        if len(set(seen)) != len(seen):
            raise ValueError(f"gene {gene_id!r}: more than one entry for a study")


@dataclass
class CombinedResult:
    """One gene's combined statistic, p-values, and direction bookkeeping.

    ``p_bh`` is filled by :func:`combine_batch` (it needs the whole gene pool);
    per-gene combiners leave it ``None``.  ``effect_string`` shows the
    per-study direction glyph in manifest order, ``.`` marking absence.
    """

    gene_id: str
    method: str
    n_g: float
    p_combined: float
    p_bh: float | None
    concordant: bool
    effective_direction: int
    n_present: int
    mean_abs_log2fc: float
    effect_string: str


def direction(log2fc: float) -> int:
    """Direction of expression from the sign of a log2 fold change.

    Zero maps to +1 (deterministic tie rule; a measure-zero event for
    continuous statistics).
    """
    if not np.isfinite(log2fc):
        raise ValueError(f"log2fc must be finite, got {log2fc!r}")
    return 1 if log2fc >= 0.0 else -1


def _check_manifest(manifest: Sequence[StudyMeta]) -> dict[str, int]:
    index = {s.study_id: k for k, s in enumerate(manifest)}
    if len(index) != len(manifest):
        raise ValueError("manifest contains duplicate study ids")
    if not index:
        raise ValueError("manifest is empty")
    return index


def _squared_weight_basis(
    manifest: Sequence[StudyMeta],
    weight_override: Mapping[str, float] | None,
) -> np.ndarray:
    """Per-study squared-weight mass before per-gene renormalization.

    Default mass is the total replicate count; a user override substitutes
    positive per-study weights whose squares are renormalized instead.
    """
    if weight_override is None:
        return np.array([float(s.total_replicates) for s in manifest])
    mass = np.empty(len(manifest))
    for k, s in enumerate(manifest):
        if s.study_id not in weight_override:
            raise ValueError(f"weight override missing study {s.study_id!r}")
        v = float(weight_override[s.study_id])
        if not np.isfinite(v) or v <= 0.0:
            raise ValueError(f"weight override for study {s.study_id!r} must be positive")
        mass[k] = v * v
    return mass


def study_weights(
    manifest: Sequence[StudyMeta],
    present: Iterable[str],
    weight_override: Mapping[str, float] | None = None,
) -> dict[str, float]:
    """Replicate-count weights for the studies where a gene is present.

    Parameters
    ----------
    manifest : sequence of StudyMeta
        All studies in the meta-analysis.
    present : iterable of str
        Study ids where the gene has evidence; must be a nonempty subset of
        the manifest.
    weight_override : mapping, optional
        User-supplied positive per-study weights replacing replicate counts;
        squared weights are renormalized over the present studies.

    Returns
    -------
    dict
        ``study_id -> w_s`` with ``w_s = sqrt(mass_s / sum(mass over present))``;
        the squared weights sum to 1 over the present studies.
    """
    index = _check_manifest(manifest)
    present_ids = list(present)
    if not present_ids:
        raise ValueError("present study set is empty")
    unknown = [sid for sid in present_ids if sid not in index]
    if unknown:
        raise ValueError(f"present ids not in manifest: {unknown}")
    mass = _squared_weight_basis(manifest, weight_override)
    rows = np.array([index[sid] for sid in present_ids])
    total = mass[rows].sum()
    return {sid: float(np.sqrt(mass[index[sid]] / total)) for sid in present_ids}


def _combine_arrays(
    genes: Sequence[GeneEvidence],
    manifest: Sequence[StudyMeta],
    weight_override: Mapping[str, float] | None,
):
    """Flatten gene evidence and evaluate all three combined statistics.

    Returns a dict of per-gene arrays; the FIN columns are ``np.where``
    selections of the IN/MIN columns, which is what makes branch agreement
    exact to the bit.
    """
    index = _check_manifest(manifest)
    n_present = np.array([len(g.entries) for g in genes], dtype=np.intp)
    starts = np.concatenate(([0], np.cumsum(n_present)[:-1]))

    flat_sidx = np.empty(int(n_present.sum()), dtype=np.intp)
    flat_p = np.empty(flat_sidx.size)
    flat_lfc = np.empty(flat_sidx.size)
    pos = 0
    for g in genes:
        for sid, p_raw, lfc in g.entries:
            if sid not in index:
                raise ValueError(f"gene {g.gene_id!r}: unknown study id {sid!r}")
            if not np.isfinite(lfc):
                raise ValueError(f"gene {g.gene_id!r}: log2fc must be finite")
            flat_sidx[pos] = index[sid]
            flat_p[pos] = p_raw
            flat_lfc[pos] = lfc
            pos += 1

    p = clamp_p_values(flat_p)
    q = -std_normal_quantile(p)  # Phi^-1(1-p), computed on the accurate tail
    b = np.where(flat_lfc >= 0.0, 1.0, -1.0)

    mass = _squared_weight_basis(manifest, weight_override)
    entry_mass = mass[flat_sidx]
    gene_mass = np.add.reduceat(entry_mass, starts)
    w = np.sqrt(entry_mass / np.repeat(gene_mass, n_present))

    n_in = np.add.reduceat(w * q, starts)
    n_min = np.add.reduceat(w * b * np.abs(q), starts)
    sign_sum = np.add.reduceat(b, starts)
    concordant = np.abs(sign_sum) == n_present
    common_dir = np.where(b[starts] >= 0.0, 1, -1)

    p_in = std_normal_upper_tail(n_in)
    p_min = 2.0 * std_normal_upper_tail(np.abs(n_min))
    dir_min = np.where(n_min >= 0.0, 1, -1)

    return {
        "n_present": n_present,
        "mean_abs_log2fc": np.add.reduceat(np.abs(flat_lfc), starts) / n_present,
        "concordant": concordant,
        "IN": (n_in, p_in, np.where(concordant, common_dir, 1)),
        "MIN": (n_min, p_min, dir_min),
        "FIN": (
            np.where(concordant, n_in, n_min),
            np.where(concordant, p_in, p_min),
            np.where(concordant, common_dir, dir_min),
        ),
        "effect": _effect_strings(genes, index, b, len(manifest)),
    }


def _effect_strings(genes, index, signs, n_studies: int) -> list[str]:
    out = []
    pos = 0
    for g in genes:
        glyphs = [ABSENT_GLYPH] * n_studies
        for sid, _, _ in g.entries:
            glyphs[index[sid]] = _SIGN_GLYPHS[1 if signs[pos] >= 0 else -1]
            pos += 1
        out.append("".join(glyphs))
    return out


def _normalize_method(method: str) -> str:
    m = method.upper()
    if m not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return m


def combine_batch(
    genes: Sequence[GeneEvidence],
    manifest: Sequence[StudyMeta],
    method: str,
    weight_override: Mapping[str, float] | None = None,
) -> list[CombinedResult]:
    """Combine every gene with one method and BH-adjust over the whole batch.

    Weights are renormalized per gene over its present studies; ``p_bh`` is
    the Benjamini-Hochberg adjustment of ``p_combined`` across all submitted
    genes (the full pool, not per concordance class).
    """
    m = _normalize_method(method)
    ids = [g.gene_id for g in genes]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate gene ids in batch")
    if not genes:
        return []
    cols = _combine_arrays(genes, manifest, weight_override)
    n_g, p_combined, eff_dir = cols[m]
    p_bh = bh_adjust(p_combined)
    return [
        CombinedResult(
            gene_id=ids[i],
            method=m,
            n_g=float(n_g[i]),
            p_combined=float(p_combined[i]),
            p_bh=float(p_bh[i]),
            concordant=bool(cols["concordant"][i]),
            effective_direction=int(eff_dir[i]),
            n_present=int(cols["n_present"][i]),
            mean_abs_log2fc=float(cols["mean_abs_log2fc"][i]),
            effect_string=cols["effect"][i],
        )
        for i in range(len(genes))
    ]


def _combine_single(gene: GeneEvidence, manifest, method: str, weight_override) -> CombinedResult:
    m = _normalize_method(method)
    cols = _combine_arrays([gene], manifest, weight_override)
    n_g, p_combined, eff_dir = cols[m]
    return CombinedResult(
        gene_id=gene.gene_id,
        method=m,
        n_g=float(n_g[0]),
        p_combined=float(p_combined[0]),
        p_bh=None,
        concordant=bool(cols["concordant"][0]),
        effective_direction=int(eff_dir[0]),
        n_present=int(cols["n_present"][0]),
        mean_abs_log2fc=float(cols["mean_abs_log2fc"][0]),
        effect_string=cols["effect"][0],
    )


def combine_in(
    gene: GeneEvidence,
    manifest: Sequence[StudyMeta],
    weight_override: Mapping[str, float] | None = None,
) -> CombinedResult:
    """Plain weighted inverse-normal combination, one-sided p.

    ``N_g = sum_s w_s Phi^-1(1 - p_s)`` with no direction factor and
    ``p = 1 - Phi(N_g)``.  The concordance flag is still computed; discordant
    genes keep direction +1 (tie rule) and are expected to be removed by the
    DEG-calling layer.
    """
    return _combine_single(gene, manifest, "IN", weight_override)


def combine_min(
    gene: GeneEvidence,
    manifest: Sequence[StudyMeta],
    weight_override: Mapping[str, float] | None = None,
) -> CombinedResult:
    """Direction-aware combination: re-signed quantile magnitudes, two-sided p.

    ``N_g = sum_s w_s B_s |Phi^-1(1 - p_s)|`` where ``B_s`` is the per-study
    direction, ``p = 2 (1 - Phi(|N_g|))``, and the effective direction is the
    sign of ``N_g`` (+1 on a tie).  Studies pulling in opposite directions
    cancel instead of reinforcing.
    """
    return _combine_single(gene, manifest, "MIN", weight_override)


def combine_fin(
    gene: GeneEvidence,
    manifest: Sequence[StudyMeta],
    weight_override: Mapping[str, float] | None = None,
) -> CombinedResult:
    """Fused combination: IN when directions agree, MIN when they conflict.

    Concordant genes get IN's statistic and one-sided p bit-for-bit;
    discordant genes get MIN's statistic and two-sided p bit-for-bit, with
    effective direction from the sign of the statistic.
    """
    return _combine_single(gene, manifest, "FIN", weight_override)
