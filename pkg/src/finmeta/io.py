"""File formats: tab-separated codecs and the JSON evaluation report.

All tables are UTF-8 TSV with fixed headers.  Absence is encoded by omitting
the row (a gene missing from a study simply has no stats row), never by
placeholder tokens.  P-values are serialized in full-precision scientific
notation (17 significant digits, exact float64 round-trip); other reals use 6
significant digits; counts are plain integers.  Writes go through a temp file
plus atomic rename so readers never observe partial output.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Iterable, Sequence

import numpy as np

from .combine import CombinedResult, GeneEvidence, StudyMeta
from .degcall import DegRecord
from .detest import CountsMatrix, PerStudyResult
from .evaluate import EvalReport, RocCurve
from .simulate import SimTruth, StudyCounts

__all__ = [
    "FileFormatError",
    "read_manifest",
    "write_manifest",
    "read_stats",
    "write_stats_rows",
    "stats_rows_from_results",
    "evidence_from_stats_rows",
    "write_deg_table",
    "read_deg_table",
    "write_results_table",
    "write_counts",
    "write_conditions",
    "read_counts",
    "write_gene_list",
    "write_truth",
    "read_truth",
    "write_roc_points",
    "read_roc_points",
    "read_weights",
    "eval_report_to_dict",
    "write_eval_report",
]

MANIFEST_HEADER = "study_id\treplicates_case\treplicates_control"
STATS_HEADER = "gene_id\tstudy_id\tp_value\tlog2fc"
DEG_HEADER = "gene_id\tN_g\tmean_abs_log2fc\teffect\tbh_p"
RESULTS_HEADER = DEG_HEADER + "\tp_combined\tconcordant\tn_present"
CONDITIONS_HEADER = "sample_id\tcondition"
TRUTH_HEADER = "gene_id\tis_de\tdelta"
ROC_HEADER = "fpr\ttpr"
WEIGHTS_HEADER = "study_id\tweight"


class FileFormatError(ValueError):
    """A malformed input file; the message carries path and line number."""


def _fmt_p(x: float) -> str:
    return f"{x:.16e}"


def _fmt_real(x: float) -> str:
    return f"{x:.6g}"


def _atomic_write(path: str, lines: Iterable[str]) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            for line in lines:
                handle.write(line)
                handle.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows(path: str, expected_header: str):
    """Yield (line_number, fields) after validating the header line."""
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if header != expected_header:
            raise FileFormatError(
                f"{path}:1: expected header {expected_header!r}, got {header!r}"
            )
        n_fields = expected_header.count("\t") + 1
        for no, line in enumerate(handle, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != n_fields:
                raise FileFormatError(
                    f"{path}:{no}: expected {n_fields} tab-separated fields, "
                    f"got {len(fields)}"
                )
            yield no, fields


def _parse_float(path: str, no: int, token: str, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise FileFormatError(f"{path}:{no}: {what} is not a number: {token!r}") from None


def _parse_int(path: str, no: int, token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise FileFormatError(f"{path}:{no}: {what} is not an integer: {token!r}") from None


# -- study manifest ---------------------------------------------------------

def read_manifest(path: str) -> list[StudyMeta]:
    studies = []
    seen = set()
    for no, (sid, case, control) in _rows(path, MANIFEST_HEADER):
        if sid in seen:
            raise FileFormatError(f"{path}:{no}: duplicate study id {sid!r}")
        seen.add(sid)
        try:
            studies.append(
                StudyMeta(
                    sid,
                    _parse_int(path, no, case, "replicates_case"),
                    _parse_int(path, no, control, "replicates_control"),
                )
            )
        except ValueError as err:
            raise FileFormatError(f"{path}:{no}: {err}") from None
    if not studies:
        raise FileFormatError(f"{path}: manifest lists no studies")
    return studies


def write_manifest(studies: Sequence[StudyMeta], path: str) -> None:
    _atomic_write(
        path,
        [MANIFEST_HEADER]
        + [f"{s.study_id}\t{s.replicates_case}\t{s.replicates_control}" for s in studies],
    )


# -- per-study summary statistics ------------------------------------------

def read_stats(path: str) -> list[tuple[str, str, float, float]]:
    """Read (gene_id, study_id, p_value, log2fc) rows, validating ranges."""
    rows = []
    seen: set[tuple[str, str]] = set()
    for no, (gene, study, p_token, lfc_token) in _rows(path, STATS_HEADER):
        p = _parse_float(path, no, p_token, "p_value")
        lfc = _parse_float(path, no, lfc_token, "log2fc")
        if not 0.0 <= p <= 1.0:
            raise FileFormatError(f"{path}:{no}: p_value {p} outside [0, 1]")
        if not np.isfinite(lfc):
            raise FileFormatError(f"{path}:{no}: log2fc must be finite")
        key = (gene, study)
        if key in seen:
            raise FileFormatError(
                f"{path}:{no}: duplicate (gene_id, study_id) pair {key!r}"
            )
        seen.add(key)
        rows.append((gene, study, p, lfc))
    return rows


def write_stats_rows(
    rows: Iterable[tuple[str, str, float, float]],
    path: str,
    append: bool = False,
) -> None:
    """Write (or append to) a summary-stats table.

    Appending skips the header when the file already has content, so a
    multi-study table can be built by repeated per-study runs.
    """
    body = [f"{g}\t{s}\t{_fmt_p(p)}\t{_fmt_real(lfc)}" for g, s, p, lfc in rows]
    if append and os.path.exists(path) and os.path.getsize(path) > 0:
        with open(path, "a", encoding="utf-8", newline="\n") as handle:
            for line in body:
                handle.write(line)
                handle.write("\n")
    else:
        _atomic_write(path, [STATS_HEADER] + body)


def stats_rows_from_results(
    study_id: str,
    results: Sequence[PerStudyResult],
) -> list[tuple[str, str, float, float]]:
    """Unfiltered per-study results as stats rows for one study."""
    return [
        (r.gene_id, study_id, r.p_raw, r.log2fc) for r in results if not r.filtered
    ]


def evidence_from_stats_rows(
    rows: Sequence[tuple[str, str, float, float]],
) -> list[GeneEvidence]:
    """Group stats rows into per-gene evidence, genes in first-seen order."""
    per_gene: dict[str, list[tuple[str, float, float]]] = {}
    for gene, study, p, lfc in rows:
        per_gene.setdefault(gene, []).append((study, p, lfc))
    return [GeneEvidence(g, entries) for g, entries in per_gene.items()]


# -- DEG and results tables -------------------------------------------------

def _deg_fields(d: DegRecord) -> str:
    return (
        f"{d.gene_id}\t{_fmt_real(d.n_g)}\t{_fmt_real(d.mean_abs_log2fc)}"
        f"\t{d.effect_string}\t{_fmt_p(d.p_bh)}"
    )


def write_deg_table(degs: Sequence[DegRecord], path: str) -> None:
    """Write called DEGs (already sorted by |N_g| descending)."""
    _atomic_write(path, [DEG_HEADER] + [_deg_fields(d) for d in degs])


def read_deg_table(path: str) -> list[DegRecord]:
    out = []
    for no, (gene, n_g_token, lfc, effect, bh) in _rows(path, DEG_HEADER):
        bad = set(effect) - {"+", "-", "."}
        if bad:
            raise FileFormatError(f"{path}:{no}: bad effect glyphs {sorted(bad)}")
        n_g = _parse_float(path, no, n_g_token, "N_g")
        # direction/concordance are not serialized; recover them from the
        # glyphs where unambiguous, else from the sign of the statistic
        if "-" not in effect:
            direction = 1
        elif "+" not in effect:
            direction = -1
        else:
            direction = 1 if n_g >= 0 else -1
        out.append(
            DegRecord(
                gene_id=gene,
                n_g=n_g,
                mean_abs_log2fc=_parse_float(path, no, lfc, "mean_abs_log2fc"),
                effective_direction=direction,
                concordant="+" not in effect or "-" not in effect,
                p_bh=_parse_float(path, no, bh, "bh_p"),
                effect_string=effect,
            )
        )
    return out


def write_results_table(results: Sequence[CombinedResult], path: str) -> None:
    """All-genes companion table: DEG columns plus combination bookkeeping."""
    lines = [RESULTS_HEADER]
    for r in results:
        p_bh = _fmt_p(r.p_bh) if r.p_bh is not None else ""
        lines.append(
            f"{r.gene_id}\t{_fmt_real(r.n_g)}\t{_fmt_real(r.mean_abs_log2fc)}"
            f"\t{r.effect_string}\t{p_bh}\t{_fmt_p(r.p_combined)}"
            f"\t{int(r.concordant)}\t{r.n_present}"
        )
    _atomic_write(path, lines)


# -- counts, conditions, truth ---------------------------------------------

def write_counts(sc: StudyCounts, path: str) -> None:
    lines = ["gene_id\t" + "\t".join(sc.sample_ids)]
    for gene, row in zip(sc.gene_ids, sc.counts):
        lines.append(gene + "\t" + "\t".join(str(int(v)) for v in row))
    _atomic_write(path, lines)


def write_conditions(sc: StudyCounts, path: str) -> None:
    _atomic_write(
        path,
        [CONDITIONS_HEADER]
        + [f"{s}\t{c}" for s, c in zip(sc.sample_ids, sc.conditions)],
    )


def read_counts(counts_path: str, conditions_path: str) -> CountsMatrix:
    """Read a counts matrix plus its condition-assignment sidecar."""
    condition_of: dict[str, str] = {}
    for no, (sample, condition) in _rows(conditions_path, CONDITIONS_HEADER):
        if sample in condition_of:
            raise FileFormatError(f"{conditions_path}:{no}: duplicate sample {sample!r}")
        condition_of[sample] = condition

    with open(counts_path, encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n").split("\t")
        if not header or header[0] != "gene_id" or len(header) < 2:
            raise FileFormatError(
                f"{counts_path}:1: expected header 'gene_id<TAB>sample...'"
            )
        samples = header[1:]
        missing = [s for s in samples if s not in condition_of]
        if missing:
            raise FileFormatError(
                f"{conditions_path}: no condition assignment for samples: "
                + ", ".join(missing)
            )
        genes = []
        matrix = []
        for no, line in enumerate(handle, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != len(samples) + 1:
                raise FileFormatError(
                    f"{counts_path}:{no}: expected {len(samples) + 1} fields, "
                    f"got {len(fields)}"
                )
            genes.append(fields[0])
            matrix.append(
                [_parse_int(counts_path, no, tok, "count") for tok in fields[1:]]
            )
    try:
        return CountsMatrix(
            gene_ids=tuple(genes),
            sample_ids=tuple(samples),
            conditions=tuple(condition_of[s] for s in samples),
            counts=np.array(matrix, dtype=np.int64).reshape(len(genes), len(samples)),
        )
    except ValueError as err:
        raise FileFormatError(f"{counts_path}: {err}") from None


def write_gene_list(gene_ids: Iterable[str], path: str) -> None:
    """One gene id per line (used for filtered-gene sidecars)."""
    _atomic_write(path, list(gene_ids))


def write_truth(truth: SimTruth, path: str) -> None:
    lines = [TRUTH_HEADER]
    for g, de, delta in zip(truth.gene_ids, truth.is_de, truth.delta):
        lines.append(f"{g}\t{int(de)}\t{_fmt_real(delta)}")
    _atomic_write(path, lines)


def read_truth(path: str) -> dict[str, tuple[bool, float]]:
    """Truth as gene_id -> (is_de, delta)."""
    out: dict[str, tuple[bool, float]] = {}
    for no, (gene, de, delta) in _rows(path, TRUTH_HEADER):
        if de not in ("0", "1"):
            raise FileFormatError(f"{path}:{no}: is_de must be 0 or 1, got {de!r}")
        if gene in out:
            raise FileFormatError(f"{path}:{no}: duplicate gene id {gene!r}")
        out[gene] = (de == "1", _parse_float(path, no, delta, "delta"))
    return out


# -- ROC points, weights, evaluation report ---------------------------------

def write_roc_points(curve: RocCurve, path: str) -> None:
    _atomic_write(
        path,
        [ROC_HEADER]
        + [f"{_fmt_real(f)}\t{_fmt_real(t)}" for f, t in zip(curve.fpr, curve.tpr)],
    )


def read_roc_points(path: str) -> RocCurve:
    fpr, tpr = [], []
    for no, (f_token, t_token) in _rows(path, ROC_HEADER):
        fpr.append(_parse_float(path, no, f_token, "fpr"))
        tpr.append(_parse_float(path, no, t_token, "tpr"))
    return RocCurve(np.array(fpr), np.array(tpr))


def read_weights(path: str) -> dict[str, float]:
    """User-supplied per-study weight overrides."""
    out: dict[str, float] = {}
    for no, (sid, w_token) in _rows(path, WEIGHTS_HEADER):
        if sid in out:
            raise FileFormatError(f"{path}:{no}: duplicate study id {sid!r}")
        w = _parse_float(path, no, w_token, "weight")
        if not w > 0.0:
            raise FileFormatError(f"{path}:{no}: weight must be positive, got {w}")
        out[sid] = w
    return out


def eval_report_to_dict(report: EvalReport) -> dict:
    """JSON-ready view of an evaluation report (insertion-ordered keys)."""
    cfg = report.config
    return {
        "setting": {
            "sigma": cfg.sigma,
            "n_genes": cfg.n_genes,
            "prop_de": cfg.prop_de,
            "base_mean_log_mu": cfg.base_mean_log_mu,
            "base_mean_log_sd": cfg.base_mean_log_sd,
            "fc_min": cfg.fc_min,
            "fc_max": cfg.fc_max,
            "disp_log_mu": cfg.disp_log_mu,
            "disp_log_sd": cfg.disp_log_sd,
            "seed": cfg.seed,
            "n_trials": cfg.n_trials,
            "studies": [
                {
                    "study_id": s.study_id,
                    "replicates_case": s.replicates_case,
                    "replicates_control": s.replicates_control,
                }
                for s in cfg.studies
            ],
        },
        "criteria": {
            "alpha": report.criteria.alpha,
            "lfc_threshold": report.criteria.lfc_threshold,
        },
        "methods": list(report.methods),
        "aggregate": {
            "mean_auc": dict(report.mean_auc),
            "std_auc": dict(report.std_auc),
            "mean_observed_fdr": dict(report.mean_observed_fdr),
            "mean_n_degs": dict(report.mean_n_degs),
            "mean_n_discordant_degs": dict(report.mean_n_discordant_degs),
            "mean_n_unique_vs_in": dict(report.mean_n_unique_vs_in),
            "mean_unique_tp_proportion": dict(report.mean_unique_tp_proportion),
            "mean_unique_direction_correct": dict(report.mean_unique_direction_correct),
            "mean_n_genes_scored": report.mean_n_genes_scored,
            "mean_n_conflicting_genes": report.mean_n_conflicting_genes,
            "mean_n_true_degs": report.mean_n_true_degs,
        },
        "trials": [
            {
                "trial_index": t.trial_index,
                "n_genes_scored": t.n_genes_scored,
                "n_conflicting_genes": t.n_conflicting_genes,
                "n_true_degs": t.n_true_degs,
                "auc": dict(t.auc),
                "observed_fdr": dict(t.observed_fdr),
                "n_degs": dict(t.n_degs),
                "n_discordant_degs": dict(t.n_discordant_degs),
                "n_unique_vs_in": dict(t.n_unique_vs_in),
                "unique_tp_proportion": dict(t.unique_tp_proportion),
                "unique_direction_correct": dict(t.unique_direction_correct),
            }
            for t in report.trials
        ],
    }


def write_eval_report(report: EvalReport, path: str) -> None:
    text = json.dumps(eval_report_to_dict(report), indent=2)
    _atomic_write(path, [text])
