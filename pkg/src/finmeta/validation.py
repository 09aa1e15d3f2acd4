"""Input validation for the dataframe-facing estimator API."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import pandas as pd

from .combine import StudyMeta

__all__ = ["check_stats_frame", "check_manifest", "check_condition_labels"]

STATS_COLUMNS = ("gene_id", "study_id", "p_value", "log2fc")
MANIFEST_COLUMNS = ("study_id", "replicates_case", "replicates_control")


def check_stats_frame(X) -> pd.DataFrame:
    """Validate a long-format evidence table.

    Requires columns ``gene_id, study_id, p_value, log2fc``; p-values must
    lie in [0, 1], fold changes must be finite, and each (gene, study) pair
    may appear once.  Returns a normalized copy with exactly those columns.
    """
    if not isinstance(X, pd.DataFrame):
        raise TypeError(
            f"expected a pandas DataFrame with columns {list(STATS_COLUMNS)}, "
            f"got {type(X).__name__}"
        )
    missing = [c for c in STATS_COLUMNS if c not in X.columns]
    if missing:
        raise ValueError(f"evidence frame is missing columns: {missing}")
    if len(X) == 0:
        raise ValueError("evidence frame is empty")
    frame = X.loc[:, list(STATS_COLUMNS)].copy()
    frame["gene_id"] = frame["gene_id"].astype(str)
    frame["study_id"] = frame["study_id"].astype(str)
    p = pd.to_numeric(frame["p_value"], errors="coerce").to_numpy(dtype=float)
    lfc = pd.to_numeric(frame["log2fc"], errors="coerce").to_numpy(dtype=float)
    if np.any(np.isnan(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("p_value column must be numeric in [0, 1]")
    if not np.all(np.isfinite(lfc)):
        raise ValueError("log2fc column must be finite")
    frame["p_value"] = p
    frame["log2fc"] = lfc
    if frame.duplicated(subset=["gene_id", "study_id"]).any():
        dupes = frame[frame.duplicated(subset=["gene_id", "study_id"])]
        first = dupes.iloc[0]
        raise ValueError(
            f"duplicate (gene_id, study_id) pair: ({first['gene_id']!r}, "
            f"{first['study_id']!r})"
        )
    return frame


def check_manifest(manifest) -> tuple[StudyMeta, ...]:
    """Accept a StudyMeta sequence or a manifest-shaped DataFrame."""
    if manifest is None:
        raise ValueError("a study manifest is required")
    if isinstance(manifest, pd.DataFrame):
        missing = [c for c in MANIFEST_COLUMNS if c not in manifest.columns]
        if missing:
            raise ValueError(f"manifest frame is missing columns: {missing}")
        rows = [
            StudyMeta(str(r.study_id), int(r.replicates_case), int(r.replicates_control))
            for r in manifest.itertuples()
        ]
    else:
        rows = []
        for s in manifest:
            if not isinstance(s, StudyMeta):
                raise TypeError(f"manifest entries must be StudyMeta, got {type(s).__name__}")
            rows.append(s)
    if not rows:
        raise ValueError("manifest lists no studies")
    ids = [s.study_id for s in rows]
    if len(set(ids)) != len(ids):
        raise ValueError("manifest contains duplicate study ids")
    return tuple(rows)


def check_condition_labels(y, n_samples: int) -> Sequence[str]:
    """Normalize condition labels to 'case'/'control' strings.

    Booleans map True -> case; strings must already be case/control.
    """
    arr = np.asarray(y)
    if arr.shape != (n_samples,):
        raise ValueError(f"expected {n_samples} condition labels, got shape {arr.shape}")
    if arr.dtype == bool:
        return tuple("case" if v else "control" for v in arr)
    labels = tuple(str(v) for v in arr)
    bad = set(labels) - {"case", "control"}
    if bad:
        raise ValueError(
            f"condition labels must be 'case'/'control' or boolean, got {sorted(bad)}"
        )
    return labels
