"""Multi-study RNA-seq count simulation with ground truth.

Counts follow a negative binomial with gamma-mixed Poisson sampling:
``Y ~ NB(mu, phi)`` with ``Var = mu + phi mu^2``.  Study-level variability is
a multiplicative log-normal effect on the per-condition mean: for gene ``g``,
condition ``c``, study ``s``,

    mu_gcs = theta_gc * exp(eps_gcs),   eps_gcs ~ N(0, sigma^2),

drawn once per (gene, condition, study) and shared by that study's
replicates.  Dispersions ``phi_gs`` are per (gene, study), shared across
conditions.

Every random draw comes from a stream keyed by ``(seed, trial, stream)``
through ``numpy.random.SeedSequence``, so trials (and studies within a trial)
can be generated in any order — or in parallel — with bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .combine import StudyMeta

__all__ = [
    "SimConfig",
    "SimTruth",
    "StudyCounts",
    "SETTING_PRESETS",
    "setting_config",
    "negative_binomial",
    "sample_truth",
    "simulate_counts",
]

CASE = "case"
CONTROL = "control"

# Benchmark presets: (sigma, replicate tuples). Settings 3 and 4 repeat the
# study designs of 1 and 2 with larger inter-study variability.
_THREE_STUDIES = ((10, 10), (15, 10), (12, 16))
_FIVE_STUDIES = _THREE_STUDIES + ((14, 12), (20, 20))
SETTING_PRESETS: dict[int, tuple[float, tuple[tuple[int, int], ...]]] = {
    1: (0.15, _THREE_STUDIES),
    2: (0.15, _FIVE_STUDIES),
    3: (0.5, _THREE_STUDIES),
    4: (0.5, _FIVE_STUDIES),
}


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulation setting.

    Defaults give bulk-RNA-seq-like magnitudes: per-gene control means are
    log-normal around e^5 ~ 150 counts, dispersions log-normal around 0.2,
    and 35% of genes are differentially expressed with |log2 fold change|
    uniform in [1, 3].
    """

    sigma: float
    studies: tuple[StudyMeta, ...]
    n_genes: int = 2000
    prop_de: float = 0.35
    base_mean_log_mu: float = 5.0
    base_mean_log_sd: float = 1.5
    fc_min: float = 1.0
    fc_max: float = 3.0
    disp_log_mu: float = -1.6
    disp_log_sd: float = 0.5
    seed: int = 0
    n_trials: int = 20

    def __post_init__(self) -> None:
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not self.studies:
            raise ValueError("at least one study is required")
        if self.n_genes < 1:
            raise ValueError(f"n_genes must be >= 1, got {self.n_genes}")
        if not 0.0 <= self.prop_de < 1.0:
            raise ValueError(f"prop_de must be in [0, 1), got {self.prop_de}")
        if not 0.0 <= self.fc_min <= self.fc_max:
            raise ValueError(
                f"need 0 <= fc_min <= fc_max, got ({self.fc_min}, {self.fc_max})"
            )
        if self.base_mean_log_sd <= 0.0 or self.disp_log_sd <= 0.0:
            raise ValueError("log-normal spreads must be positive")
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")


def setting_config(setting: int, **overrides) -> SimConfig:
    """Build the SimConfig for a numbered benchmark setting (1-4)."""
    if setting not in SETTING_PRESETS:
        raise ValueError(f"unknown setting {setting}; expected one of {sorted(SETTING_PRESETS)}")
    sigma, tuples = SETTING_PRESETS[setting]
    studies = tuple(
        StudyMeta(f"study_{i + 1}", case, control) for i, (case, control) in enumerate(tuples)
    )
    return SimConfig(sigma=sigma, studies=studies, **overrides)


@dataclass(frozen=True)
class SimTruth:
    """Ground truth for one trial, columnar over genes.

    ``true_direction`` is the sign of ``delta`` for DE genes and +1 (unused)
    for the rest; ``delta`` is 0 exactly for non-DE genes, so
    ``theta_case == theta_control`` there.
    """

    gene_ids: tuple[str, ...]
    is_de: np.ndarray
    true_direction: np.ndarray
    delta: np.ndarray
    theta_case: np.ndarray
    theta_control: np.ndarray

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)


@dataclass(frozen=True)
class StudyCounts:
    """One study's simulated count matrix (genes x samples)."""

    study_id: str
    gene_ids: tuple[str, ...]
    sample_ids: tuple[str, ...]
    conditions: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self) -> None:
        g, n = self.counts.shape
        if g != len(self.gene_ids) or n != len(self.sample_ids) or n != len(self.conditions):
            raise ValueError("counts shape does not match gene/sample labels")


def _stream(seed: int, trial_index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial_index, stream]))


def negative_binomial(rng: np.random.Generator, mean, dispersion, size=None) -> np.ndarray:
    """NB(mean, dispersion) draws via the gamma-mixed Poisson construction.

    The Poisson rate is Gamma(shape=1/phi, scale=mean*phi), giving
    ``E = mean`` and ``Var = mean + phi * mean^2``; small ``phi`` approaches
    a plain Poisson.
    """
    mean = np.asarray(mean, dtype=float)
    dispersion = np.asarray(dispersion, dtype=float)
    if np.any(mean < 0.0) or np.any(dispersion <= 0.0):
        raise ValueError("negative_binomial needs mean >= 0 and dispersion > 0")
    lam = rng.gamma(shape=1.0 / dispersion, scale=mean * dispersion, size=size)
    return rng.poisson(lam)


def _gene_ids(n_genes: int) -> tuple[str, ...]:
    width = max(5, len(str(n_genes - 1)))
    return tuple(f"g{i:0{width}d}" for i in range(n_genes))


def sample_truth(config: SimConfig, trial_index: int) -> SimTruth:
    """Draw per-gene ground truth (control means, DE flags, fold changes).

    Deterministic given ``(config.seed, trial_index)``; each gene is DE with
    probability ``prop_de``, and DE genes get ``delta`` uniform on
    ``±[fc_min, fc_max]`` with a fair random sign.
    """
    rng = _stream(config.seed, trial_index, 0)
    g = config.n_genes
    theta_control = rng.lognormal(config.base_mean_log_mu, config.base_mean_log_sd, size=g)
    is_de = rng.random(g) < config.prop_de
    sign = np.where(rng.random(g) < 0.5, 1.0, -1.0)
    magnitude = rng.uniform(config.fc_min, config.fc_max, size=g)
    delta = np.where(is_de, sign * magnitude, 0.0)
    theta_case = theta_control * np.exp2(delta)
    return SimTruth(
        gene_ids=_gene_ids(g),
        is_de=is_de,
        true_direction=np.where(delta >= 0.0, 1, -1),
        delta=delta,
        theta_case=theta_case,
        theta_control=theta_control,
    )


def simulate_counts(
    truth: SimTruth,
    config: SimConfig,
    trial_index: int,
) -> list[StudyCounts]:
    """Generate one trial's count matrices for every study in the config.

    Each study uses its own RNG stream; within a stream the draw order is
    fixed (dispersions, study effects, then case and control counts), so the
    output is bit-identical no matter how studies or trials are scheduled.
    """
    if truth.n_genes != config.n_genes:
        raise ValueError("truth and config disagree on the number of genes")
    out = []
    for j, study in enumerate(config.studies):
        rng = _stream(config.seed, trial_index, 1 + j)
        g = config.n_genes
        phi = rng.lognormal(config.disp_log_mu, config.disp_log_sd, size=g)
        eps_case = rng.normal(0.0, config.sigma, size=g)
        eps_control = rng.normal(0.0, config.sigma, size=g)
        mu_case = truth.theta_case * np.exp(eps_case)
        mu_control = truth.theta_control * np.exp(eps_control)

        r1, r2 = study.replicates_case, study.replicates_control
        y_case = negative_binomial(
            rng, mu_case[:, None], phi[:, None], size=(g, r1)
        )
        y_control = negative_binomial(
            rng, mu_control[:, None], phi[:, None], size=(g, r2)
        )
        out.append(
            StudyCounts(
                study_id=study.study_id,
                gene_ids=truth.gene_ids,
                sample_ids=tuple(
                    [f"{CASE}_{i + 1}" for i in range(r1)]
                    + [f"{CONTROL}_{i + 1}" for i in range(r2)]
                ),
                conditions=(CASE,) * r1 + (CONTROL,) * r2,
                counts=np.hstack([y_case, y_control]),
            )
        )
    return out
