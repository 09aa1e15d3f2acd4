"""Command-line interface: combine, simulate, per-study, evaluate, check.

Thread counts come from ``--threads`` when given, else the FINMETA_THREADS
environment variable, else 1.  All commands are deterministic for a fixed
seed regardless of the thread count.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io
from .combine import StudyMeta, combine_batch
from .degcall import DegCriteria, call_degs
from .detest import run_per_study
from .evaluate import run_experiment
from .simulate import SimConfig, sample_truth, setting_config, simulate_counts
from .stats import ks_uniform_stat, std_normal_cdf, std_normal_quantile

THREADS_ENV = "FINMETA_THREADS"

# 99.9% two-sided Kolmogorov critical value, scaled by 1/sqrt(n) at use sites.
KS_CRITICAL_999 = 1.9495
STATS_KS_THRESHOLD = 0.02


def _resolve_threads(value: int | None) -> int:
    if value is None:
        env = os.environ.get(THREADS_ENV)
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise SystemExit(f"{THREADS_ENV} must be a positive integer, got {env!r}")
    if value < 1:
        raise SystemExit(f"thread count must be >= 1, got {value}")
    return value


def _parse_studies_spec(spec: str) -> tuple[StudyMeta, ...]:
    """Parse '--studies 10:10,15:10' into StudyMeta tuples."""
    studies = []
    for i, token in enumerate(spec.split(",")):
        parts = token.split(":")
        if len(parts) != 2:
            raise SystemExit(
                f"bad --studies entry {token!r}; expected CASE:CONTROL pairs "
                "like 10:10,15:10"
            )
        try:
            case, control = int(parts[0]), int(parts[1])
        except ValueError:
            raise SystemExit(f"bad --studies entry {token!r}; counts must be integers")
        try:
            studies.append(StudyMeta(f"study_{i + 1}", case, control))
        except ValueError as err:
            raise SystemExit(str(err))
    return tuple(studies)


def _sim_config(args) -> SimConfig:
    overrides = dict(
        n_genes=args.genes,
        prop_de=args.prop_de,
        seed=args.seed,
        n_trials=args.trials,
    )
    if args.setting is not None:
        return setting_config(args.setting, **overrides)
    if args.sigma is None or args.studies is None:
        raise SystemExit("provide either --setting or both --sigma and --studies")
    return SimConfig(sigma=args.sigma, studies=_parse_studies_spec(args.studies), **overrides)


def _add_sim_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--setting", type=int, choices=(1, 2, 3, 4),
                        help="benchmark preset: sigma and replicate design")
    parser.add_argument("--sigma", type=float, help="inter-study variability (with --studies)")
    parser.add_argument("--studies", help="explicit design, e.g. 10:10,15:10,12:16")
    parser.add_argument("--genes", type=int, default=2000, help="genes per trial")
    parser.add_argument("--prop-de", type=float, default=0.35, dest="prop_de",
                        help="fraction of genes differentially expressed")
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: {THREADS_ENV} or 1)")


def cmd_combine(args) -> int:
    manifest = io.read_manifest(args.manifest)
    rows = io.read_stats(args.stats)
    if not rows:
        raise io.FileFormatError(f"{args.stats}: no evidence rows")
    weight_override = io.read_weights(args.weights) if args.weights else None
    evidence = io.evidence_from_stats_rows(rows)
    results = combine_batch(evidence, manifest, args.method, weight_override)
    degs = call_degs(results, DegCriteria(args.alpha, args.lfc), args.method)
    io.write_deg_table(degs, args.out)
    root, ext = os.path.splitext(args.out)
    results_path = root + ".results" + (ext or ".tsv")
    io.write_results_table(results, results_path)
    print(f"combined {len(evidence)} genes with {args.method.upper()}: "
          f"{len(degs)} DEGs -> {args.out}; all genes -> {results_path}")
    return 0


def cmd_simulate(args) -> int:
    config = _sim_config(args)
    threads = _resolve_threads(args.threads)
    os.makedirs(args.out, exist_ok=True)
    io.write_manifest(config.studies, os.path.join(args.out, "manifest.tsv"))

    def write_trial(trial: int) -> None:
        trial_dir = os.path.join(args.out, f"trial_{trial:03d}")
        os.makedirs(trial_dir, exist_ok=True)
        truth = sample_truth(config, trial)
        io.write_truth(truth, os.path.join(trial_dir, "truth.tsv"))
        for sc in simulate_counts(truth, config, trial):
            io.write_counts(sc, os.path.join(trial_dir, f"{sc.study_id}.counts.tsv"))
            io.write_conditions(
                sc, os.path.join(trial_dir, f"{sc.study_id}.conditions.tsv")
            )

    trials = range(config.n_trials)
    if threads == 1:
        for t in trials:
            write_trial(t)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(write_trial, trials))
    print(f"wrote {config.n_trials} trial(s), {len(config.studies)} studies each -> {args.out}")
    return 0


def cmd_perstudy(args) -> int:
    matrix = io.read_counts(args.counts, args.conditions)
    results = run_per_study(matrix, cpm_threshold=args.cpm_threshold)
    rows = io.stats_rows_from_results(args.study_id, results)
    io.write_stats_rows(rows, args.out, append=True)
    filtered = [r.gene_id for r in results if r.filtered]
    sidecar = f"{args.out}.{args.study_id}.filtered.txt"
    io.write_gene_list(filtered, sidecar)
    print(f"study {args.study_id}: tested {len(rows)} genes, filtered {len(filtered)} "
          f"-> {args.out} (filtered ids: {sidecar})")
    return 0


def cmd_evaluate(args) -> int:
    config = _sim_config(args)
    threads = _resolve_threads(args.threads)
    report = run_experiment(config, threads=threads)
    os.makedirs(args.out, exist_ok=True)
    io.write_eval_report(report, os.path.join(args.out, "report.json"))
    for method, curve in report.averaged_roc.items():
        io.write_roc_points(
            curve, os.path.join(args.out, f"roc_{method.lower()}.tsv")
        )
    for method in report.methods:
        print(f"{method}: mean AUC {report.mean_auc[method]:.4f} "
              f"(sd {report.std_auc[method]:.4f}), "
              f"mean observed FDR {report.mean_observed_fdr[method]:.4f}")
    print(f"report -> {os.path.join(args.out, 'report.json')}")
    return 0


def cmd_check(args) -> int:
    all_pass = True
    rng = np.random.default_rng(args.seed)
    n = args.mc_n
    u = rng.random(n)
    signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    z = signs * np.abs(-std_normal_quantile(np.clip(u, 1e-300, 1 - 1e-16)))
    ks = ks_uniform_stat(std_normal_cdf(z))
    threshold = KS_CRITICAL_999 / np.sqrt(n)
    ok = ks < threshold
    all_pass &= ok
    print(f"signed-quantile normality: n={n} ks={ks:.6f} "
          f"threshold={threshold:.6f} {'PASS' if ok else 'FAIL'}")

    if args.stats:
        rows = io.read_stats(args.stats)
        by_study: dict[str, list[float]] = {}
        for _, study, p, _ in rows:
            by_study.setdefault(study, []).append(p)
        for study in sorted(by_study):
            p_values = np.array(by_study[study])
            ks = ks_uniform_stat(p_values)
            hist, _ = np.histogram(p_values, bins=20, range=(0.0, 1.0))
            ok = ks < STATS_KS_THRESHOLD
            all_pass &= ok
            print(f"study {study}: n={p_values.size} ks={ks:.6f} "
                  f"threshold={STATS_KS_THRESHOLD} {'PASS' if ok else 'FAIL'}")
            print(f"study {study} p-value histogram (20 bins): "
                  + " ".join(str(c) for c in hist))
    return 0 if all_pass else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finmeta",
        description="Direction-aware inverse-normal meta-analysis of "
                    "multi-study differential expression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("combine", help="combine per-study stats into a DEG table")
    p.add_argument("--manifest", required=True, help="study manifest TSV")
    p.add_argument("--stats", required=True, help="per-study summary stats TSV")
    p.add_argument("--method", required=True, choices=("in", "min", "fin"))
    p.add_argument("--alpha", type=float, default=0.05, help="BH significance level")
    p.add_argument("--lfc", type=float, default=1.0, help="mean |log2fc| threshold")
    p.add_argument("--weights", help="optional study_id/weight override TSV")
    p.add_argument("--out", required=True,
                   help="DEG table path; an all-genes table lands next to it "
                        "as <out-stem>.results.tsv")
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("simulate", help="generate multi-study counts with ground truth")
    _add_sim_arguments(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("per-study", help="filter and test one study's counts")
    p.add_argument("--counts", required=True, help="gene-by-sample counts TSV")
    p.add_argument("--conditions", required=True, help="sample_id/condition TSV")
    p.add_argument("--study-id", required=True, dest="study_id")
    p.add_argument("--cpm-threshold", type=float, default=0.85, dest="cpm_threshold")
    p.add_argument("--out", required=True,
                   help="stats TSV (appended to if it exists); filtered gene ids "
                        "go to <out>.<study-id>.filtered.txt")
    p.set_defaults(func=cmd_perstudy)

    p = sub.add_parser("evaluate", help="run the simulation benchmark end to end")
    _add_sim_arguments(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("check", help="self-diagnostics: combined-statistic "
                                     "normality and stats-file uniformity")
    p.add_argument("--stats", help="optional per-study stats TSV to audit")
    p.add_argument("--mc-n", type=int, default=100000, dest="mc_n")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except io.FileFormatError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
