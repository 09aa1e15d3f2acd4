"""Table codecs: round trips, serialization precision, and the path:line
diagnostics on malformed input.

P-values travel in 17-significant-digit scientific notation, which
round-trips any float64 exactly; other reals use 6 significant digits, so
their round-trip assertions go through the same formatting.
"""

import json
import os

import numpy as np
import pytest

from finmeta.combine import GeneEvidence, StudyMeta, combine_batch
from finmeta.degcall import DegRecord
from finmeta.evaluate import RocCurve, run_experiment
from finmeta.io import (
    FileFormatError,
    eval_report_to_dict,
    evidence_from_stats_rows,
    read_counts,
    read_deg_table,
    read_manifest,
    read_roc_points,
    read_stats,
    read_truth,
    read_weights,
    stats_rows_from_results,
    write_conditions,
    write_counts,
    write_deg_table,
    write_eval_report,
    write_manifest,
    write_results_table,
    write_roc_points,
    write_stats_rows,
    write_truth,
)
from finmeta.simulate import SimConfig, StudyCounts, sample_truth, simulate_counts


STUDIES = [StudyMeta("gse1", 10, 10), StudyMeta("gse2", 15, 12)]


class TestManifest:
    def test_round_trip(self, tmp_path):
        path = str(tmp_path / "manifest.tsv")
        write_manifest(STUDIES, path)
        assert read_manifest(path) == STUDIES

    def test_duplicate_study_id(self, tmp_path):
        path = str(tmp_path / "manifest.tsv")
        write_manifest([STUDIES[0], STUDIES[0]], path)
        with pytest.raises(FileFormatError, match=r"manifest\.tsv:3: duplicate"):
            read_manifest(path)

    def test_non_integer_replicates(self, tmp_path):
        path = str(tmp_path / "manifest.tsv")
        path_obj = tmp_path / "manifest.tsv"
        path_obj.write_text(
            "study_id\treplicates_case\treplicates_control\ngse1\tten\t10\n"
        )
        with pytest.raises(FileFormatError, match=r":2: .*not an integer"):
            read_manifest(path)

    def test_header_mismatch_points_to_line_one(self, tmp_path):
        path_obj = tmp_path / "manifest.tsv"
        path_obj.write_text("study\tcase\tcontrol\n")
        with pytest.raises(FileFormatError, match=r"manifest\.tsv:1: expected header"):
            read_manifest(str(path_obj))

    def test_empty_manifest_rejected(self, tmp_path):
        path = str(tmp_path / "manifest.tsv")
        path_obj = tmp_path / "manifest.tsv"
        path_obj.write_text("study_id\treplicates_case\treplicates_control\n")
        with pytest.raises(FileFormatError, match="no studies"):
            read_manifest(path)

    def test_error_is_a_value_error(self):
        assert issubclass(FileFormatError, ValueError)


class TestStats:
    ROWS = [
        ("g1", "gse1", 0.1 + 1e-17, 1.25),
        ("g1", "gse2", 1 / 3, -0.5),
        ("g2", "gse1", 1e-300, 2.0),
        ("g3", "gse1", 1.0, 0.0),
    ]

    def test_p_values_round_trip_exactly(self, tmp_path):
        path = str(tmp_path / "stats.tsv")
        write_stats_rows(self.ROWS, path)
        back = read_stats(path)
        assert [(g, s) for g, s, _, _ in back] == [(g, s) for g, s, _, _ in self.ROWS]
        for (_, _, p, _), (_, _, p_in, _) in zip(back, self.ROWS):
            assert p == p_in  # %.16e is lossless for float64

    def test_log2fc_round_trips_through_six_digits(self, tmp_path):
        path = str(tmp_path / "stats.tsv")
        write_stats_rows(self.ROWS, path)
        for (_, _, _, lfc), (_, _, _, lfc_in) in zip(read_stats(path), self.ROWS):
            assert lfc == float(f"{lfc_in:.6g}")

    def test_writes_are_byte_identical(self, tmp_path):
        a, b = str(tmp_path / "a.tsv"), str(tmp_path / "b.tsv")
        write_stats_rows(self.ROWS, a)
        write_stats_rows(self.ROWS, b)
        assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()

    def test_append_builds_multi_study_table(self, tmp_path):
        path = str(tmp_path / "stats.tsv")
        write_stats_rows(self.ROWS[:2], path)
        write_stats_rows(self.ROWS[2:], path, append=True)
        assert len(read_stats(path)) == 4
        text = (tmp_path / "stats.tsv").read_text()
        assert text.count("gene_id") == 1  # header written once

    def test_append_to_missing_file_writes_header(self, tmp_path):
        path = str(tmp_path / "fresh.tsv")
        write_stats_rows(self.ROWS[:1], path, append=True)
        assert read_stats(path) == [
            ("g1", "gse1", 0.1 + 1e-17, float(f"{1.25:.6g}"))
        ]

    def test_rejects_p_out_of_range(self, tmp_path):
        path_obj = tmp_path / "stats.tsv"
        path_obj.write_text(
            "gene_id\tstudy_id\tp_value\tlog2fc\ng1\tgse1\t1.5\t0.0\n"
        )
        with pytest.raises(FileFormatError, match=r":2: p_value 1\.5 outside"):
            read_stats(str(path_obj))

    def test_rejects_non_finite_log2fc(self, tmp_path):
        path_obj = tmp_path / "stats.tsv"
        path_obj.write_text(
            "gene_id\tstudy_id\tp_value\tlog2fc\ng1\tgse1\t0.5\tinf\n"
        )
        with pytest.raises(FileFormatError, match=r":2: log2fc must be finite"):
            read_stats(str(path_obj))

    def test_rejects_duplicate_gene_study_pair(self, tmp_path):
        path = str(tmp_path / "stats.tsv")
        write_stats_rows([self.ROWS[0], self.ROWS[0]], path)
        with pytest.raises(FileFormatError, match=r":3: duplicate \(gene_id, study_id\)"):
            read_stats(path)

    def test_rejects_ragged_rows(self, tmp_path):
        path_obj = tmp_path / "stats.tsv"
        path_obj.write_text("gene_id\tstudy_id\tp_value\tlog2fc\ng1\tgse1\t0.5\n")
        with pytest.raises(FileFormatError, match=r":2: expected 4 tab-separated"):
            read_stats(str(path_obj))

    def test_blank_lines_are_skipped(self, tmp_path):
        path_obj = tmp_path / "stats.tsv"
        path_obj.write_text(
            "gene_id\tstudy_id\tp_value\tlog2fc\n\ng1\tgse1\t5.0e-01\t0.0\n\n"
        )
        assert len(read_stats(str(path_obj))) == 1

    def test_evidence_grouping_keeps_first_seen_order(self):
        rows = [
            ("g2", "gse1", 0.1, 1.0),
            ("g1", "gse1", 0.2, -1.0),
            ("g2", "gse2", 0.3, 0.5),
        ]
        evidence = evidence_from_stats_rows(rows)
        assert [e.gene_id for e in evidence] == ["g2", "g1"]
        assert evidence[0].entries == (("gse1", 0.1, 1.0), ("gse2", 0.3, 0.5))


class TestDegTable:
    DEGS = [
        DegRecord("g1", 4.125, 2.5, 1, True, 1e-5, "++"),
        DegRecord("g2", -3.5, 1.75, -1, True, 0.003, ".-"),
        DegRecord("g3", 2.25, 1.5, 1, False, 0.01, "+-"),
    ]

    def test_round_trip_recovers_direction_and_concordance(self, tmp_path):
        path = str(tmp_path / "degs.tsv")
        write_deg_table(self.DEGS, path)
        back = read_deg_table(path)
        for orig, rec in zip(self.DEGS, back):
            assert rec.gene_id == orig.gene_id
            assert rec.effect_string == orig.effect_string
            assert rec.effective_direction == orig.effective_direction
            assert rec.concordant == orig.concordant
            assert rec.p_bh == orig.p_bh  # full-precision column
            assert rec.n_g == float(f"{orig.n_g:.6g}")
            assert rec.mean_abs_log2fc == float(f"{orig.mean_abs_log2fc:.6g}")

    def test_mixed_glyphs_take_direction_from_statistic_sign(self, tmp_path):
        path = str(tmp_path / "degs.tsv")
        write_deg_table([DegRecord("g1", -1.5, 1.2, -1, False, 0.04, "+-")], path)
        assert read_deg_table(path)[0].effective_direction == -1

    def test_rejects_unknown_effect_glyph(self, tmp_path):
        path_obj = tmp_path / "degs.tsv"
        path_obj.write_text(
            "gene_id\tN_g\tmean_abs_log2fc\teffect\tbh_p\ng1\t2.0\t1.0\t+x\t1e-3\n"
        )
        with pytest.raises(FileFormatError, match=r":2: bad effect glyphs"):
            read_deg_table(str(path_obj))


class TestResultsTable:
    def test_full_table_structure(self, tmp_path):
        evidence = [
            GeneEvidence("g1", [("a", 0.01, 1.0), ("b", 0.02, 0.5)]),
            GeneEvidence("g2", [("a", 0.5, -0.2)]),
        ]
        manifest = [StudyMeta("a", 10, 10), StudyMeta("b", 10, 10)]
        results = combine_batch(evidence, manifest, "FIN")
        path = str(tmp_path / "results.tsv")
        write_results_table(results, path)
        lines = (tmp_path / "results.tsv").read_text().splitlines()
        assert lines[0] == (
            "gene_id\tN_g\tmean_abs_log2fc\teffect\tbh_p"
            "\tp_combined\tconcordant\tn_present"
        )
        assert len(lines) == 3
        first = lines[1].split("\t")
        assert first[0] == "g1"
        assert first[3] == "++"
        assert first[6] == "1"
        assert first[7] == "2"
        assert float(first[5]) == results[0].p_combined

    def test_missing_bh_becomes_empty_field(self, tmp_path):
        from dataclasses import replace

        evidence = [GeneEvidence("g1", [("a", 0.01, 1.0)])]
        result = combine_batch(evidence, [StudyMeta("a", 5, 5)], "MIN")[0]
        path = str(tmp_path / "results.tsv")
        write_results_table([replace(result, p_bh=None)], path)
        fields = (tmp_path / "results.tsv").read_text().splitlines()[1].split("\t")
        assert fields[4] == ""


class TestCountsRoundTrip:
    def _study(self):
        rng = np.random.default_rng(1)
        return StudyCounts(
            study_id="s1",
            gene_ids=("g1", "g2", "g3"),
            sample_ids=("s1_case_0", "s1_case_1", "s1_control_0"),
            conditions=("case", "case", "control"),
            counts=rng.integers(0, 500, size=(3, 3)),
        )

    def test_round_trip(self, tmp_path):
        sc = self._study()
        counts_path = str(tmp_path / "counts.tsv")
        cond_path = str(tmp_path / "conditions.tsv")
        write_counts(sc, counts_path)
        write_conditions(sc, cond_path)
        m = read_counts(counts_path, cond_path)
        assert m.gene_ids == sc.gene_ids
        assert m.sample_ids == sc.sample_ids
        assert m.conditions == sc.conditions
        np.testing.assert_array_equal(m.counts, sc.counts)

    def test_missing_condition_assignment(self, tmp_path):
        sc = self._study()
        counts_path = str(tmp_path / "counts.tsv")
        write_counts(sc, counts_path)
        cond = tmp_path / "conditions.tsv"
        cond.write_text("sample_id\tcondition\ns1_case_0\tcase\n")
        with pytest.raises(FileFormatError, match="no condition assignment"):
            read_counts(counts_path, str(cond))

    def test_duplicate_sample_in_conditions(self, tmp_path):
        sc = self._study()
        counts_path = str(tmp_path / "counts.tsv")
        write_counts(sc, counts_path)
        cond = tmp_path / "conditions.tsv"
        cond.write_text(
            "sample_id\tcondition\ns1_case_0\tcase\ns1_case_0\tcase\n"
        )
        with pytest.raises(FileFormatError, match=r":3: duplicate sample"):
            read_counts(counts_path, str(cond))

    def test_non_integer_count(self, tmp_path):
        counts = tmp_path / "counts.tsv"
        counts.write_text("gene_id\ta\tb\ng1\t1.5\t2\n")
        cond = tmp_path / "conditions.tsv"
        cond.write_text("sample_id\tcondition\na\tcase\nb\tcontrol\n")
        with pytest.raises(FileFormatError, match=r"counts\.tsv:2: .*not an integer"):
            read_counts(str(counts), str(cond))


class TestTruth:
    def test_round_trip(self, tmp_path):
        config = SimConfig(
            sigma=0.0, studies=(StudyMeta("s", 3, 3),), n_genes=40, seed=2
        )
        truth = sample_truth(config, 0)
        path = str(tmp_path / "truth.tsv")
        write_truth(truth, path)
        back = read_truth(path)
        assert len(back) == 40
        for g, de, delta in zip(truth.gene_ids, truth.is_de, truth.delta):
            assert back[g][0] == bool(de)
            assert back[g][1] == float(f"{delta:.6g}")

    def test_rejects_bad_flag(self, tmp_path):
        path_obj = tmp_path / "truth.tsv"
        path_obj.write_text("gene_id\tis_de\tdelta\ng1\t2\t0.0\n")
        with pytest.raises(FileFormatError, match=r":2: is_de must be 0 or 1"):
            read_truth(str(path_obj))


class TestRocPoints:
    def test_round_trip(self, tmp_path):
        curve = RocCurve(
            np.array([0.0, 0.25, 1.0]), np.array([0.0, 0.8125, 1.0])
        )
        path = str(tmp_path / "roc.tsv")
        write_roc_points(curve, path)
        back = read_roc_points(path)
        np.testing.assert_array_equal(back.fpr, curve.fpr)
        np.testing.assert_array_equal(back.tpr, curve.tpr)  # exact at 6 digits


class TestWeights:
    def test_reads_positive_weights(self, tmp_path):
        path_obj = tmp_path / "weights.tsv"
        path_obj.write_text("study_id\tweight\ngse1\t2.5\ngse2\t1.0\n")
        assert read_weights(str(path_obj)) == {"gse1": 2.5, "gse2": 1.0}

    def test_rejects_nonpositive_weight(self, tmp_path):
        path_obj = tmp_path / "weights.tsv"
        path_obj.write_text("study_id\tweight\ngse1\t0.0\n")
        with pytest.raises(FileFormatError, match=r":2: weight must be positive"):
            read_weights(str(path_obj))

    def test_rejects_duplicate_study(self, tmp_path):
        path_obj = tmp_path / "weights.tsv"
        path_obj.write_text("study_id\tweight\ngse1\t1.0\ngse1\t2.0\n")
        with pytest.raises(FileFormatError, match=r":3: duplicate study id"):
            read_weights(str(path_obj))


class TestEvalReportJson:
    CONFIG = SimConfig(
        sigma=0.15,
        studies=(StudyMeta("sa", 5, 5), StudyMeta("sb", 4, 6)),
        n_genes=80,
        seed=4,
        n_trials=2,
    )

    def test_json_layout(self, tmp_path):
        report = run_experiment(self.CONFIG)
        path = str(tmp_path / "report.json")
        write_eval_report(report, path)
        with open(path) as handle:
            data = json.load(handle)
        assert data["methods"] == ["IN", "MIN", "FIN"]
        assert data["setting"]["n_genes"] == 80
        assert len(data["trials"]) == 2
        assert set(data["aggregate"]["mean_auc"]) == {"IN", "MIN", "FIN"}
        assert data["trials"][0]["trial_index"] == 0

    def test_serialization_is_deterministic(self, tmp_path):
        report = run_experiment(self.CONFIG)
        a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        write_eval_report(report, a)
        write_eval_report(report, b)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_dict_view_matches_report(self):
        report = run_experiment(self.CONFIG)
        data = eval_report_to_dict(report)
        assert data["aggregate"]["mean_auc"] == report.mean_auc
        assert data["criteria"]["alpha"] == report.criteria.alpha


class TestAtomicWrites:
    def test_no_temp_files_left_behind(self, tmp_path):
        write_manifest(STUDIES, str(tmp_path / "manifest.tsv"))
        write_stats_rows(TestStats.ROWS, str(tmp_path / "stats.tsv"))
        leftovers = [n for n in os.listdir(tmp_path) if n.startswith(".tmp-")]
        assert leftovers == []

    def test_per_study_rows_skip_filtered(self, tmp_path):
        from finmeta.detest import PerStudyResult

        rows = stats_rows_from_results(
            "gse1",
            [
                PerStudyResult("g1", 0.01, 1.0, False),
                PerStudyResult("g2", None, None, True),
            ],
        )
        assert rows == [("g1", "gse1", 0.01, 1.0)]
