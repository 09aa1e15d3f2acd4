"""DEG-calling rules: thresholds, discordance handling, ordering, overlap."""

import pytest

from finmeta.combine import CombinedResult, GeneEvidence, StudyMeta, combine_batch
from finmeta.degcall import (
    CONCORDANT_CLASS,
    DISCORDANT_CLASS,
    DegCriteria,
    DegRecord,
    call_degs,
    compare_deg_sets,
    presence_counts,
)

MANIFEST = [StudyMeta("a", 10, 10), StudyMeta("b", 10, 10)]


def result(gene_id, p_bh, lfc=2.0, n_g=3.0, concordant=True, effect="++"):
    return CombinedResult(
        gene_id=gene_id,
        method="FIN",
        n_g=n_g,
        p_combined=p_bh / 2,
        p_bh=p_bh,
        concordant=concordant,
        effective_direction=1,
        n_present=sum(1 for ch in effect if ch != "."),
        mean_abs_log2fc=lfc,
        effect_string=effect,
    )


class TestCallDegs:
    def test_both_gates_must_pass(self):
        criteria = DegCriteria(alpha=0.05, lfc_threshold=1.0)
        results = [
            result("sig", p_bh=0.01, lfc=2.0),
            result("weak_p", p_bh=0.2, lfc=2.0),
            result("weak_fc", p_bh=0.01, lfc=0.5),
        ]
        kept = call_degs(results, criteria, "FIN")
        assert [d.gene_id for d in kept] == ["sig"]

    def test_thresholds_are_strict(self):
        criteria = DegCriteria(alpha=0.05, lfc_threshold=1.0)
        at_alpha = result("a1", p_bh=0.05, lfc=2.0)
        at_lfc = result("a2", p_bh=0.01, lfc=1.0)
        assert call_degs([at_alpha, at_lfc], criteria, "FIN") == []

    def test_one_sided_route_drops_discordant_genes(self):
        """Direction conflicts disqualify a gene from the one-sided route's
        DEG list even when it clears both thresholds."""
        criteria = DegCriteria()
        results = [
            result("con", p_bh=0.01, concordant=True, effect="++"),
            result("dis", p_bh=0.001, concordant=False, effect="+-"),
        ]
        assert [d.gene_id for d in call_degs(results, criteria, "IN")] == ["con"]
        assert {d.gene_id for d in call_degs(results, criteria, "MIN")} == {"con", "dis"}
        assert {d.gene_id for d in call_degs(results, criteria, "FIN")} == {"con", "dis"}

    def test_sorted_by_statistic_magnitude_then_gene_id(self):
        criteria = DegCriteria()
        results = [
            result("g_b", p_bh=0.01, n_g=2.0),
            result("g_a", p_bh=0.01, n_g=-5.0),
            result("g_d", p_bh=0.01, n_g=3.0),
            result("g_c", p_bh=0.01, n_g=3.0),
        ]
        assert [d.gene_id for d in call_degs(results, criteria, "FIN")] == [
            "g_a",
            "g_c",
            "g_d",
            "g_b",
        ]

    def test_requires_batch_adjusted_input(self):
        r = result("g1", p_bh=0.01)
        unadjusted = CombinedResult(**{**r.__dict__, "p_bh": None})
        with pytest.raises(ValueError, match="BH-adjusted"):
            call_degs([unadjusted], DegCriteria(), "FIN")

    def test_pipeline_round_trip(self):
        """Strong concordant genes called, null genes not, via the real
        combine path rather than hand-built results."""
        genes = [
            GeneEvidence("hit", [("a", 1e-6, 2.0), ("b", 1e-6, 2.0)]),
            GeneEvidence("null", [("a", 0.8, 0.1), ("b", 0.6, -0.2)]),
        ]
        results = combine_batch(genes, MANIFEST, "FIN")
        kept = call_degs(results, DegCriteria(), "FIN")
        assert [d.gene_id for d in kept] == ["hit"]
        assert kept[0].effective_direction == 1


class TestDegCriteria:
    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError):
            DegCriteria(alpha=alpha)

    def test_negative_lfc_threshold(self):
        with pytest.raises(ValueError):
            DegCriteria(lfc_threshold=-1.0)

    def test_zero_lfc_threshold_allowed(self):
        assert DegCriteria(lfc_threshold=0.0).lfc_threshold == 0.0


class TestPresenceCounts:
    def _record(self, gene_id, effect, concordant):
        return DegRecord(
            gene_id=gene_id,
            n_g=1.0,
            mean_abs_log2fc=2.0,
            effective_direction=1,
            concordant=concordant,
            p_bh=0.01,
            effect_string=effect,
        )

    def test_n_present_from_effect_string(self):
        assert self._record("g", "+.-", False).n_present == 2
        assert self._record("g", "...", True).n_present == 0

    def test_dense_class_by_presence_table(self):
        manifest = [StudyMeta(s, 5, 5) for s in "abc"]
        degs = [
            self._record("g1", "++.", True),
            self._record("g2", "+-+", False),
            self._record("g3", "..+", True),
            self._record("g4", "+++", True),
            self._record("g5", "++.", True),
        ]
        counts = presence_counts(degs, manifest)
        assert counts[(CONCORDANT_CLASS, 1)] == 1
        assert counts[(CONCORDANT_CLASS, 2)] == 2
        assert counts[(CONCORDANT_CLASS, 3)] == 1
        assert counts[(DISCORDANT_CLASS, 3)] == 1
        # a single-study gene cannot disagree with itself
        assert counts[(DISCORDANT_CLASS, 1)] == 0
        assert sum(counts.values()) == len(degs)

    def test_effect_string_length_must_match_manifest(self):
        manifest = [StudyMeta(s, 5, 5) for s in "abc"]
        with pytest.raises(ValueError, match="does not match"):
            presence_counts([self._record("g1", "++", True)], manifest)


class TestCompareDegSets:
    def _records(self, *ids):
        return [
            DegRecord(g, 1.0, 2.0, 1, True, 0.01, "++") for g in ids
        ]

    def test_overlap_arithmetic(self):
        report = compare_deg_sets(
            self._records("g1", "g2", "g3"),
            self._records("g2", "g3", "g4", "g5"),
        )
        assert report.n_common == 2
        assert report.n_only_a == 1
        assert report.n_only_b == 2
        assert report.percent_common == pytest.approx(50.0)

    def test_percent_is_relative_to_second_list(self):
        report = compare_deg_sets(self._records("g1", "g2"), self._records("g1"))
        assert report.percent_common == pytest.approx(100.0)

    def test_empty_reference_gives_zero_percent(self):
        report = compare_deg_sets(self._records("g1"), [])
        assert report.percent_common == 0.0
        assert report.n_only_a == 1

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            compare_deg_sets(self._records("g1", "g1"), self._records("g2"))
