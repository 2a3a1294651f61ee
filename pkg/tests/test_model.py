"""Domain-type invariants and serialization round-trips."""

from fractions import Fraction

import pytest

from scopecoe.model import (
    CoEVerdict,
    FeatureJudgment,
    KnowledgeSnippet,
    MixedContext,
    Provenance,
    QASample,
    QuestionFeatures,
    Relation,
    SampleSource,
    TrialRecord,
    TrialReport,
    check_unique_ids,
    noise_ratio,
    read_jsonl,
    validate_features,
    write_jsonl,
)


def make_features():
    return QuestionFeatures(
        intent="City address Information",
        keywords=("750 7th Avenue", "101 Park Avenue"),
        relations=(
            Relation(
                keyword_pair=("750 7th Avenue", "101 Park Avenue"),
                description="750 7th Avenue and 101 Park Avenue are in the same city.",
            ),
        ),
    )


class TestRelation:
    def test_requires_exactly_two_keywords(self):
        with pytest.raises(ValueError):
            Relation(keyword_pair=("a",), description="d")
        with pytest.raises(ValueError):
            Relation(keyword_pair=("a", "b", "c"), description="d")

    def test_round_trip(self):
        rel = Relation(keyword_pair=("a", "b"), description="a relates to b")
        assert Relation.from_dict(rel.to_dict()) == rel
        assert rel.to_dict() == {
            "keywords": ["a", "b"],
            "description": "a relates to b",
        }


class TestQuestionFeatures:
    def test_round_trip(self):
        f = make_features()
        assert QuestionFeatures.from_dict(f.to_dict()) == f

    def test_valid_features_have_no_violations(self):
        assert validate_features(make_features()) == []

    def test_empty_intent_flagged(self):
        f = QuestionFeatures(intent="  ", keywords=("a",))
        assert any("intent" in v for v in validate_features(f))

    def test_duplicate_keywords_flagged_case_insensitively(self):
        f = QuestionFeatures(intent="x", keywords=("Paris", "paris"))
        assert any("duplicate" in v for v in validate_features(f))

    def test_relation_with_unknown_keyword_flagged(self):
        f = QuestionFeatures(
            intent="Nationality of person",
            keywords=("James Henry Miller", "wife"),
            relations=(
                Relation(keyword_pair=("James Henry Miller", "spouse"), description="d"),
            ),
        )
        assert any("unknown keyword" in v for v in validate_features(f))

    def test_empty_relation_description_flagged(self):
        f = QuestionFeatures(
            intent="x",
            keywords=("a", "b"),
            relations=(Relation(keyword_pair=("a", "b"), description=" "),),
        )
        assert any("empty description" in v for v in validate_features(f))


class TestKnowledgeSnippet:
    def test_char_len_auto_computed(self):
        s = KnowledgeSnippet(id="s1", text="hello")
        assert s.char_len == 5

    def test_char_len_mismatch_rejected(self):
        with pytest.raises(ValueError):
            KnowledgeSnippet(id="s1", text="hello", char_len=3)

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            KnowledgeSnippet(id="s1", text="")

    def test_round_trip(self):
        s = KnowledgeSnippet(id="s1", text="héllo", provenance=Provenance.WEB)
        assert KnowledgeSnippet.from_dict(s.to_dict()) == s

    def test_unique_id_check(self):
        a = KnowledgeSnippet(id="x", text="t")
        with pytest.raises(ValueError):
            check_unique_ids([a, a])


class TestCoEVerdict:
    def test_consistency_enforced(self):
        with pytest.raises(ValueError):
            CoEVerdict(is_coe=True, missing_features=("intent",))
        with pytest.raises(ValueError):
            CoEVerdict(is_coe=False, missing_features=())

    def test_round_trip(self):
        v = CoEVerdict(is_coe=False, missing_features=("keyword[0]",))
        assert CoEVerdict.from_dict(v.to_dict()) == v


class TestFeatureJudgment:
    def test_round_trip(self):
        j = FeatureJudgment(
            snippet_id="s1",
            intent_covered=True,
            keyword_covered=(True, False),
            relation_covered=(False,),
        )
        assert FeatureJudgment.from_dict(j.to_dict()) == j


class TestQASample:
    def test_round_trip(self, samples):
        for sample in samples[:3]:
            assert QASample.from_dict(sample.to_dict()) == sample

    def test_id_from_metadata(self, samples):
        assert samples[0].id == "syn-000"

    def test_id_falls_back_to_question(self):
        s = QASample(
            question="q?", answer="a", coe="a is so.", features=make_features()
        )
        assert s.id == "q?"

    def test_perturbations_must_differ_from_coe(self):
        with pytest.raises(ValueError):
            QASample(
                question="q?",
                answer="a",
                coe="a is so.",
                senp="a is so.",
                features=make_features(),
            )

    def test_empty_fields_rejected(self):
        with pytest.raises(ValueError):
            QASample(question="", answer="a", coe="c", features=make_features())


class TestMixedContext:
    def _snips(self):
        return (
            KnowledgeSnippet(id="c", text="x" * 300, provenance=Provenance.COE_PIECE),
            KnowledgeSnippet(id="n", text="y" * 100, provenance=Provenance.IRRELEVANT),
        )

    def test_noise_ratio_by_char_length(self):
        assert noise_ratio(self._snips()) == Fraction(1, 4)

    def test_achieved_ratio_recomputation_enforced(self):
        with pytest.raises(ValueError):
            MixedContext(
                snippets=self._snips(),
                target_ratio=Fraction(1, 4),
                achieved_ratio=Fraction(1, 2),
                rng_seed=0,
            )

    def test_round_trip_and_text(self):
        ctx = MixedContext(
            snippets=self._snips(),
            target_ratio=Fraction(1, 4),
            achieved_ratio=Fraction(1, 4),
            rng_seed=7,
        )
        assert MixedContext.from_dict(ctx.to_dict()) == ctx
        assert ctx.text() == "x" * 300 + "\n\n" + "y" * 100

    def test_misinformation_counts_as_noise(self):
        snips = (
            KnowledgeSnippet(id="c", text="x" * 100, provenance=Provenance.COE_PIECE),
            KnowledgeSnippet(
                id="m", text="y" * 100, provenance=Provenance.MISINFORMATION
            ),
            KnowledgeSnippet(id="w", text="z" * 100, provenance=Provenance.WEB),
        )
        assert noise_ratio(snips) == Fraction(1, 3)


class TestTrialReport:
    def _records(self):
        return (
            TrialRecord(sample_id="a", output="x", judged=True),
            TrialRecord(sample_id="b", output="y", judged=False),
        )

    def test_aggregate_auto_computed(self):
        rep = TrialReport(
            condition="CoE",
            ratio=Fraction(0),
            repeat_index=0,
            records=self._records(),
            metric_kind="ACC",
        )
        assert rep.aggregate == Fraction(1, 2)

    def test_wrong_aggregate_rejected(self):
        with pytest.raises(ValueError):
            TrialReport(
                condition="CoE",
                ratio=Fraction(0),
                repeat_index=0,
                records=self._records(),
                metric_kind="ACC",
                aggregate=Fraction(1),
            )

    def test_unknown_metric_rejected(self):
        with pytest.raises(ValueError):
            TrialReport(
                condition="CoE",
                ratio=Fraction(0),
                repeat_index=0,
                records=self._records(),
                metric_kind="F1",
            )

    def test_round_trip(self):
        rep = TrialReport(
            condition="SenP",
            ratio=Fraction(1, 4),
            repeat_index=2,
            records=self._records(),
            metric_kind="FR",
        )
        assert TrialReport.from_dict(rep.to_dict()) == rep


def test_jsonl_round_trip(tmp_path):
    path = tmp_path / "records.jsonl"
    records = [{"a": 1}, {"b": "héllo"}]
    write_jsonl(path, records)
    assert read_jsonl(path) == records


def test_sample_source_values():
    assert {s.value for s in SampleSource} == {
        "hotpotqa",
        "wikimultihop2",
        "synthetic",
    }
