"""Feature judging and verdicts under the rule-based judge."""

import pytest

from scopecoe.discrimination import (
    SnippetJudgeError,
    UnparseableVerdictError,
    concat_knowledge,
    discriminate_coe,
    judge_intent,
    judge_keyword,
    judge_relation,
    judge_snippet,
    parse_yes_no,
)
from scopecoe.gateway import Client
from scopecoe.model import KnowledgeSnippet


class TestParseYesNo:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("yes", True),
            ("No", False),
            ("  YES, it does", True),
            ('"no"', False),
            ("Yes.", True),
            ("nope", None),  # "no" must stand alone as a word
            ("maybe", None),
            ("the answer is yes", None),  # verdict must lead the response
            ("", None),
        ],
    )
    def test_cases(self, text, expected):
        assert parse_yes_no(text) is expected


class TestFeatureJudges:
    def test_intent(self, mock_client, samples):
        s = samples[0]
        assert judge_intent(mock_client, s.coe, s.features.intent) is True
        assert judge_intent(mock_client, "nothing relevant", s.features.intent) is False

    def test_keyword(self, mock_client, samples):
        s = samples[0]
        kw = s.features.keywords[0]
        assert judge_keyword(mock_client, s.coe, kw) is True
        assert judge_keyword(mock_client, "nothing relevant", kw) is False

    def test_relation_needs_both_keywords(self, mock_client, samples):
        s = samples[1]  # odd index: both keywords appear verbatim in s2
        rel = s.features.relations[0]
        assert judge_relation(mock_client, s.coe, rel) is True
        only_one = f"The {s.features.keywords[0]} exists."
        assert judge_relation(mock_client, only_one, rel) is False

    def test_empty_inputs_rejected(self, mock_client, samples):
        with pytest.raises(ValueError):
            judge_intent(mock_client, "", "intent")
        with pytest.raises(ValueError):
            judge_keyword(mock_client, "text", "")


class TestJudgeSnippet:
    def test_flags_align_to_features(self, mock_client, samples):
        s = samples[1]
        kw1, kw2 = s.features.keywords
        snippet = KnowledgeSnippet(id="x", text=f"The {kw1} is old.")
        judgment = judge_snippet(mock_client, snippet, s.features)
        assert judgment.snippet_id == "x"
        assert judgment.intent_covered is False
        assert judgment.keyword_covered == (True, False)
        assert judgment.relation_covered == (False,)

    def test_failures_wrapped_with_snippet_id(self, samples):
        class Broken:
            deterministic = True
            calls = 0

            def complete(self, req, prompt):
                raise RuntimeError("boom")

        client = Client(backend=Broken(), retries=1)
        snippet = KnowledgeSnippet(id="frag-7", text="anything")
        with pytest.raises(SnippetJudgeError) as excinfo:
            judge_snippet(client, snippet, samples[0].features)
        assert excinfo.value.snippet_id == "frag-7"


class TestDiscriminateCoe:
    def test_full_coe_accepted(self, mock_client, samples):
        for s in samples[:5]:
            verdict = discriminate_coe(mock_client, s.coe, s.features)
            assert verdict.is_coe
            assert verdict.missing_features == ()

    def test_missing_features_named(self, mock_client, samples):
        s = samples[1]
        kw1 = s.features.keywords[0]
        text = f"The {kw1} is an organization."
        verdict = discriminate_coe(mock_client, text, s.features)
        assert not verdict.is_coe
        assert "intent" in verdict.missing_features
        assert "keyword[1]" in verdict.missing_features
        assert "relation[0]" in verdict.missing_features
        assert "keyword[0]" not in verdict.missing_features

    def test_monotone_in_evidence(self, mock_client, samples):
        # Adding text never removes substring-based coverage, so the
        # missing set shrinks (weakly) as evidence accumulates.
        s = samples[1]
        parts = s.coe.split(". ")
        previous = None
        for i in range(1, len(parts) + 1):
            text = ". ".join(parts[:i])
            missing = set(
                discriminate_coe(mock_client, text, s.features).missing_features
            )
            if previous is not None:
                assert missing <= previous
            previous = missing
        assert previous == set()

    def test_whole_equals_per_snippet_union_for_containment_judge(
        self, mock_client, samples
    ):
        # For the containment-based mock, whole-knowledge judgment must
        # pass whenever each feature is covered by some snippet.
        s = samples[1]
        from scopecoe.perturb import segment_sentences

        snippets = [
            KnowledgeSnippet(id=f"p{i}", text=t)
            for i, t in enumerate(segment_sentences(s.coe))
        ]
        judgments = [judge_snippet(mock_client, sn, s.features) for sn in snippets]
        assert any(j.intent_covered for j in judgments)
        for k in range(len(s.features.keywords)):
            assert any(j.keyword_covered[k] for j in judgments)
        whole = discriminate_coe(
            mock_client, concat_knowledge(snippets), s.features
        )
        assert whole.is_coe


class TestRepromptPath:
    def test_unparseable_then_parseable(self, samples):
        class Flaky:
            deterministic = True
            calls = 0

            def complete(self, req, prompt):
                self.calls += 1
                return "hmm" if self.calls == 1 else "yes"

        client = Client(backend=Flaky())
        s = samples[0]
        assert judge_intent(client, "text", s.features.intent) is True
        assert client.calls == 2

    def test_unparseable_twice_raises(self, samples):
        class Hopeless:
            deterministic = True
            calls = 0

            def complete(self, req, prompt):
                return "shrug"

        client = Client(backend=Hopeless())
        with pytest.raises(UnparseableVerdictError):
            judge_intent(client, "text", samples[0].features.intent)


def test_concat_knowledge_blank_line_join():
    snippets = [
        KnowledgeSnippet(id="a", text="one"),
        KnowledgeSnippet(id="b", text="two"),
    ]
    assert concat_knowledge(snippets) == "one\n\ntwo"
