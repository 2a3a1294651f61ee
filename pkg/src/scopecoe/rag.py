"""The subject RAG case: shared corpus, top-k relevance baseline, and the
coverage-search selection that replaces the reranker.

Both arms consume byte-identical corpora per sample; context order is
selection order (rank order for the baseline, insertion order for the
coverage arm).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Protocol, Sequence

from .coverage import CoverageReport, coverage_of, minimal_coverage_search
from .discrimination import judge_snippet
from .evaluation import answer_question, judge_consistency
from .gateway import Client
from .model import (
    KnowledgeSnippet,
    Provenance,
    QASample,
    TrialRecord,
    TrialReport,
)
from .noise import SearchClient, SearchError
from .perturb import segment_sentences

_TOKEN_RE = re.compile(r"[a-z0-9']+")


class RelevanceScorer(Protocol):
    def score(self, question: str, snippet: KnowledgeSnippet) -> float: ...


class TokenOverlapScorer:
    """Deterministic offline default: count of distinct normalized question
    tokens present in the snippet."""

    def score(self, question: str, snippet: KnowledgeSnippet) -> float:
        q_tokens = set(_TOKEN_RE.findall(question.lower()))
        s_tokens = set(_TOKEN_RE.findall(snippet.text.lower()))
        return float(len(q_tokens & s_tokens))


def build_corpus(
    sample: QASample, retrieved_snippets: Sequence[KnowledgeSnippet]
) -> list[KnowledgeSnippet]:
    """Retrieved web snippets (deduplicated by text) plus the CoE split
    into sentence pieces, appended in sentence order."""
    corpus: list[KnowledgeSnippet] = []
    seen_texts: set[str] = set()
    for snippet in retrieved_snippets:
        norm = " ".join(snippet.text.lower().split())
        if norm in seen_texts:
            continue
        seen_texts.add(norm)
        corpus.append(snippet)
    for i, sentence in enumerate(segment_sentences(sample.coe)):
        corpus.append(
            KnowledgeSnippet(
                id=f"coe-{sample.id}-{i}",
                text=sentence,
                provenance=Provenance.COE_PIECE,
            )
        )
    return corpus


def naive_rag_select(
    question: str,
    corpus: Sequence[KnowledgeSnippet],
    k: int = 5,
    scorer: Optional[RelevanceScorer] = None,
) -> list[KnowledgeSnippet]:
    """Top-k by descending relevance score, ties by ascending snippet id."""
    scorer = scorer or TokenOverlapScorer()
    ranked = sorted(
        corpus, key=lambda s: (-scorer.score(question, s), s.id)
    )
    return ranked[: min(k, len(corpus))]


def scopecoe_select(
    judge_client: Client,
    features,
    corpus: Sequence[KnowledgeSnippet],
) -> tuple[list[KnowledgeSnippet], CoverageReport]:
    """Judge every corpus snippet, then run the minimal coverage search.

    No k cap: the selection is whatever the coverage search returns.
    """
    judgments = [judge_snippet(judge_client, s, features) for s in corpus]
    selected = minimal_coverage_search(list(corpus), judgments)
    report = coverage_of(
        [s.id for s in selected],
        judgments,
        relation_count=len(features.relations),
        keyword_count=len(features.keywords),
    )
    return selected, report


@dataclass(frozen=True)
class RagArmResult:
    condition: str
    report: TrialReport
    mean_selected: float


@dataclass(frozen=True)
class RagComparison:
    naive: RagArmResult
    scopecoe: RagArmResult


def run_rag_comparison(
    samples: Sequence[QASample],
    answer_client: Client,
    judge_client: Client,
    search_client: SearchClient,
    k: int = 5,
    per_query_limit: int = 10,
    scorer: Optional[RelevanceScorer] = None,
) -> RagComparison:
    """Paired design: both arms share retrieval and corpus per sample."""
    naive_records: list[TrialRecord] = []
    scope_records: list[TrialRecord] = []
    naive_sizes: list[int] = []
    scope_sizes: list[int] = []

    for sample in samples:
        try:
            results = search_client.search(sample.question, per_query_limit)
            retrieved = [
                KnowledgeSnippet(
                    id=f"web-{sample.id}-{i}",
                    text=r.text,
                    provenance=Provenance.WEB,
                )
                for i, r in enumerate(results)
                if r.text.strip()
            ]
        except Exception as exc:
            raise SearchError(sample.question, exc) from exc
        corpus = build_corpus(sample, retrieved)

        def run_arm(selection: Sequence[KnowledgeSnippet]) -> TrialRecord:
            try:
                context = "\n\n".join(s.text for s in selection)
                output = answer_question(answer_client, sample.question, context)
                judged = judge_consistency(
                    judge_client, sample.question, sample.answer, output
                )
                return TrialRecord(
                    sample_id=sample.id, output=output, judged=judged
                )
            except Exception as exc:  # noqa: BLE001 - recorded, not raised
                return TrialRecord(
                    sample_id=sample.id,
                    output="",
                    judged=False,
                    error=f"{type(exc).__name__}: {exc}",
                )

        naive_selection = naive_rag_select(sample.question, corpus, k, scorer)
        naive_sizes.append(len(naive_selection))
        naive_records.append(run_arm(naive_selection))

        scope_selection, _ = scopecoe_select(judge_client, sample.features, corpus)
        scope_sizes.append(len(scope_selection))
        scope_records.append(run_arm(scope_selection))

    def arm(condition: str, records, sizes) -> RagArmResult:
        return RagArmResult(
            condition=condition,
            report=TrialReport(
                condition=condition,
                ratio=Fraction(0),
                repeat_index=0,
                records=tuple(sorted(records, key=lambda r: r.sample_id)),
                metric_kind="ACC",
            ),
            mean_selected=sum(sizes) / len(sizes) if sizes else 0.0,
        )

    return RagComparison(
        naive=arm("RAG", naive_records, naive_sizes),
        scopecoe=arm("RAG+ScopeCoE", scope_records, scope_sizes),
    )
