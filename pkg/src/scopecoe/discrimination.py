"""Feature judgment and the CoE / Non-CoE verdict.

Each feature check is one yes/no model call. Whole-knowledge verdicts
concatenate snippets with blank-line separators and judge the result as a
single premise; per-snippet judgment feeds the coverage search instead.
"""

from __future__ import annotations

import json
import re
from typing import Sequence

from .gateway import Client, parallel_map
from .model import (
    CoEVerdict,
    FeatureJudgment,
    KnowledgeSnippet,
    QuestionFeatures,
    Relation,
)

REPROMPT_SUFFIX = '\nPlease answer with only the word "yes" or "no".'

_VERDICT_RE = re.compile(r"^[\s\"'`]*?(yes|no)\b", re.IGNORECASE)


class UnparseableVerdictError(RuntimeError):
    """The judge produced neither yes nor no, even after one reprompt."""


class SnippetJudgeError(RuntimeError):
    """A judge call failed while judging one snippet."""

    def __init__(self, snippet_id: str, cause: Exception):
        super().__init__(f"snippet {snippet_id!r}: {cause}")
        self.snippet_id = snippet_id
        self.cause = cause


def parse_yes_no(text: str) -> bool | None:
    m = _VERDICT_RE.match(text)
    if m:
        return m.group(1).lower() == "yes"
    return None


def _judge(client: Client, template: str, bindings: dict) -> bool:
    raw = client.call(template, bindings)
    verdict = parse_yes_no(raw)
    if verdict is not None:
        return verdict
    reprompt = dict(bindings)
    reprompt["External Knowledge"] = (
        bindings["External Knowledge"] + REPROMPT_SUFFIX
    )
    raw = client.call(template, reprompt)
    verdict = parse_yes_no(raw)
    if verdict is None:
        raise UnparseableVerdictError(
            f"no yes/no in {template!r} response: {raw[:200]!r}"
        )
    return verdict


def judge_intent(client: Client, knowledge_text: str, intent: str) -> bool:
    if not knowledge_text or not intent:
        raise ValueError("knowledge and intent must be non-empty")
    return _judge(
        client,
        "intent_discrimination",
        {"Intent": intent, "External Knowledge": knowledge_text},
    )


def judge_keyword(client: Client, knowledge_text: str, keyword: str) -> bool:
    if not knowledge_text or not keyword:
        raise ValueError("knowledge and keyword must be non-empty")
    return _judge(
        client,
        "keyword_discrimination",
        {"Keyword": keyword, "External Knowledge": knowledge_text},
    )


def judge_relation(client: Client, knowledge_text: str, relation: Relation) -> bool:
    if not knowledge_text:
        raise ValueError("knowledge must be non-empty")
    # The pair keywords travel as an extra binding so rule-based backends
    # can judge without parsing the description.
    return _judge(
        client,
        "relation_discrimination",
        {
            "Relation": relation.description,
            "External Knowledge": knowledge_text,
            "Relation Keywords": json.dumps(
                list(relation.keyword_pair), ensure_ascii=False
            ),
        },
    )


def judge_snippet(
    client: Client, snippet: KnowledgeSnippet, features: QuestionFeatures
) -> FeatureJudgment:
    """One intent call, one per keyword, one per relation; flags are
    position-aligned to the feature lists."""
    try:
        tasks = (
            [lambda: judge_intent(client, snippet.text, features.intent)]
            + [
                (lambda kw=kw: judge_keyword(client, snippet.text, kw))
                for kw in features.keywords
            ]
            + [
                (lambda rel=rel: judge_relation(client, snippet.text, rel))
                for rel in features.relations
            ]
        )
        flags = parallel_map(lambda f: f(), tasks, client.max_parallel)
    except Exception as exc:
        raise SnippetJudgeError(snippet.id, exc) from exc
    nk = len(features.keywords)
    return FeatureJudgment(
        snippet_id=snippet.id,
        intent_covered=flags[0],
        keyword_covered=tuple(flags[1 : 1 + nk]),
        relation_covered=tuple(flags[1 + nk :]),
    )


def concat_knowledge(snippets: Sequence[KnowledgeSnippet]) -> str:
    """Blank-line join in source order; the single-premise form for
    whole-knowledge discrimination."""
    return "\n\n".join(s.text for s in snippets)


def discriminate_coe(
    client: Client, knowledge_text: str, features: QuestionFeatures
) -> CoEVerdict:
    """CoE exists iff the intent, every keyword and every relation are all
    judged present in the knowledge taken as one premise."""
    missing: list[str] = []
    if not judge_intent(client, knowledge_text, features.intent):
        missing.append("intent")
    for i, kw in enumerate(features.keywords):
        if not judge_keyword(client, knowledge_text, kw):
            missing.append(f"keyword[{i}]")
    for j, rel in enumerate(features.relations):
        if not judge_relation(client, knowledge_text, rel):
            missing.append(f"relation[{j}]")
    return CoEVerdict(is_coe=not missing, missing_features=tuple(missing))
