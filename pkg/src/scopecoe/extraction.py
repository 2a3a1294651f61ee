"""Question feature extraction: two model calls plus normalization.

The first call yields the intent and keywords, the second the relations
(which need the keywords). Outputs are repaired where possible (trim,
case-insensitive dedupe, drop relations referencing unknown keywords) and
validated before being returned.
"""

from __future__ import annotations

import logging

from .gateway import Client, first_json_value
from .model import QuestionFeatures, Relation, validate_features

logger = logging.getLogger(__name__)

REPROMPT_SUFFIX = (
    "\nPlease output only the json object, with no explanation or extra text."
)


class MalformedResponseError(RuntimeError):
    """The model did not produce a parseable structured response, even
    after one reprompt."""


class FeatureValidationError(RuntimeError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def _structured_call(client: Client, template: str, bindings: dict):
    """One call plus a single reprompt appending a bare-output instruction."""
    raw = client.call(template, bindings)
    value = first_json_value(raw)
    if value is not None:
        return value
    reprompt = dict(bindings)
    last_var = "Keywords" if template == "relation_extraction" else "Question"
    reprompt[last_var] = str(bindings[last_var]) + REPROMPT_SUFFIX
    raw = client.call(template, reprompt)
    value = first_json_value(raw)
    if value is None:
        raise MalformedResponseError(
            f"unparseable response from {template!r}: {raw[:200]!r}"
        )
    return value


def extract_intent_keywords(client: Client, question: str) -> tuple[str, list[str]]:
    if not question:
        raise ValueError("question must be non-empty")
    value = _structured_call(
        client, "intent_keyword_extraction", {"Question": question}
    )
    if not isinstance(value, dict) or "Intent" not in value:
        raise MalformedResponseError(f"unexpected extraction shape: {value!r}")
    intent = str(value.get("Intent", "")).strip()
    keywords: list[str] = []
    seen: set[str] = set()
    for kw in value.get("Keywords", []):
        kw = str(kw).strip()
        if kw and kw.lower() not in seen:
            keywords.append(kw)
            seen.add(kw.lower())
    return intent, keywords


def extract_relations(
    client: Client, question: str, keywords: list[str]
) -> list[Relation]:
    if not keywords:
        raise ValueError("keywords must be non-empty")
    import json

    value = _structured_call(
        client,
        "relation_extraction",
        {"Question": question, "Keywords": json.dumps(keywords, ensure_ascii=False)},
    )
    if not isinstance(value, list):
        raise MalformedResponseError(f"unexpected relations shape: {value!r}")
    known = {kw.lower() for kw in keywords}
    relations: list[Relation] = []
    for item in value:
        if not isinstance(item, dict):
            continue
        pair = item.get("Keywords") or item.get("keywords") or []
        description = str(item.get("Description") or item.get("description") or "")
        if len(pair) != 2 or not description.strip():
            logger.warning("dropping malformed relation %r", item)
            continue
        if not all(str(kw).lower() in known for kw in pair):
            logger.warning("dropping relation referencing unknown keyword: %r", item)
            continue
        relations.append(Relation(keyword_pair=(str(pair[0]), str(pair[1])),
                                  description=description))
    return relations


def extract_question_features(client: Client, question: str) -> QuestionFeatures:
    intent, keywords = extract_intent_keywords(client, question)
    relations = extract_relations(client, question, keywords) if keywords else []
    features = QuestionFeatures(
        intent=intent, keywords=tuple(keywords), relations=tuple(relations)
    )
    violations = validate_features(features)
    if violations:
        raise FeatureValidationError(violations)
    return features
