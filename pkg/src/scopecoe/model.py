"""Domain types shared by the whole pipeline.

Everything here is immutable after construction; instances can be shared
freely between threads. Serialization targets one-record-per-line UTF-8
JSON with the canonical field names used by all CLI commands.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, Mapping, Optional, Sequence


class Provenance(str, Enum):
    COE_PIECE = "coe_piece"
    IRRELEVANT = "irrelevant"
    MISINFORMATION = "misinformation"
    WEB = "web"
    OTHER = "other"


class SampleSource(str, Enum):
    HOTPOTQA = "hotpotqa"
    WIKIMULTIHOP2 = "wikimultihop2"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class Relation:
    """A described connection between exactly two question keywords."""

    keyword_pair: tuple[str, str]
    description: str

    def __post_init__(self):
        if len(self.keyword_pair) != 2:
            raise ValueError("keyword_pair must have exactly 2 elements")
        object.__setattr__(self, "keyword_pair", tuple(self.keyword_pair))

    def to_dict(self) -> dict:
        return {"keywords": list(self.keyword_pair), "description": self.description}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Relation":
        kws = d["keywords"]
        return cls(keyword_pair=(kws[0], kws[1]), description=d["description"])


@dataclass(frozen=True)
class QuestionFeatures:
    """Intent, keywords and keyword relations extracted from a question."""

    intent: str
    keywords: tuple[str, ...]
    relations: tuple[Relation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "keywords", tuple(self.keywords))
        object.__setattr__(self, "relations", tuple(self.relations))

    def to_dict(self) -> dict:
        return {
            "intent": self.intent,
            "keywords": list(self.keywords),
            "relations": [r.to_dict() for r in self.relations],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "QuestionFeatures":
        return cls(
            intent=d["intent"],
            keywords=tuple(d["keywords"]),
            relations=tuple(Relation.from_dict(r) for r in d.get("relations", [])),
        )


def validate_features(f: QuestionFeatures) -> list[str]:
    """Return violation descriptions; empty list means the features are valid.

    Violations are data, not failures: callers decide whether to repair,
    drop, or abort.
    """
    violations: list[str] = []
    if not f.intent.strip():
        violations.append("intent: empty after whitespace trim")
    lowered: list[str] = []
    for kw in f.keywords:
        if not kw:
            violations.append("keywords: contains an empty string")
            continue
        if kw.lower() in lowered:
            violations.append(f"keywords: duplicate entry {kw!r} (case-insensitive)")
        lowered.append(kw.lower())
    known = {kw.lower() for kw in f.keywords if kw}
    for i, rel in enumerate(f.relations):
        for kw in rel.keyword_pair:
            if kw.lower() not in known:
                violations.append(
                    f"relations[{i}]: references unknown keyword {kw!r}"
                )
        if not rel.description.strip():
            violations.append(f"relations[{i}]: empty description")
    return violations


@dataclass(frozen=True)
class KnowledgeSnippet:
    """One unit of external knowledge with a provenance label."""

    id: str
    text: str
    provenance: Provenance = Provenance.OTHER
    char_len: int = field(default=-1)

    def __post_init__(self):
        if not self.text:
            raise ValueError("snippet text must be non-empty")
        # char_len counts Unicode scalar values so ratio mixing is
        # encoding-independent.
        actual = len(self.text)
        if self.char_len == -1:
            object.__setattr__(self, "char_len", actual)
        elif self.char_len != actual:
            raise ValueError(
                f"char_len {self.char_len} does not match text length {actual}"
            )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "provenance": self.provenance.value,
            "char_len": self.char_len,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "KnowledgeSnippet":
        return cls(
            id=d["id"],
            text=d["text"],
            provenance=Provenance(d.get("provenance", "other")),
            char_len=d.get("char_len", -1),
        )


def check_unique_ids(snippets: Iterable[KnowledgeSnippet]) -> None:
    seen: set[str] = set()
    for s in snippets:
        if s.id in seen:
            raise ValueError(f"duplicate snippet id {s.id!r}")
        seen.add(s.id)


@dataclass(frozen=True)
class FeatureJudgment:
    """Per-snippet boolean coverage flags, positionally aligned to features."""

    snippet_id: str
    intent_covered: bool
    keyword_covered: tuple[bool, ...]
    relation_covered: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "keyword_covered", tuple(self.keyword_covered))
        object.__setattr__(self, "relation_covered", tuple(self.relation_covered))

    def to_dict(self) -> dict:
        return {
            "snippet_id": self.snippet_id,
            "intent_covered": self.intent_covered,
            "keyword_covered": list(self.keyword_covered),
            "relation_covered": list(self.relation_covered),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FeatureJudgment":
        return cls(
            snippet_id=d["snippet_id"],
            intent_covered=d["intent_covered"],
            keyword_covered=tuple(d["keyword_covered"]),
            relation_covered=tuple(d["relation_covered"]),
        )


@dataclass(frozen=True)
class CoEVerdict:
    """Whole-knowledge verdict: CoE exists iff no feature is missing."""

    is_coe: bool
    missing_features: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "missing_features", tuple(self.missing_features))
        if self.is_coe != (len(self.missing_features) == 0):
            raise ValueError("is_coe must be true iff missing_features is empty")

    def to_dict(self) -> dict:
        return {"is_coe": self.is_coe, "missing_features": list(self.missing_features)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CoEVerdict":
        return cls(is_coe=d["is_coe"], missing_features=tuple(d["missing_features"]))


@dataclass(frozen=True)
class QASample:
    """The five-element tuple plus extracted features and bookkeeping."""

    question: str
    answer: str
    coe: str
    features: QuestionFeatures
    senp: Optional[str] = None
    wordp: Optional[str] = None
    source: SampleSource = SampleSource.SYNTHETIC
    seed_metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("question", "answer", "coe"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        for name in ("senp", "wordp"):
            val = getattr(self, name)
            if val is not None and val == self.coe:
                raise ValueError(f"{name} must differ from coe")
        object.__setattr__(self, "seed_metadata", dict(self.seed_metadata))

    @property
    def id(self) -> str:
        return str(self.seed_metadata.get("id", self.question))

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "question": self.question,
            "answer": self.answer,
            "coe": self.coe,
            "features": self.features.to_dict(),
            "source": self.source.value,
        }
        if self.senp is not None:
            d["senp"] = self.senp
        if self.wordp is not None:
            d["wordp"] = self.wordp
        if self.seed_metadata:
            d["seed_metadata"] = dict(self.seed_metadata)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "QASample":
        return cls(
            question=d["question"],
            answer=d["answer"],
            coe=d["coe"],
            features=QuestionFeatures.from_dict(d["features"]),
            senp=d.get("senp"),
            wordp=d.get("wordp"),
            source=SampleSource(d.get("source", "synthetic")),
            seed_metadata=d.get("seed_metadata", {}),
        )


@dataclass(frozen=True)
class MixedContext:
    """A noise-injected context with its exact achieved noise ratio.

    Ratios are exact rationals over character counts, so the +-0.05
    tolerance check never suffers float drift.
    """

    snippets: tuple[KnowledgeSnippet, ...]
    target_ratio: Fraction
    achieved_ratio: Fraction
    rng_seed: int

    CORE_PROVENANCES = (Provenance.COE_PIECE, Provenance.OTHER, Provenance.WEB)

    def __post_init__(self):
        object.__setattr__(self, "snippets", tuple(self.snippets))
        recomputed = noise_ratio(self.snippets)
        if recomputed != self.achieved_ratio:
            raise ValueError(
                f"achieved_ratio {self.achieved_ratio} does not match "
                f"recomputed {recomputed}"
            )

    def text(self) -> str:
        return "\n\n".join(s.text for s in self.snippets)

    def to_dict(self) -> dict:
        return {
            "snippets": [s.to_dict() for s in self.snippets],
            "target_ratio": str(self.target_ratio),
            "achieved_ratio": str(self.achieved_ratio),
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MixedContext":
        return cls(
            snippets=tuple(KnowledgeSnippet.from_dict(s) for s in d["snippets"]),
            target_ratio=Fraction(d["target_ratio"]),
            achieved_ratio=Fraction(d["achieved_ratio"]),
            rng_seed=d["rng_seed"],
        )


def noise_ratio(snippets: Sequence[KnowledgeSnippet]) -> Fraction:
    """Character-length fraction of non-core snippets in a context."""
    total = sum(s.char_len for s in snippets)
    if total == 0:
        return Fraction(0)
    noise = sum(
        s.char_len
        for s in snippets
        if s.provenance not in MixedContext.CORE_PROVENANCES
    )
    return Fraction(noise, total)


@dataclass(frozen=True)
class TrialRecord:
    """One model output and its judge verdict within a repeat."""

    sample_id: str
    output: str
    judged: bool
    error: Optional[str] = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "sample_id": self.sample_id,
            "output": self.output,
            "judged": self.judged,
        }
        if self.error is not None:
            d["error"] = self.error
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TrialRecord":
        return cls(
            sample_id=d["sample_id"],
            output=d["output"],
            judged=d["judged"],
            error=d.get("error"),
        )


@dataclass(frozen=True)
class TrialReport:
    """Per-condition, per-repeat outcomes with the aggregate metric."""

    condition: str
    ratio: Fraction
    repeat_index: int
    records: tuple[TrialRecord, ...]
    metric_kind: str  # "ACC" | "FR"
    aggregate: Fraction = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValueError("records must be non-empty")
        if self.metric_kind not in ("ACC", "FR"):
            raise ValueError(f"unknown metric kind {self.metric_kind!r}")
        expected = Fraction(
            sum(1 for r in self.records if r.judged), len(self.records)
        )
        if self.aggregate is None:
            object.__setattr__(self, "aggregate", expected)
        elif self.aggregate != expected:
            raise ValueError(
                f"aggregate {self.aggregate} does not equal verdict fraction "
                f"{expected}"
            )

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "ratio": str(self.ratio),
            "repeat_index": self.repeat_index,
            "records": [r.to_dict() for r in self.records],
            "metric_kind": self.metric_kind,
            "aggregate": str(self.aggregate),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TrialReport":
        return cls(
            condition=d["condition"],
            ratio=Fraction(d["ratio"]),
            repeat_index=d["repeat_index"],
            records=tuple(TrialRecord.from_dict(r) for r in d["records"]),
            metric_kind=d["metric_kind"],
            aggregate=Fraction(d["aggregate"]),
        )


def write_jsonl(path, records: Iterable[Mapping[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
