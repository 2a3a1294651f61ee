"""Irrelevant-snippet collection and character-ratio context mixing.

Queries follow the keyword-background template; mixing works on exact
rational character fractions with a +-0.05 tolerance.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Protocol, Sequence

from .model import KnowledgeSnippet, MixedContext, Provenance, QuestionFeatures, noise_ratio

QUERY_TEMPLATE = "Please introduce the background of the {keyword}"
RATIO_TOLERANCE = Fraction(1, 20)


class SearchError(RuntimeError):
    def __init__(self, query: str, cause: Exception):
        super().__init__(f"search failed for {query!r}: {cause}")
        self.query = query


class InsufficientNoiseError(RuntimeError):
    """The pool's character mass cannot reach the target ratio."""


class ToleranceUnreachableError(RuntimeError):
    """Snippet granularity cannot land within the ratio tolerance."""


@dataclass(frozen=True)
class SearchResult:
    title: str
    text: str
    url: str


class SearchClient(Protocol):
    def search(self, query: str, limit: int) -> list[SearchResult]: ...


class FixtureSearchClient:
    """Replays canned responses from a directory keyed by query digest."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    @staticmethod
    def query_digest(query: str) -> str:
        return hashlib.sha256(query.encode()).hexdigest()

    def fixture_path(self, query: str) -> Path:
        return self.directory / f"{self.query_digest(query)}.json"

    def store(self, query: str, results: Sequence[SearchResult]) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        payload = {
            "query": query,
            "results": [
                {"title": r.title, "text": r.text, "url": r.url} for r in results
            ],
        }
        self.fixture_path(query).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8"
        )

    def search(self, query: str, limit: int) -> list[SearchResult]:
        path = self.fixture_path(query)
        if not path.exists():
            raise FileNotFoundError(f"no fixture for query {query!r} at {path}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        return [
            SearchResult(title=r["title"], text=r["text"], url=r["url"])
            for r in payload["results"][:limit]
        ]


def irrelevant_queries(features: QuestionFeatures) -> list[str]:
    """One background query per keyword, template applied verbatim."""
    if not features.keywords:
        raise ValueError("features.keywords must be non-empty")
    return [QUERY_TEMPLATE.format(keyword=kw) for kw in features.keywords]


def fetch_noise_pool(
    queries: Sequence[str],
    search_client: SearchClient,
    per_query_limit: int = 10,
    answer: Optional[str] = None,
) -> list[KnowledgeSnippet]:
    """Deduplicated irrelevant snippets; anything containing the answer
    string is filtered out."""
    pool: list[KnowledgeSnippet] = []
    seen: set[str] = set()
    for query in queries:
        try:
            results = search_client.search(query, per_query_limit)
        except Exception as exc:
            raise SearchError(query, exc) from exc
        for result in results:
            text = result.text.strip()
            if not text:
                continue
            digest = hashlib.sha256(" ".join(text.lower().split()).encode()).hexdigest()
            if digest in seen:
                continue
            if answer is not None and answer.lower() in text.lower():
                continue
            seen.add(digest)
            pool.append(
                KnowledgeSnippet(
                    id=f"noise-{digest[:12]}",
                    text=text,
                    provenance=Provenance.IRRELEVANT,
                )
            )
    return pool


def mix_to_ratio(
    core_snippets: Sequence[KnowledgeSnippet],
    noise_pool: Sequence[KnowledgeSnippet],
    target_ratio: Fraction | float,
    rng_seed: int,
) -> MixedContext:
    """Greedy character-length mixing to the target noise proportion.

    Noise snippets are taken in seeded-shuffled order while the achieved
    ratio is below target; once the next snippet would reach or overshoot
    the target, the remaining snippet whose addition lands closest to the
    target is taken instead (or none, if stopping is closer). Noise is then
    interleaved among the core snippets at seeded-random positions,
    preserving core order.
    """
    target = Fraction(target_ratio)
    if not 0 <= target < 1:
        raise ValueError("target_ratio must be in [0, 1)")
    core = list(core_snippets)
    core_chars = sum(s.char_len for s in core)
    if core_chars == 0:
        raise ValueError("core snippets must be non-empty")
    rng = random.Random(rng_seed)

    chosen: list[KnowledgeSnippet] = []
    if target > 0:
        pool = list(noise_pool)
        rng.shuffle(pool)
        noise_chars = 0

        def ratio(chars: int) -> Fraction:
            return Fraction(chars, core_chars + chars)

        remaining = pool
        while ratio(noise_chars) < target and remaining:
            snippet = remaining[0]
            if ratio(noise_chars + snippet.char_len) >= target:
                best = min(
                    remaining,
                    key=lambda s: abs(ratio(noise_chars + s.char_len) - target),
                )
                if abs(ratio(noise_chars + best.char_len) - target) < abs(
                    ratio(noise_chars) - target
                ):
                    chosen.append(best)
                    noise_chars += best.char_len
                break
            chosen.append(snippet)
            noise_chars += snippet.char_len
            remaining = remaining[1:]
        achieved = ratio(noise_chars)
        if achieved < target - RATIO_TOLERANCE and not remaining:
            raise InsufficientNoiseError(
                f"pool exhausted at ratio {float(achieved):.3f}, "
                f"target {float(target):.3f}"
            )
        if abs(achieved - target) > RATIO_TOLERANCE:
            raise ToleranceUnreachableError(
                f"closest achievable ratio {float(achieved):.3f} is outside "
                f"the tolerance around {float(target):.3f}"
            )

    mixed = list(core)
    for snippet in chosen:
        mixed.insert(rng.randint(0, len(mixed)), snippet)
    return MixedContext(
        snippets=tuple(mixed),
        target_ratio=target,
        achieved_ratio=noise_ratio(mixed),
        rng_seed=rng_seed,
    )
