"""Bundled synthetic QA set plus matching mock rules and search fixtures.

The samples are constructed so the rule-based mock backend forces the
expected outcomes: contexts keeping the full evidence chain answer
correctly, perturbed or reranker-truncated contexts do not. Even-indexed
samples break under a single sentence removal; odd-indexed ones need
cumulative removal, exercising both paths.
"""

from __future__ import annotations

from pathlib import Path

from .gateway import MockRules, QARule
from .model import QASample, QuestionFeatures, Relation, SampleSource
from .noise import FixtureSearchClient, SearchResult, irrelevant_queries

INTENT = "City location record"
NOISE_SNIPPETS_PER_QUERY = 8
WEB_SNIPPETS_PER_QUESTION = 10


def _city(i: int) -> str:
    return f"Zephyr Falls {i}"


def _wrong_city(i: int) -> str:
    return f"Drystone Hollow {i}"


def _keywords(i: int) -> tuple[str, str]:
    return f"Brell Society {i}", f"sapphire archive {i}"


def build_samples(n: int = 20) -> list[QASample]:
    samples = []
    for i in range(n):
        kw1, kw2 = _keywords(i)
        question = (
            f"In which city can the {kw2} maintained by the {kw1} be found?"
        )
        relation = Relation(
            keyword_pair=(kw2, kw1),
            description=f"The {kw2} is maintained by the {kw1}.",
        )
        s1 = f"The {kw1} is an old scholarly organization devoted to rare gemstones."
        if i % 2 == 1:
            s2 = f"The {kw2} is maintained by the {kw1}."
        else:
            s2 = f"The {kw2} is maintained by that society."
        s3 = f"{INTENT}: the {kw2} can be found in {_city(i)}."
        samples.append(
            QASample(
                question=question,
                answer=_city(i),
                coe=" ".join([s1, s2, s3]),
                features=QuestionFeatures(
                    intent=INTENT, keywords=(kw1, kw2), relations=(relation,)
                ),
                source=SampleSource.SYNTHETIC,
                seed_metadata={
                    "id": f"syn-{i:03d}",
                    "incorrect_answer": _wrong_city(i),
                    "hypernyms": {
                        kw1: "a learned association",
                        kw2: "the record collection",
                    },
                },
            )
        )
    return samples


def rules_from_samples(samples: list[QASample]) -> MockRules:
    """Mock rules derived from any sample set: extraction and relation
    tables from the features, answering keyed on full evidence presence,
    phrase tables from per-sample metadata."""
    rules = MockRules()
    for sample in samples:
        features = sample.features
        rules.extractions[sample.question] = {
            "Intent": features.intent,
            "Keywords": list(features.keywords),
        }
        rules.relations[sample.question] = [
            {"Keywords": list(rel.keyword_pair), "Description": rel.description}
            for rel in features.relations
        ]
        meta = sample.seed_metadata
        incorrect = meta.get("incorrect_answer", f"not {sample.answer}")
        rules.phrases[sample.answer] = incorrect
        for kw, hypernym in meta.get("hypernyms", {}).items():
            rules.phrases[kw] = hypernym
        rules.qa[sample.question] = QARule(
            requires=tuple(features.keywords) + (features.intent,),
            candidates=(sample.answer, incorrect),
        )
    return rules


def _noise_texts(i: int, query_index: int) -> list[str]:
    # Varied lengths keep ratio mixing granular; none of these contain the
    # intent phrase, a keyword, or any answer string.
    texts = []
    fillers = [
        "guild fairs drew crowds",
        "ledgers list caravan tolls and stamps",
        "regional guilds and their customs shaped trade for generations",
        "old provinces kept detailed ledgers of caravan crossings and levies",
        "tariff rolls",
        "scholars debate the origins of early mineral taxonomies at length",
        "market towns grew around seasonal gemstone fairs",
        "mule trains crossed the passes twice a season",
    ]
    for j in range(NOISE_SNIPPETS_PER_QUERY):
        filler = fillers[j % len(fillers)]
        texts.append(f"Note {i}-{query_index}-{j}: {filler}.")
    return texts


def _web_texts(i: int) -> list[str]:
    # High token overlap with the question, but no contiguous keyword
    # mention: the naive overlap reranker prefers these over CoE pieces.
    texts = []
    for j in range(WEB_SNIPPETS_PER_QUESTION):
        texts.append(
            f"Travel notes {i}-{j}: the brell region and its society wonder "
            f"in which city the sapphire trade archive {i} can be found, "
            f"maintained by unnamed keepers."
        )
    return texts


def install_search_fixtures(
    samples: list[QASample], directory: str | Path
) -> FixtureSearchClient:
    """Write fixture responses for the background-noise queries and for the
    question-level web retrieval used by the RAG comparison."""
    client = FixtureSearchClient(directory)
    for i, sample in enumerate(samples):
        for q_idx, query in enumerate(irrelevant_queries(sample.features)):
            client.store(
                query,
                [
                    SearchResult(
                        title=f"background {i}-{q_idx}-{j}",
                        text=text,
                        url=f"https://example.test/bg/{i}/{q_idx}/{j}",
                    )
                    for j, text in enumerate(_noise_texts(i, q_idx))
                ],
            )
        client.store(
            sample.question,
            [
                SearchResult(
                    title=f"web {i}-{j}",
                    text=text,
                    url=f"https://example.test/web/{i}/{j}",
                )
                for j, text in enumerate(_web_texts(i))
            ],
        )
    return client
