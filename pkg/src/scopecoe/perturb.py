"""Non-CoE construction: sentence removal, keyword generalization, answer
substitution and misinformation snippets.

All randomness is per-call seeded; nothing touches the global RNG.
"""

from __future__ import annotations

import json
import random
import re
from typing import Callable, Sequence

from .discrimination import discriminate_coe
from .gateway import Client, first_json_value
from .model import KnowledgeSnippet, Provenance, QASample

# Tokens whose trailing period does not end a sentence.
ABBREVIATIONS = {
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "no", "vs", "etc",
    "inc", "ltd", "co", "fig", "al", "jan", "feb", "mar", "apr", "jun",
    "jul", "aug", "sep", "sept", "oct", "nov", "dec", "u.s", "u.k", "u.n",
    "e.g", "i.e",
}

_TERMINATOR_RE = re.compile(r"[.!?]")


class NoCandidatesError(RuntimeError):
    """Every sentence contains the answer (or no sentence has a keyword)."""


class NeverBreaksError(RuntimeError):
    """Removing all candidate sentences still leaves a CoE."""


class ExhaustedKeywordsError(RuntimeError):
    """No keyword substitution produced a Non-CoE text."""


class FormatMismatchError(RuntimeError):
    """The generated incorrect answer failed type/format validation twice."""


class AnswerNotFoundError(RuntimeError):
    pass


class MisinformationError(RuntimeError):
    """Generated snippets repeatedly omitted the incorrect answer."""


def _split_points(text: str, guard_single_letters: bool) -> list[int]:
    points = []
    for m in _TERMINATOR_RE.finditer(text):
        end = m.end()
        # Only split at end-of-text or before whitespace.
        if end < len(text) and not text[end].isspace():
            continue
        if m.group() == ".":
            word = re.search(r"[\w.']*$", text[: m.start()]).group()
            lowered = word.lower().rstrip(".")
            if lowered in ABBREVIATIONS:
                continue
            if guard_single_letters and len(lowered) == 1 and lowered.isalpha():
                continue
        points.append(end)
    if not points or points[-1] != len(text):
        points.append(len(text))
    return points


def segment_with_separators(
    text: str, guard_single_letters: bool = True
) -> tuple[list[str], list[str]]:
    """Sentences plus trailing separators, one per sentence, such that
    concatenating ``sentence[i] + separator[i]`` reproduces the input
    exactly."""
    if not text:
        raise ValueError("text must be non-empty")
    sentences: list[str] = []
    separators: list[str] = []
    start = 0
    for end in _split_points(text, guard_single_letters):
        piece = text[start:end]
        stripped = piece.lstrip()
        lead = piece[: len(piece) - len(stripped)]
        if sentences:
            separators[-1] += lead
        elif lead:
            # Leading whitespace of the very first sentence stays attached.
            stripped = piece
        if stripped:
            sentences.append(stripped)
            separators.append("")
        start = end
    return sentences, separators


def segment_sentences(text: str, guard_single_letters: bool = True) -> list[str]:
    return segment_with_separators(text, guard_single_letters)[0]


def senp(client: Client, sample: QASample) -> str:
    """Remove keyword-bearing, answer-free sentences until the remainder no
    longer forms a CoE; single removals first, then cumulative removals in
    document order."""
    sentences = segment_sentences(sample.coe)
    answer = sample.answer.lower()
    keywords = [kw.lower() for kw in sample.features.keywords]
    candidates = [
        i
        for i, s in enumerate(sentences)
        if any(kw in s.lower() for kw in keywords) and answer not in s.lower()
    ]
    if not candidates:
        raise NoCandidatesError(
            "no sentence contains a question keyword without the answer"
        )

    def remainder_without(removed: set[int]) -> str:
        return " ".join(s for i, s in enumerate(sentences) if i not in removed)

    # Pass 1: one candidate at a time.
    for i in candidates:
        text = remainder_without({i})
        if text and not discriminate_coe(client, text, sample.features).is_coe:
            return text
    # Pass 2: cumulative removal in document order.
    removed: set[int] = set()
    for i in candidates:
        removed.add(i)
        if len(removed) < 2:
            continue
        text = remainder_without(removed)
        if text and not discriminate_coe(client, text, sample.features).is_coe:
            return text
    raise NeverBreaksError("CoE survives removal of every candidate sentence")


def _replace_all(text: str, target: str, replacement: str) -> tuple[str, int]:
    pattern = re.compile(re.escape(target), re.IGNORECASE)
    return pattern.subn(replacement, text)


def wordp(client: Client, sample: QASample, rng_seed: int) -> str:
    """Replace every mention of one (seeded-random) keyword with its
    hypernym; try keywords until the result is Non-CoE."""
    if not sample.features.keywords:
        raise ValueError("features.keywords must be non-empty")
    rng = random.Random(rng_seed)
    order = list(sample.features.keywords)
    rng.shuffle(order)
    for keyword in order:
        hypernym = client.call("hypernym_generalization", {"Keyword": keyword}).strip()
        if not hypernym or hypernym.lower() == keyword.lower():
            continue
        text, count = _replace_all(sample.coe, keyword, hypernym)
        if count == 0:
            continue
        if not discriminate_coe(client, text, sample.features).is_coe:
            return text
    raise ExhaustedKeywordsError("no keyword substitution breaks the CoE")


_DATE_RES = [
    re.compile(r"^[A-Z][a-z]+ \d{1,2}, \d{4}$"),
    re.compile(r"^\d{1,2} [A-Z][a-z]+ \d{4}$"),
    re.compile(r"^\d{4}$"),
]
_SEPARATED_NUMBER_RE = re.compile(r"^\d{1,3}(,\d{3})+(\.\d+)?$")


def _format_class(phrase: str):
    for pattern in _DATE_RES:
        if pattern.match(phrase):
            return pattern
    if _SEPARATED_NUMBER_RE.match(phrase):
        return _SEPARATED_NUMBER_RE
    return None


def generate_incorrect_answer(client: Client, correct_answer: str) -> str:
    """A same-type, same-format phrase that differs from the input."""
    if not correct_answer:
        raise ValueError("correct_answer must be non-empty")
    pattern = _format_class(correct_answer)
    last = ""
    for attempt in range(2):
        salt = "" if attempt == 0 else "retry"
        last = client.call(
            "answer_generation", {"Correct Answer": correct_answer}, salt=salt
        ).strip()
        if not last or last.lower() == correct_answer.lower():
            continue
        if pattern is not None and not pattern.match(last):
            continue
        return last
    raise FormatMismatchError(
        f"could not generate a well-formed incorrect answer for "
        f"{correct_answer!r} (last attempt: {last!r})"
    )


def substitute_answer(text: str, correct: str, incorrect: str) -> tuple[str, int]:
    """Replace every case-insensitive occurrence; returns (text, count)."""
    out, count = _replace_all(text, correct, incorrect)
    if count == 0:
        raise AnswerNotFoundError(f"{correct!r} does not occur in text")
    return out, count


def generate_misinformation(
    client: Client,
    sample: QASample,
    incorrect_answer: str,
    count: int,
    rng_seed: int,
) -> list[KnowledgeSnippet]:
    """Conflicting snippets: answer-substituted CoE sentences alternated
    with generated statements embedding the incorrect answer, then a
    seeded shuffle."""
    if incorrect_answer.lower() == sample.answer.lower():
        raise ValueError("incorrect_answer must differ from the correct answer")
    answer = sample.answer.lower()
    entity_pool = []
    for sentence in segment_sentences(sample.coe):
        if answer in sentence.lower():
            entity_pool.append(_replace_all(sentence, sample.answer, incorrect_answer)[0])

    def generated_pool(size: int, salt: str) -> list[str]:
        raw = client.call(
            "misinformation_generation",
            {
                "Question": sample.question,
                "Incorrect Answer": incorrect_answer,
                "Count": str(size),
            },
            salt=salt,
        )
        value = first_json_value(raw)
        if not isinstance(value, list):
            return []
        return [str(s) for s in value]

    llm_pool = generated_pool(max(count, 2), "")
    # Validate containment; regenerate once per bad snippet.
    validated: list[str] = []
    for i, snippet in enumerate(llm_pool):
        if incorrect_answer.lower() in snippet.lower():
            validated.append(snippet)
            continue
        retry = generated_pool(1, f"regen:{i}")
        if retry and incorrect_answer.lower() in retry[0].lower():
            validated.append(retry[0])
        else:
            raise MisinformationError(
                f"generated snippet omits the incorrect answer: {snippet!r}"
            )
    llm_pool = validated

    # Alternate the two strategies, cycling whichever pool runs short.
    texts: list[str] = []
    i = 0
    while len(texts) < count:
        source = entity_pool if i % 2 == 0 else llm_pool
        other = llm_pool if i % 2 == 0 else entity_pool
        if not source and not other:
            raise MisinformationError("both misinformation pools are empty")
        pool = source or other
        texts.append(pool[(i // 2) % len(pool)])
        i += 1
    rng = random.Random(rng_seed)
    rng.shuffle(texts)
    return [
        KnowledgeSnippet(
            id=f"misinfo-{sample.id}-{j}",
            text=text,
            provenance=Provenance.MISINFORMATION,
        )
        for j, text in enumerate(texts)
    ]
