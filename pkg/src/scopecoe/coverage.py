"""Minimal coverage search over per-snippet feature judgments.

Three greedy phases: add every intent-bearing snippet, then for each
still-uncovered relation scan snippets in index order and take the first
hit, then the same for keywords. A brute-force enumerator serves as the
test oracle for the feature-coverage count; the greedy set can be larger
than the optimal witness but never covers fewer features.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import FeatureJudgment, KnowledgeSnippet

BRUTE_FORCE_LIMIT = 12


class LengthMismatchError(ValueError):
    pass


class UnknownIdError(KeyError):
    pass


class SizeLimitError(ValueError):
    pass


@dataclass(frozen=True)
class CoverageReport:
    intent_snippet_count: int
    covered_relations: frozenset[int]
    uncovered_relations: frozenset[int]
    covered_keywords: frozenset[int]
    uncovered_keywords: frozenset[int]
    selected_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "intent_snippet_count": self.intent_snippet_count,
            "covered_relations": sorted(self.covered_relations),
            "uncovered_relations": sorted(self.uncovered_relations),
            "covered_keywords": sorted(self.covered_keywords),
            "uncovered_keywords": sorted(self.uncovered_keywords),
            "selected_ids": list(self.selected_ids),
        }


def _check_aligned(ek: Sequence, iek: Sequence[FeatureJudgment]) -> tuple[int, int]:
    if len(ek) != len(iek):
        raise LengthMismatchError(
            f"|EK| = {len(ek)} but |IEK| = {len(iek)}"
        )
    if not iek:
        return 0, 0
    nr = len(iek[0].relation_covered)
    nk = len(iek[0].keyword_covered)
    for j in iek:
        if len(j.relation_covered) != nr or len(j.keyword_covered) != nk:
            raise LengthMismatchError("judgment vectors have inconsistent lengths")
    return nr, nk


def minimal_coverage_search(
    ek: Sequence[KnowledgeSnippet], iek: Sequence[FeatureJudgment]
) -> list[KnowledgeSnippet]:
    """Greedy three-phase selection; output preserves first-insertion order.

    If some feature is coverable by no snippet it is silently left
    uncovered: the result covers the maximum coverable number of features.
    """
    nr, nk = _check_aligned(ek, iek)
    selected: list[int] = []
    in_set: set[int] = set()

    def add(i: int) -> None:
        if i not in in_set:
            selected.append(i)
            in_set.add(i)

    # Phase 1: intent coverage.
    for i, judgment in enumerate(iek):
        if judgment.intent_covered:
            add(i)

    # Phase 2: relation coverage. The uncovered set is computed at the
    # phase boundary, but coverage is re-checked before each seek so a
    # snippet added for one relation counts toward later ones.
    def relation_covered(r: int) -> bool:
        return any(iek[i].relation_covered[r] for i in in_set)

    for r in range(nr):
        if relation_covered(r):
            continue
        for i in range(len(iek)):
            if iek[i].relation_covered[r]:
                add(i)
                break

    # Phase 3: keyword coverage, same scheme.
    def keyword_covered(k: int) -> bool:
        return any(iek[i].keyword_covered[k] for i in in_set)

    for k in range(nk):
        if keyword_covered(k):
            continue
        for i in range(len(iek)):
            if iek[i].keyword_covered[k]:
                add(i)
                break

    return [ek[i] for i in selected]


def coverage_of(
    selected_ids: Sequence[str],
    iek: Sequence[FeatureJudgment],
    relation_count: int,
    keyword_count: int,
) -> CoverageReport:
    """Audit which features a selection covers."""
    by_id = {j.snippet_id: j for j in iek}
    chosen: list[FeatureJudgment] = []
    for sid in selected_ids:
        if sid not in by_id:
            raise UnknownIdError(f"unknown snippet id {sid!r}")
        chosen.append(by_id[sid])
    covered_r = {
        r for r in range(relation_count) if any(j.relation_covered[r] for j in chosen)
    }
    covered_k = {
        k for k in range(keyword_count) if any(j.keyword_covered[k] for j in chosen)
    }
    return CoverageReport(
        intent_snippet_count=sum(1 for j in chosen if j.intent_covered),
        covered_relations=frozenset(covered_r),
        uncovered_relations=frozenset(set(range(relation_count)) - covered_r),
        covered_keywords=frozenset(covered_k),
        uncovered_keywords=frozenset(set(range(keyword_count)) - covered_k),
        selected_ids=tuple(selected_ids),
    )


def coverage_count(indices: Sequence[int], iek: Sequence[FeatureJudgment]) -> int:
    """Number of distinct features (intent + relations + keywords) that a
    set of snippet indices covers."""
    if not iek:
        return 0
    nr = len(iek[0].relation_covered)
    nk = len(iek[0].keyword_covered)
    count = 0
    if any(iek[i].intent_covered for i in indices):
        count += 1
    count += sum(
        1 for r in range(nr) if any(iek[i].relation_covered[r] for i in indices)
    )
    count += sum(
        1 for k in range(nk) if any(iek[i].keyword_covered[k] for i in indices)
    )
    return count


def brute_force_max_coverage(
    ek: Sequence[KnowledgeSnippet], iek: Sequence[FeatureJudgment]
) -> tuple[int, list[int]]:
    """Exhaustive oracle: (max coverable feature count, one minimum-size
    witness index set achieving it, ties to the lexicographically smallest).
    """
    nr, nk = _check_aligned(ek, iek)
    n = len(iek)
    if n > BRUTE_FORCE_LIMIT:
        raise SizeLimitError(f"brute force limited to {BRUTE_FORCE_LIMIT} snippets")
    # Feature bitmask per snippet: bit 0 intent, then relations, then keywords.
    masks = []
    for j in iek:
        m = 1 if j.intent_covered else 0
        for r in range(nr):
            if j.relation_covered[r]:
                m |= 1 << (1 + r)
        for k in range(nk):
            if j.keyword_covered[k]:
                m |= 1 << (1 + nr + k)
        masks.append(m)
    # Subset DP over the 2^n snippet subsets.
    cover = [0] * (1 << n)
    for subset in range(1, 1 << n):
        low = (subset & -subset).bit_length() - 1
        cover[subset] = cover[subset & (subset - 1)] | masks[low]
    best_count = 0
    best_witness: list[int] = []
    best_size = n + 1
    for subset in range(1 << n):
        c = cover[subset].bit_count()
        if c < best_count:
            continue
        witness = [i for i in range(n) if subset >> i & 1]
        if (
            c > best_count
            or len(witness) < best_size
            or (len(witness) == best_size and witness < best_witness)
        ):
            best_count = c
            best_witness = witness
            best_size = len(witness)
    return best_count, best_witness
