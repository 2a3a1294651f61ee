"""Trial running, consistency judging, ACC/FR aggregation and the
Mann-Whitney significance test.

ACC judges model outputs against the true answer; FR judges them against
the incorrect answer embedded in the knowledge. Each experiment group runs
three repeats and averages; repeats salt only the answering call, so the
temperature-0 judges stay cache-hot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Any, Mapping, Optional, Sequence

from .discrimination import UnparseableVerdictError, parse_yes_no
from .gateway import Client, parallel_map
from .model import TrialRecord, TrialReport

EXACT_TEST_LIMIT = 16
SIGNIFICANCE_LEVEL = 0.05
P_VALUE_METHOD = "exact permutation for n<=16, else tie-corrected normal with continuity correction"


def answer_question(
    client: Client, question: str, context: str, salt: str = ""
) -> str:
    """One completion with the fixed QA wrapper; empty context is a valid
    closed-book probe."""
    return client.call(
        "qa_answer",
        {"External Knowledge": context, "Question": question},
        salt=salt,
    ).strip()


def judge_consistency(
    client: Client, question: str, reference_answer: str, model_output: str
) -> bool:
    if not (question and reference_answer and model_output):
        raise ValueError("question, reference and output must be non-empty")
    bindings = {
        "Question": question,
        "Reference Answer": reference_answer,
        "Model Output": model_output,
    }
    raw = client.call("consistency_judge", bindings)
    verdict = parse_yes_no(raw)
    if verdict is None:
        reprompt = dict(bindings)
        reprompt["Model Output"] += '\nPlease answer with only the word "yes" or "no".'
        verdict = parse_yes_no(client.call("consistency_judge", reprompt))
    if verdict is None:
        raise UnparseableVerdictError(f"no yes/no in consistency response: {raw[:200]!r}")
    return verdict


@dataclass(frozen=True)
class PreparedTrial:
    """One sample's ready-to-run input for a single condition and ratio."""

    sample_id: str
    question: str
    context: str
    reference: str  # true answer for ACC, incorrect answer for FR


def run_condition(
    trials: Sequence[PreparedTrial],
    condition: str,
    ratio: Fraction | float,
    answer_client: Client,
    judge_client: Optional[Client] = None,
    repeat_count: int = 3,
    metric_kind: str = "ACC",
) -> list[TrialReport]:
    """repeat_count full passes; failed samples are recorded as judged
    False with an error note, never dropped."""
    if judge_client is None:
        judge_client = answer_client
    ratio = Fraction(ratio)
    reports = []
    for repeat in range(repeat_count):

        def run_one(trial: PreparedTrial) -> TrialRecord:
            try:
                output = answer_question(
                    answer_client,
                    trial.question,
                    trial.context,
                    salt=f"repeat:{repeat}",
                )
                judged = judge_consistency(
                    judge_client, trial.question, trial.reference, output
                )
                return TrialRecord(
                    sample_id=trial.sample_id, output=output, judged=judged
                )
            except Exception as exc:  # noqa: BLE001 - recorded, not raised
                return TrialRecord(
                    sample_id=trial.sample_id,
                    output="",
                    judged=False,
                    error=f"{type(exc).__name__}: {exc}",
                )

        records = parallel_map(run_one, trials, answer_client.max_parallel)
        records.sort(key=lambda r: r.sample_id)
        reports.append(
            TrialReport(
                condition=condition,
                ratio=ratio,
                repeat_index=repeat,
                records=tuple(records),
                metric_kind=metric_kind,
            )
        )
    return reports


def average_aggregate(reports: Sequence[TrialReport]) -> Fraction:
    if not reports:
        raise ValueError("no reports to average")
    return sum(r.aggregate for r in reports) / len(reports)


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def _u_statistic(ranks: Sequence[float], n_a: int) -> float:
    r_a = sum(ranks[:n_a])
    return r_a - n_a * (n_a + 1) / 2


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2))


def mann_whitney_u(
    sample_a: Sequence[float], sample_b: Sequence[float]
) -> tuple[float, float]:
    """Two-sided Mann-Whitney U with midrank ties.

    Exact permutation p-value for combined sizes up to 16; otherwise a
    normal approximation with tie-corrected variance and continuity
    correction. All-identical observations give p = 1.0 by convention.
    """
    if not sample_a or not sample_b:
        raise ValueError("both samples must be non-empty")
    n_a, n_b = len(sample_a), len(sample_b)
    combined = list(sample_a) + list(sample_b)
    ranks = _midranks(combined)
    u = _u_statistic(ranks, n_a)

    if len(set(combined)) == 1:
        return u, 1.0

    if n_a + n_b <= EXACT_TEST_LIMIT:
        total = 0
        at_most = 0
        at_least = 0
        n = n_a + n_b
        for idx in combinations(range(n), n_a):
            perm_u = sum(ranks[i] for i in idx) - n_a * (n_a + 1) / 2
            total += 1
            if perm_u <= u:
                at_most += 1
            if perm_u >= u:
                at_least += 1
        p = min(1.0, 2 * min(at_most, at_least) / total)
        return u, p

    n = n_a + n_b
    mean = n_a * n_b / 2
    tie_sum = 0
    seen: dict[float, int] = {}
    for v in combined:
        seen[v] = seen.get(v, 0) + 1
    for count in seen.values():
        tie_sum += count**3 - count
    variance = n_a * n_b / 12 * ((n + 1) - tie_sum / (n * (n - 1)))
    if variance <= 0:
        return u, 1.0
    z = (abs(u - mean) - 0.5) / math.sqrt(variance)
    p = min(1.0, 2 * _normal_sf(max(z, 0.0)))
    return u, p


@dataclass(frozen=True)
class SignificanceResult:
    condition_a: str
    condition_b: str
    ratio: Fraction
    u_statistic: float
    p_value: float

    @property
    def significant(self) -> bool:
        return self.p_value < SIGNIFICANCE_LEVEL

    def to_dict(self) -> dict:
        return {
            "condition_a": self.condition_a,
            "condition_b": self.condition_b,
            "ratio": str(self.ratio),
            "u_statistic": self.u_statistic,
            "p_value": self.p_value,
            "significant": self.significant,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SignificanceResult":
        return cls(
            condition_a=d["condition_a"],
            condition_b=d["condition_b"],
            ratio=Fraction(d["ratio"]),
            u_statistic=d["u_statistic"],
            p_value=d["p_value"],
        )


def outcomes_of(report: TrialReport) -> list[int]:
    """Per-sample 0/1 outcomes, the unit of observation for significance."""
    return [1 if r.judged else 0 for r in report.records]


def compare_conditions(
    reports_a: Sequence[TrialReport], reports_b: Sequence[TrialReport]
) -> SignificanceResult:
    """Mann-Whitney over the pooled per-sample outcomes of all repeats."""
    a = [o for rep in reports_a for o in outcomes_of(rep)]
    b = [o for rep in reports_b for o in outcomes_of(rep)]
    u, p = mann_whitney_u(a, b)
    return SignificanceResult(
        condition_a=reports_a[0].condition,
        condition_b=reports_b[0].condition,
        ratio=reports_a[0].ratio,
        u_statistic=u,
        p_value=p,
    )


@dataclass(frozen=True)
class ReportCell:
    model: str
    condition: str
    ratio: Fraction
    metric_kind: str
    value: Fraction
    repeats: int

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "condition": self.condition,
            "ratio": str(self.ratio),
            "metric_kind": self.metric_kind,
            "value": str(self.value),
            "repeats": self.repeats,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ReportCell":
        return cls(
            model=d["model"],
            condition=d["condition"],
            ratio=Fraction(d["ratio"]),
            metric_kind=d["metric_kind"],
            value=Fraction(d["value"]),
            repeats=d["repeats"],
        )


@dataclass(frozen=True)
class ExperimentReport:
    cells: tuple[ReportCell, ...]
    significance: tuple[SignificanceResult, ...] = ()
    p_value_method: str = P_VALUE_METHOD

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "significance", tuple(self.significance))

    def cell(self, model: str, condition: str, ratio) -> ReportCell:
        ratio = Fraction(ratio)
        for c in self.cells:
            if c.model == model and c.condition == condition and c.ratio == ratio:
                return c
        raise KeyError(f"no cell for ({model}, {condition}, {ratio})")

    def to_dict(self) -> dict:
        return {
            "cells": [c.to_dict() for c in self.cells],
            "significance": [s.to_dict() for s in self.significance],
            "p_value_method": self.p_value_method,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentReport":
        return cls(
            cells=tuple(ReportCell.from_dict(c) for c in d["cells"]),
            significance=tuple(
                SignificanceResult.from_dict(s) for s in d.get("significance", [])
            ),
            p_value_method=d.get("p_value_method", P_VALUE_METHOD),
        )


def build_report(
    trial_reports: Mapping[str, Sequence[TrialReport]],
    significance: Sequence[SignificanceResult] = (),
) -> ExperimentReport:
    """Aggregate repeats into one cell per (model, condition, ratio).

    ``trial_reports`` maps a model id to that model's reports across all
    conditions and ratios.
    """
    cells: list[ReportCell] = []
    for model, reports in trial_reports.items():
        grouped: dict[tuple[str, Fraction, str], list[TrialReport]] = {}
        for rep in reports:
            grouped.setdefault((rep.condition, rep.ratio, rep.metric_kind), []).append(rep)
        for (condition, ratio, metric), group in sorted(
            grouped.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])
        ):
            cells.append(
                ReportCell(
                    model=model,
                    condition=condition,
                    ratio=ratio,
                    metric_kind=metric,
                    value=average_aggregate(group),
                    repeats=len(group),
                )
            )
    return ExperimentReport(cells=tuple(cells), significance=tuple(significance))
