"""Experiment orchestration: the full noise-injection protocol over the
CoE / SenP / WordP conditions, seed derivation, and run manifests.

All randomness flows from one top-level seed, expanded per stage and
sample by hashing ``stage name + sample id`` into sub-seeds.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .evaluation import (
    PreparedTrial,
    SignificanceResult,
    TrialReport,
    build_report,
    compare_conditions,
    run_condition,
)
from .gateway import Client
from .model import KnowledgeSnippet, Provenance, QASample
from .noise import SearchClient, fetch_noise_pool, irrelevant_queries, mix_to_ratio
from .perturb import generate_incorrect_answer, senp, substitute_answer, wordp
from .prompts import ALL_TEMPLATES

CONDITIONS = ("CoE", "SenP", "WordP")
DEFAULT_RATIOS = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))


def derive_seed(top_seed: int, stage: str, sample_id: str = "") -> int:
    digest = hashlib.sha256(f"{top_seed}:{stage}:{sample_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def condition_text(
    sample: QASample, condition: str, judge_client: Client, top_seed: int
) -> str:
    """The base knowledge text for a condition, computing missing
    perturbations on demand."""
    if condition == "CoE":
        return sample.coe
    if condition == "SenP":
        return sample.senp if sample.senp is not None else senp(judge_client, sample)
    if condition == "WordP":
        if sample.wordp is not None:
            return sample.wordp
        return wordp(judge_client, sample, derive_seed(top_seed, "wordp", sample.id))
    raise ValueError(f"unknown condition {condition!r}")


@dataclass
class ExperimentResult:
    reports: dict[str, list[TrialReport]]  # model id -> reports
    significance: list[SignificanceResult]
    backend_calls: int


def run_noise_experiment(
    samples: Sequence[QASample],
    answer_client: Client,
    judge_client: Client,
    search_client: Optional[SearchClient],
    ratios: Sequence[Fraction | float] = DEFAULT_RATIOS,
    conditions: Sequence[str] = CONDITIONS,
    repeat_count: int = 3,
    seed: int = 0,
    metric_kind: str = "ACC",
) -> ExperimentResult:
    """The full protocol for one answering model: per condition and ratio,
    assemble noise-mixed contexts, run repeats, and test each non-CoE
    condition against CoE."""
    ratios = [Fraction(r) for r in ratios]
    base_texts: dict[tuple[str, str], str] = {}
    references: dict[str, str] = {}
    pools: dict[str, list[KnowledgeSnippet]] = {}

    for sample in samples:
        incorrect = None
        if metric_kind == "FR":
            incorrect = generate_incorrect_answer(judge_client, sample.answer)
        references[sample.id] = incorrect if incorrect else sample.answer
        for condition in conditions:
            text = condition_text(sample, condition, judge_client, seed)
            if metric_kind == "FR":
                text, _ = substitute_answer(text, sample.answer, incorrect)
            base_texts[(sample.id, condition)] = text
        if any(r > 0 for r in ratios):
            if search_client is None:
                raise ValueError("nonzero ratios require a search client")
            pools[sample.id] = fetch_noise_pool(
                irrelevant_queries(sample.features),
                search_client,
                answer=sample.answer,
            )

    reports: list[TrialReport] = []
    by_key: dict[tuple[str, Fraction], list[TrialReport]] = {}
    for condition in conditions:
        for ratio in ratios:
            trials = []
            for sample in samples:
                core = KnowledgeSnippet(
                    id=f"core-{sample.id}",
                    text=base_texts[(sample.id, condition)],
                    provenance=Provenance.COE_PIECE,
                )
                context = mix_to_ratio(
                    [core],
                    pools.get(sample.id, []),
                    ratio,
                    derive_seed(seed, f"mix:{condition}:{ratio}", sample.id),
                )
                trials.append(
                    PreparedTrial(
                        sample_id=sample.id,
                        question=sample.question,
                        context=context.text(),
                        reference=references[sample.id],
                    )
                )
            group = run_condition(
                trials,
                condition,
                ratio,
                answer_client,
                judge_client,
                repeat_count=repeat_count,
                metric_kind=metric_kind,
            )
            reports.extend(group)
            by_key[(condition, ratio)] = group

    significance = []
    if "CoE" in conditions:
        for other in conditions:
            if other == "CoE":
                continue
            for ratio in ratios:
                significance.append(
                    compare_conditions(by_key[("CoE", ratio)], by_key[(other, ratio)])
                )

    return ExperimentResult(
        reports={answer_client.model: reports},
        significance=significance,
        backend_calls=answer_client.calls,
    )


def template_digests() -> dict[str, str]:
    return {
        name: hashlib.sha256(t.body.encode()).hexdigest()
        for name, t in sorted(ALL_TEMPLATES.items())
    }


def write_manifest(
    out_dir: str | Path,
    seed: int,
    backends: dict[str, str],
    inputs: dict[str, str] | None = None,
    backend_calls: int | None = None,
) -> Path:
    manifest = {
        "tool_version": __version__,
        "seed": seed,
        "backends": backends,
        "template_digests": template_digests(),
        "inputs": inputs or {},
        "backend_calls": backend_calls,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.json"
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    tmp.replace(path)
    return path


def flatten_records(model: str, reports: Sequence[TrialReport]) -> list[dict]:
    """One record per (model, condition, ratio, repeat, sample)."""
    out = []
    for rep in reports:
        for rec in rep.records:
            row = {
                "model": model,
                "condition": rep.condition,
                "ratio": str(rep.ratio),
                "repeat": rep.repeat_index,
                "sample_id": rec.sample_id,
                "output": rec.output,
                "judge": rec.judged,
            }
            if rec.error is not None:
                row["error"] = rec.error
            out.append(row)
    return out


def experiment_report(result: ExperimentResult):
    return build_report(result.reports, result.significance)
