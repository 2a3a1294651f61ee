"""Command-line entry point wiring the modules into reproducible pipelines.

Exit codes: 0 success, 1 partial failures recorded in the outputs, 2 hard
error (bad config, missing inputs).
"""

from __future__ import annotations

import json
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from fractions import Fraction
from pathlib import Path

import click

from . import __version__
from .coverage import coverage_of, minimal_coverage_search
from .discrimination import discriminate_coe, judge_snippet
from .evaluation import mann_whitney_u  # noqa: F401 - part of the public surface
from .experiment import (
    derive_seed,
    experiment_report,
    flatten_records,
    run_noise_experiment,
    write_manifest,
)
from .extraction import extract_question_features
from .gateway import Client, ResponseCache, make_backend
from .model import (
    FeatureJudgment,
    KnowledgeSnippet,
    Provenance,
    QASample,
    QuestionFeatures,
    read_jsonl,
    validate_features,
    write_jsonl,
)
from .noise import FixtureSearchClient, fetch_noise_pool, irrelevant_queries, mix_to_ratio
from .perturb import (
    generate_incorrect_answer,
    generate_misinformation,
    senp,
    substitute_answer,
    wordp,
)
from .rag import run_rag_comparison
from .report import read_report_json, write_all
from .synthetic import build_samples, install_search_fixtures, rules_from_samples


def _client(backend_spec: str, cache_dir: str | None, samples=None) -> Client:
    rules = rules_from_samples(samples) if (samples and backend_spec == "mock") else None
    backend = make_backend(backend_spec, rules)
    cache = ResponseCache(cache_dir) if cache_dir else None
    return Client(backend=backend, cache=cache, model=backend_spec)


def _load_samples(path: str) -> list[QASample]:
    return [QASample.from_dict(d) for d in read_jsonl(path)]


@click.group()
@click.version_option(__version__)
def main():
    """Chain-of-evidence pipeline tools."""


@main.command()
@click.option("--samples", "samples_path", required=True, type=click.Path(exists=True))
def validate(samples_path):
    """Validate a samples file against the model invariants."""
    violations = 0
    for lineno, record in enumerate(read_jsonl(samples_path), start=1):
        try:
            sample = QASample.from_dict(record)
        except Exception as exc:  # noqa: BLE001
            click.echo(f"line {lineno}: {exc}")
            violations += 1
            continue
        for v in validate_features(sample.features):
            click.echo(f"line {lineno}: {v}")
            violations += 1
    click.echo(f"{violations} violation(s)")
    if violations:
        sys.exit(2)


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--backend", default="mock")
@click.option("--cache", "cache_dir", default=None, type=click.Path())
@click.option("--samples", "samples_path", default=None, type=click.Path(exists=True),
              help="Samples file supplying mock extraction rules.")
def extract(in_path, out_path, backend, cache_dir, samples_path):
    """Extract question features; one question per input line."""
    samples = _load_samples(samples_path) if samples_path else None
    client = _client(backend, cache_dir, samples)
    records = []
    for line in Path(in_path).read_text(encoding="utf-8").splitlines():
        question = line.strip()
        if not question:
            continue
        features = extract_question_features(client, question)
        records.append({"question": question, "features": features.to_dict()})
    write_jsonl(out_path, records)
    click.echo(f"extracted features for {len(records)} question(s)")


@main.command()
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--knowledge", "knowledge_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--backend", default="mock")
@click.option("--cache", "cache_dir", default=None, type=click.Path())
@click.option("--index", default=0, help="Which features record to use.")
@click.option("--whole/--per-snippet", default=False,
              help="Judge the concatenated knowledge instead of each snippet.")
def discriminate(features_path, knowledge_path, out_path, backend, cache_dir, index, whole):
    """Judge CoE features in knowledge snippets."""
    feature_records = read_jsonl(features_path)
    if index >= len(feature_records):
        raise click.ClickException(f"features index {index} out of range")
    features = QuestionFeatures.from_dict(feature_records[index]["features"])
    snippets = [KnowledgeSnippet.from_dict(d) for d in read_jsonl(knowledge_path)]
    client = _client(backend, cache_dir)
    if whole:
        text = "\n\n".join(s.text for s in snippets)
        verdict = discriminate_coe(client, text, features)
        Path(out_path).write_text(
            json.dumps(verdict.to_dict(), ensure_ascii=False) + "\n", encoding="utf-8"
        )
        click.echo(f"is_coe={verdict.is_coe}")
    else:
        judgments = [judge_snippet(client, s, features) for s in snippets]
        write_jsonl(out_path, [j.to_dict() for j in judgments])
        click.echo(f"judged {len(judgments)} snippet(s)")


@main.command()
@click.option("--judgments", "judgments_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def cover(judgments_path, out_path):
    """Run the minimal coverage search over per-snippet judgments."""
    records = read_jsonl(judgments_path)
    judgments = [FeatureJudgment.from_dict(d) for d in records]
    snippets = [
        KnowledgeSnippet(id=j.snippet_id, text=d.get("text") or j.snippet_id)
        for j, d in zip(judgments, records)
    ]
    selected = minimal_coverage_search(snippets, judgments)
    nr = len(judgments[0].relation_covered) if judgments else 0
    nk = len(judgments[0].keyword_covered) if judgments else 0
    report = coverage_of([s.id for s in selected], judgments, nr, nk)
    Path(out_path).write_text(
        json.dumps(
            {"selected_ids": [s.id for s in selected], "coverage": report.to_dict()},
            ensure_ascii=False,
        )
        + "\n",
        encoding="utf-8",
    )
    click.echo(f"selected {len(selected)} snippet(s)")


@main.command()
@click.option("--samples", "samples_path", required=True, type=click.Path(exists=True))
@click.option("--mode", required=True,
              type=click.Choice(["senp", "wordp", "answers", "misinfo"]))
@click.option("--seed", default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--backend", default="mock")
@click.option("--cache", "cache_dir", default=None, type=click.Path())
@click.option("--count", default=4, help="Misinformation snippets per sample.")
def perturb(samples_path, mode, seed, out_path, backend, cache_dir, count):
    """Construct Non-CoE variants, incorrect answers, or misinformation."""
    samples = _load_samples(samples_path)
    client = _client(backend, cache_dir, samples)
    records = []
    for sample in samples:
        if mode == "senp":
            d = sample.to_dict()
            d["senp"] = senp(client, sample)
            records.append(d)
        elif mode == "wordp":
            d = sample.to_dict()
            d["wordp"] = wordp(client, sample, derive_seed(seed, "wordp", sample.id))
            records.append(d)
        elif mode == "answers":
            incorrect = generate_incorrect_answer(client, sample.answer)
            substituted, n = substitute_answer(sample.coe, sample.answer, incorrect)
            records.append(
                {
                    "sample_id": sample.id,
                    "incorrect_answer": incorrect,
                    "coe_substituted": substituted,
                    "occurrences": n,
                }
            )
        else:
            incorrect = generate_incorrect_answer(client, sample.answer)
            snippets = generate_misinformation(
                client, sample, incorrect, count, derive_seed(seed, "misinfo", sample.id)
            )
            records.append(
                {
                    "sample_id": sample.id,
                    "incorrect_answer": incorrect,
                    "snippets": [s.to_dict() for s in snippets],
                }
            )
    write_jsonl(out_path, records)
    click.echo(f"wrote {len(records)} record(s)")


@main.command()
@click.option("--samples", "samples_path", required=True, type=click.Path(exists=True))
@click.option("--pool", "pool_path", default=None, type=click.Path(exists=True))
@click.option("--fixtures", "fixtures_dir", default=None, type=click.Path(exists=True))
@click.option("--ratios", default="0,0.25,0.5,0.75")
@click.option("--seed", default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
def mix(samples_path, pool_path, fixtures_dir, ratios, seed, out_path):
    """Assemble noise-mixed contexts at the target ratios."""
    if not pool_path and not fixtures_dir:
        raise click.ClickException("either --pool or --fixtures is required")
    samples = _load_samples(samples_path)
    shared_pool = (
        [KnowledgeSnippet.from_dict(d) for d in read_jsonl(pool_path)]
        if pool_path
        else None
    )
    search = FixtureSearchClient(fixtures_dir) if fixtures_dir else None
    ratio_list = [Fraction(r) for r in ratios.split(",")]
    records = []
    for sample in samples:
        core = KnowledgeSnippet(
            id=f"core-{sample.id}", text=sample.coe, provenance=Provenance.COE_PIECE
        )
        pool = shared_pool
        if pool is None:
            pool = fetch_noise_pool(
                irrelevant_queries(sample.features), search, answer=sample.answer
            )
        for ratio in ratio_list:
            ctx = mix_to_ratio(
                [core], pool, ratio, derive_seed(seed, f"mix:{ratio}", sample.id)
            )
            records.append({"sample_id": sample.id, "context": ctx.to_dict()})
    write_jsonl(out_path, records)
    click.echo(f"wrote {len(records)} context(s)")


def _plan_error(field: str) -> click.ClickException:
    return click.ClickException(f"plan is missing required field: {field}")


@main.command(name="eval")
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def eval_cmd(plan_path, out_dir):
    """Run the noise experiment described by a plan file."""
    with open(plan_path, "rb") as fh:
        plan = tomllib.load(fh)
    for field in ("samples", "backend"):
        if field not in plan:
            raise _plan_error(field)
    plan_dir = Path(plan_path).parent

    def resolve(p: str) -> str:
        path = Path(p)
        return str(path if path.is_absolute() else plan_dir / path)

    samples = _load_samples(resolve(plan["samples"]))
    cache_dir = resolve(plan["cache"]) if "cache" in plan else None
    answer_client = _client(plan["backend"], cache_dir, samples)
    judge_spec = plan.get("judge_backend", plan["backend"])
    judge_client = (
        answer_client
        if judge_spec == plan["backend"]
        else _client(judge_spec, cache_dir, samples)
    )
    search = (
        FixtureSearchClient(resolve(plan["fixtures"])) if "fixtures" in plan else None
    )
    ratios = [Fraction(str(r)) for r in plan.get("ratios", [0, 0.25, 0.5, 0.75])]
    result = run_noise_experiment(
        samples,
        answer_client,
        judge_client,
        search,
        ratios=ratios,
        conditions=tuple(plan.get("conditions", ["CoE", "SenP", "WordP"])),
        repeat_count=int(plan.get("repeats", 3)),
        seed=int(plan.get("seed", 0)),
        metric_kind=plan.get("metric", "ACC"),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for model, reports in result.reports.items():
        records.extend(flatten_records(model, reports))
    write_jsonl(out / "results.jsonl", records)
    write_all(experiment_report(result), out)
    write_manifest(
        out,
        seed=int(plan.get("seed", 0)),
        backends={"answer": plan["backend"], "judge": judge_spec},
        inputs={"samples": str(plan["samples"])},
        backend_calls=result.backend_calls,
    )
    failures = sum(1 for r in records if r.get("error"))
    click.echo(f"wrote {len(records)} record(s), {failures} failure(s)")
    if failures:
        sys.exit(1)


@main.command()
@click.option("--samples", "samples_path", required=True, type=click.Path(exists=True))
@click.option("--arms", default="naive,scopecoe")
@click.option("-k", "--k", default=5)
@click.option("--fixtures", "fixtures_dir", required=True, type=click.Path(exists=True))
@click.option("--backend", default="mock")
@click.option("--cache", "cache_dir", default=None, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
def rag(samples_path, arms, k, fixtures_dir, backend, cache_dir, out_dir):
    """Run the paired naive-RAG vs coverage-guided comparison."""
    samples = _load_samples(samples_path)
    client = _client(backend, cache_dir, samples)
    comparison = run_rag_comparison(
        samples, client, client, FixtureSearchClient(fixtures_dir), k=k
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        arm.condition: {
            "acc": float(arm.report.aggregate),
            "mean_selected": arm.mean_selected,
            "records": [r.to_dict() for r in arm.report.records],
        }
        for arm in (comparison.naive, comparison.scopecoe)
    }
    (out / "rag-results.json").write_text(
        json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8"
    )
    write_manifest(out, seed=0, backends={"answer": backend, "judge": backend},
                   backend_calls=client.calls)
    for name, arm in payload.items():
        click.echo(f"{name}: ACC={arm['acc']:.3f} mean_selected={arm['mean_selected']:.1f}")
    failures = sum(
        1
        for arm in payload.values()
        for r in arm["records"]
        if r.get("error")
    )
    if failures:
        sys.exit(1)


@main.command()
@click.option("--results", "report_path", required=True, type=click.Path(exists=True),
              help="Path to a report.json produced by eval.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def report(report_path, out_dir):
    """Render summary table, CSV and figures from a stored report."""
    write_all(read_report_json(report_path), out_dir)
    click.echo(f"rendered report into {out_dir}")


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("-n", "--n", default=20)
def synth(out_dir, n):
    """Write the bundled synthetic sample set and its search fixtures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples = build_samples(n)
    write_jsonl(out / "samples.jsonl", [s.to_dict() for s in samples])
    install_search_fixtures(samples, out / "fixtures")
    click.echo(f"wrote {n} sample(s) and fixtures under {out}")


if __name__ == "__main__":
    main()
