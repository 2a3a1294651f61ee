"""Report rendering: machine-readable JSON, delimited summary, a
human-readable table with significance stars, and metric-vs-ratio figures.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import ExperimentReport


def _is_starred(report: ExperimentReport, model: str, condition: str, ratio) -> bool:
    for sig in report.significance:
        if sig.condition_b == condition and sig.ratio == Fraction(ratio):
            return sig.significant
    return False


def write_report_json(report: ExperimentReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8"
    )


def read_report_json(path: str | Path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_summary_csv(report: ExperimentReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["model", "condition", "ratio", "metric", "value", "repeats", "significant"]
        )
        for cell in report.cells:
            writer.writerow(
                [
                    cell.model,
                    cell.condition,
                    f"{float(cell.ratio):g}",
                    cell.metric_kind,
                    f"{float(cell.value):.4f}",
                    cell.repeats,
                    _is_starred(report, cell.model, cell.condition, cell.ratio),
                ]
            )


def render_summary_table(report: ExperimentReport) -> str:
    """Condition-by-ratio table per model; * marks p < 0.05 vs the
    comparison condition."""
    lines: list[str] = []
    models = sorted({c.model for c in report.cells})
    for model in models:
        cells = [c for c in report.cells if c.model == model]
        conditions = sorted({c.condition for c in cells})
        ratios = sorted({c.ratio for c in cells})
        metric = cells[0].metric_kind
        lines.append(f"model: {model}  metric: {metric}")
        header = ["ratio"] + conditions
        rows = [header]
        for ratio in ratios:
            row = [f"{float(ratio):g}"]
            for condition in conditions:
                try:
                    cell = next(
                        c for c in cells if c.condition == condition and c.ratio == ratio
                    )
                except StopIteration:
                    row.append("-")
                    continue
                star = "*" if _is_starred(report, model, condition, ratio) else ""
                row.append(f"{float(cell.value) * 100:.1f}%{star}")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        for r in rows:
            lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
        lines.append("")
    lines.append(f"p-value method: {report.p_value_method}")
    lines.append("* significant vs the reference condition (p < 0.05)")
    return "\n".join(lines) + "\n"


def render_figures(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """One metric-vs-ratio line figure per (model, metric)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    keys = sorted({(c.model, c.metric_kind) for c in report.cells})
    for model, metric in keys:
        cells = [
            c for c in report.cells if c.model == model and c.metric_kind == metric
        ]
        conditions = sorted({c.condition for c in cells})
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for condition in conditions:
            points = sorted(
                ((float(c.ratio), float(c.value)) for c in cells if c.condition == condition)
            )
            if not points:
                continue
            ax.plot(
                [p[0] for p in points],
                [p[1] for p in points],
                marker="o",
                label=condition,
            )
        ax.set_xlabel("noise proportion")
        ax.set_ylabel(metric)
        ax.set_ylim(-0.05, 1.05)
        ax.set_title(f"{model}: {metric} vs noise proportion")
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{model.replace(':', '_')}-{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def write_all(report: ExperimentReport, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_json(report, out_dir / "report.json")
    write_summary_csv(report, out_dir / "summary.csv")
    (out_dir / "summary.txt").write_text(
        render_summary_table(report), encoding="utf-8"
    )
    render_figures(report, out_dir / "figures")
