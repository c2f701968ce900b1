"""Evaluation report output: JSON document, flat table, and score figure."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .agents import EvalReport


def plot_report(report: EvalReport, path: str | Path) -> None:
    """Mean normalized score per level, with mean quest length dashed."""
    levels = [row.level for row in report.rows]
    scores = [row.mean_score for row in report.rows]
    lengths = [row.mean_reference_length for row in report.rows]

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(levels, scores, marker="o", color="tab:blue", label="mean normalized score")
    ax.axhline(1.0, color="0.85", linewidth=0.8, zorder=0)
    ax.set_xlabel("difficulty level")
    ax.set_ylabel("mean normalized score")
    ax.set_xticks(levels)
    ax.set_title(f"agent: {report.agent}")

    twin = ax.twinx()
    twin.plot(
        levels, lengths, linestyle="--", marker=".", color="tab:gray", label="mean quest length"
    )
    twin.set_ylabel("mean quest length (actions)")

    handles1, labels1 = ax.get_legend_handles_labels()
    handles2, labels2 = twin.get_legend_handles_labels()
    ax.legend(handles1 + handles2, labels1 + labels2, loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_report(report: EvalReport, out_dir: str | Path, stem: str = "report") -> list[Path]:
    """Write <stem>.json, <stem>.tsv and <stem>.png; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / f"{stem}.json"
    tsv_path = out / f"{stem}.tsv"
    png_path = out / f"{stem}.png"
    json_path.write_text(
        json.dumps(report.to_doc(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    tsv_path.write_text(report.to_table(), encoding="utf-8")
    plot_report(report, png_path)
    return [json_path, tsv_path, png_path]
