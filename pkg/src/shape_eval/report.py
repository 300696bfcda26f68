"""Report writers: delimited rows, a JSON snapshot, and summary figures.

The CSV carries one row per instance (instance id, cd, fs columns, point
count, seed) and is byte-stable across runs with the same seed; the JSON adds
aggregates, per-instance transforms, failures, and the config snapshot. The
figure pass renders per-category F-score bars and a CD histogram next to the
delimited output.
"""

from __future__ import annotations

import datetime
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import io
from .harness import EvalReport


def fs_column(threshold: float) -> str:
    return f"fs_{int(round(threshold * 100)):03d}"


def write_report_csv(report: EvalReport, path) -> None:
    thresholds = report.config["thresholds"]
    seed = report.config["seed"]
    header = ["instance_id", "cd"] + [fs_column(d) for d in thresholds] + ["n_points", "seed"]
    lines = [",".join(header)]
    for row in report.rows:
        if row.status == "ok":
            m = row.metrics
            cells = (
                [row.instance_id, repr(m.cd)]
                + [repr(m.fs[d]) for d in thresholds]
                + [str(m.n_points), str(seed)]
            )
        else:
            cells = [row.instance_id, ""] + ["" for _ in thresholds] + ["", str(seed)]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def metric_result_to_dict(m) -> dict:
    return {
        "cd": m.cd,
        "fs": {fs_column(d): v for d, v in m.fs.items()},
        "precision": {fs_column(d): v for d, v in m.precision.items()},
        "recall": {fs_column(d): v for d, v in m.recall.items()},
        "n_points": m.n_points,
        "alignment": None if m.alignment is None else io.transform_to_dict(m.alignment),
    }


def report_to_dict(report: EvalReport, timestamp: bool = True) -> dict:
    def agg_dict(agg):
        if agg is None:
            return None
        return {"n": agg["n"], "cd": agg["cd"], "fs": {fs_column(d): v for d, v in agg["fs"].items()}}

    out = {
        "engine_version": report.engine_version,
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat() if timestamp else None,
        "config": report.config,
        "predictor": report.predictor,
        "aggregates": agg_dict(report.aggregates),
        "per_category": {c: agg_dict(a) for c, a in report.per_category.items()},
        "rows": [
            {
                "instance_id": r.instance_id,
                "category": r.category,
                "status": r.status,
                "metrics": None if r.metrics is None else metric_result_to_dict(r.metrics),
                "error": r.error,
            }
            for r in report.rows
        ],
    }
    return out


def write_report_json(report: EvalReport, path, timestamp: bool = True) -> None:
    io.save_json(report_to_dict(report, timestamp=timestamp), path)


def render_report_figures(report: EvalReport, report_path) -> list[Path]:
    """Save summary figures next to the report; returns the written paths."""
    stem = Path(report_path)
    stem = stem.with_suffix("")
    written: list[Path] = []
    valid = [r for r in report.rows if r.status == "ok"]
    if not valid:
        return written
    thresholds = report.config["thresholds"]

    # mean F-score per threshold, overall and per category
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = ["overall"] + sorted(report.per_category)
    width = 0.8 / len(thresholds)
    for ti, d in enumerate(thresholds):
        values = [report.aggregates["fs"][d]] + [
            report.per_category[c]["fs"][d] for c in sorted(report.per_category)
        ]
        xs = [i + ti * width for i in range(len(labels))]
        ax.bar(xs, values, width=width, label=f"FS@{d:g}")
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(labels))])
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("F-score")
    ax.legend(frameon=False)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fs_path = stem.parent / (stem.name + "_fscore.png")
    fig.savefig(fs_path, dpi=120)
    plt.close(fig)
    written.append(fs_path)

    # per-instance Chamfer distribution
    fig, ax = plt.subplots(figsize=(7, 4))
    cds = [r.metrics.cd for r in valid]
    ax.hist(cds, bins=min(30, max(5, len(cds) // 2)), color="#4878a8", edgecolor="white")
    ax.axvline(report.aggregates["cd"], color="#c44e52", linestyle="--",
               label=f"mean = {report.aggregates['cd']:.4g}")
    ax.set_xlabel("Chamfer distance")
    ax.set_ylabel("instances")
    ax.legend(frameon=False)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    cd_path = stem.parent / (stem.name + "_cd.png")
    fig.savefig(cd_path, dpi=120)
    plt.close(fig)
    written.append(cd_path)
    return written


def write_report(report: EvalReport, path, figures: bool = True) -> dict:
    """CSV + JSON (+ figures) for one report path; returns written file names."""
    path = Path(path)
    csv_path = path if path.suffix == ".csv" else path.with_suffix(".csv")
    json_path = csv_path.with_suffix(".json")
    write_report_csv(report, csv_path)
    write_report_json(report, json_path)
    files = {"csv": str(csv_path), "json": str(json_path), "figures": []}
    if figures:
        files["figures"] = [str(p) for p in render_report_figures(report, csv_path)]
    return files
