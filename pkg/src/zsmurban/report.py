"""Report emission: delimited tables, a structured JSON report, and SVG
figures rendered with matplotlib (scene map with AOI overlays, visible
satellites per epoch).

tables.csv and report.json are byte-deterministic for a fixed experiment
result; figures carry no timestamps either.
"""

from __future__ import annotations

import io
import json
from importlib import resources
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Polygon as MplPolygon

from .harness import (
    ALL_METHODS,
    ExperimentResult,
    HarnessError,
    MethodReport,
    SeedRunResult,
    TrendVerdict,
)
from .scene import Scene

__all__ = [
    "load_reference_metrics",
    "reference_reports",
    "report_to_dict",
    "render_tables_csv",
    "render_outcomes_csv",
    "emit_report",
    "plot_scene_map",
    "plot_visible_satellites",
]

_METHOD_ORDER = ALL_METHODS + ("oracle",)


def load_reference_metrics() -> dict:
    """Published reference metrics (report juxtaposition and fixture tests)."""
    path = resources.files("zsmurban.data").joinpath("reference_metrics.json")
    return json.loads(path.read_text(encoding="utf-8"))


def reference_reports() -> dict[str, MethodReport]:
    """The reference table rows as MethodReport values; unpublished fields
    become NaN so they can never silently satisfy a comparison.
    """
    data = load_reference_metrics()
    out = {}
    for method, row in data["methods"].items():
        def num(key):
            value = row.get(key)
            return float("nan") if value is None else float(value)

        out[method] = MethodReport(
            method=method,
            seed=None,
            epoch_count=int(data["epoch_count"]),
            classification_accuracy=num("classification_accuracy"),
            mean_misclassified_per_epoch=num("mean_misclassified_per_epoch"),
            success_count=int(row["success_count"]),
            containment_count=int(row["containment_count"]),
            success_rate=num("success_rate"),
            containment_rate=num("containment_rate"),
            mean_cross_bound=num("mean_cross_bound"),
            mean_along_bound=num("mean_along_bound"),
            mean_satellites_used=float("nan"),
            no_refinement_count=0,
            boundary_ambiguous_count=0,
        )
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _method_sort_key(method: str) -> int:
    return _METHOD_ORDER.index(method) if method in _METHOD_ORDER else len(_METHOD_ORDER)


_TABLE_COLUMNS = [
    "scope", "method", "epoch_count", "classification_accuracy",
    "mean_misclassified_per_epoch", "success_rate", "containment_rate",
    "mean_cross_bound_m", "mean_along_bound_m", "mean_satellites_used",
    "no_refinement_count", "boundary_ambiguous_count",
    # Published reference values ride along on pooled rows for side-by-side
    # reading; they are context only, never a grading target.
    "reference_success_rate", "reference_containment_rate",
    "reference_cross_bound_m", "reference_along_bound_m",
]


def render_tables_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    buf.write(",".join(_TABLE_COLUMNS) + "\n")
    reference = load_reference_metrics()["methods"]

    def write_row(scope: str, report: MethodReport) -> None:
        ref = reference.get(report.method, {}) if scope == "pooled" else {}
        buf.write(",".join([
            scope,
            report.method,
            str(report.epoch_count),
            _fmt(report.classification_accuracy),
            _fmt(report.mean_misclassified_per_epoch),
            _fmt(report.success_rate),
            _fmt(report.containment_rate),
            _fmt(report.mean_cross_bound),
            _fmt(report.mean_along_bound),
            _fmt(report.mean_satellites_used),
            str(report.no_refinement_count),
            str(report.boundary_ambiguous_count),
            _fmt(ref.get("success_rate")),
            _fmt(ref.get("containment_rate")),
            _fmt(ref.get("mean_cross_bound")),
            _fmt(ref.get("mean_along_bound")),
        ]) + "\n")

    for method in sorted(result.pooled, key=_method_sort_key):
        write_row("pooled", result.pooled[method])
    for seed_result in result.seed_results:
        for method in sorted(seed_result.reports, key=_method_sort_key):
            write_row(f"seed-{seed_result.seed}", seed_result.reports[method])
    return buf.getvalue()


_OUTCOME_COLUMNS = [
    "seed", "method", "epoch_index", "success", "contains_truth",
    "cross_street_bound_m", "along_street_bound_m", "satellites_used",
    "misclassified_used", "no_refinement", "boundary_ambiguous",
]


def render_outcomes_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    buf.write(",".join(_OUTCOME_COLUMNS) + "\n")
    for seed_result in result.seed_results:
        for method in sorted(seed_result.outcomes, key=_method_sort_key):
            for o in seed_result.outcomes[method]:
                buf.write(",".join([
                    str(seed_result.seed), method, str(o.epoch_index),
                    _fmt(o.success), _fmt(o.contains_truth),
                    _fmt(o.cross_street_bound), _fmt(o.along_street_bound),
                    str(o.satellites_used), str(o.misclassified_used),
                    _fmt(o.no_refinement), _fmt(o.boundary_ambiguous),
                ]) + "\n")
    return buf.getvalue()


def _report_dict(report: MethodReport) -> dict:
    return {
        "method": report.method,
        "epoch_count": report.epoch_count,
        "classification_accuracy": report.classification_accuracy,
        "mean_misclassified_per_epoch": report.mean_misclassified_per_epoch,
        "success_count": report.success_count,
        "containment_count": report.containment_count,
        "success_rate": report.success_rate,
        "containment_rate": report.containment_rate,
        "mean_cross_bound_m": report.mean_cross_bound,
        "mean_along_bound_m": report.mean_along_bound,
        "mean_satellites_used": report.mean_satellites_used,
        "no_refinement_count": report.no_refinement_count,
        "boundary_ambiguous_count": report.boundary_ambiguous_count,
    }


def _trend_dict(trends: TrendVerdict | None) -> dict | None:
    if trends is None:
        return None
    return {
        "fewer_misclassified": trends.fewer_misclassified,
        "success_ordering": trends.success_ordering,
        "containment_ordering": trends.containment_ordering,
        "bounds_weakly_larger": trends.bounds_weakly_larger,
    }


def report_to_dict(result: ExperimentResult) -> dict:
    return {
        "format_version": 1,
        "config": result.config.to_dict(),
        "pooled": {m: _report_dict(r) for m, r in sorted(result.pooled.items())},
        "per_seed": [
            {
                "seed": res.seed,
                "reports": {m: _report_dict(r) for m, r in sorted(res.reports.items())},
                "selection": {
                    "epoch_count": res.selection.epoch_count,
                    "satellite_count": res.selection.satellite_count,
                    "unanimous_fraction": res.selection.unanimous_fraction,
                    "selected_fraction": res.selection.selected_fraction,
                    "selected_correct_rate": res.selection.selected_correct_rate,
                    "selected_misclassified_per_epoch": res.selection.selected_misclassified_per_epoch,
                    "per_model_accuracy": list(res.selection.per_model_accuracy),
                    "per_model_misclassified_per_epoch": list(res.selection.per_model_misclassified_per_epoch),
                },
                "model_accuracies": dict(sorted(res.model_accuracies.items())),
                "train_samples": res.train_sample_count,
                "test_samples": res.test_sample_count,
                "train_nlos": res.train_nlos_count,
                "test_nlos": res.test_nlos_count,
                "mean_visible_satellites": (
                    sum(res.visible_per_epoch) / len(res.visible_per_epoch)
                    if res.visible_per_epoch else None),
            }
            for res in result.seed_results
        ],
        "failures": [
            {"seed": f.seed, "stage": f.stage, "error": f.error} for f in result.failures
        ],
        "trends": _trend_dict(result.trends),
        "bounds_trend_seeds": list(result.bounds_trend_seeds),
        "reference": load_reference_metrics(),
    }


def plot_scene_map(scene: Scene, path: Path, *,
                   aoi_parts: Sequence[Sequence[tuple[float, float]]] = (),
                   truth: tuple[float, float] | None = None,
                   title: str = "scene") -> None:
    """Street map with buildings, trajectory, and optional AOI overlay.

    Every AOI part is a patch with gid ``aoi-part-<i>`` so the emitted SVG
    keeps one identifiable group per region part.
    """
    fig, ax = plt.subplots(figsize=(11, 4))
    xmin, ymin, xmax, ymax = scene.bounds
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    half = scene.street_width / 2.0
    ax.fill_between([0.0, scene.street_length], -half, half, color="0.92", zorder=0)
    for b in scene.buildings:
        ax.add_patch(MplPolygon(list(b.footprint.vertices), closed=True,
                                facecolor="0.6", edgecolor="0.3", linewidth=0.5))
    xs = [p[0] for p in scene.trajectory]
    ys = [p[1] for p in scene.trajectory]
    ax.plot(xs, ys, color="tab:blue", linewidth=0.8, label="trajectory")
    for i, part in enumerate(aoi_parts):
        patch = MplPolygon([tuple(v) for v in part], closed=True, facecolor="tab:green",
                           alpha=0.45, edgecolor="darkgreen", linewidth=0.7)
        patch.set_gid(f"aoi-part-{i}")
        ax.add_patch(patch)
    if truth is not None:
        ax.plot([truth[0]], [truth[1]], marker="*", color="tab:red", markersize=10,
                linestyle="none", label="true position")
    ax.set_xlabel("along street (m)")
    ax.set_ylabel("across street (m)")
    ax.set_title(title)
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_visible_satellites(visible_counts: Sequence[int], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(range(len(visible_counts)), visible_counts, drawstyle="steps-mid",
            color="tab:blue", linewidth=1.0)
    ax.set_xlabel("target-road epoch")
    ax.set_ylabel("visible satellites")
    ax.set_ylim(0, max(visible_counts) + 1 if visible_counts else 1)
    mean = sum(visible_counts) / len(visible_counts) if visible_counts else 0.0
    ax.set_title(f"visible satellites per epoch (mean {mean:.2f})")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(result: ExperimentResult, out_dir: Path | str,
                scene: Scene | None = None) -> list[Path]:
    """Write tables.csv, report.json, outcomes.csv and the SVG figures.

    Figures cover the first surviving seed; AOI overlays are rendered for
    the epochs requested in the config (``plot_epochs``). Returns the files
    written. I/O problems surface with the offending path attached.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise HarnessError(f"cannot create report directory {out}: {err}") from err

    written: list[Path] = []

    def write_text(name: str, text: str) -> None:
        path = out / name
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as err:
            raise HarnessError(f"cannot write {path}: {err}") from err
        written.append(path)

    write_text("tables.csv", render_tables_csv(result))
    write_text("report.json", json.dumps(report_to_dict(result), indent=2, sort_keys=True))
    write_text("outcomes.csv", render_outcomes_csv(result))

    first = result.seed_results[0] if result.seed_results else None
    if first is not None:
        fig_path = out / "visible_satellites.svg"
        plot_visible_satellites(first.visible_per_epoch, fig_path)
        written.append(fig_path)
        if scene is not None:
            for payload in first.plot_payloads:
                fig_path = out / f"scene_map_epoch_{payload.epoch_index}.svg"
                plot_scene_map(
                    scene, fig_path,
                    aoi_parts=payload.aoi_parts,
                    truth=payload.truth,
                    title=(f"epoch {payload.epoch_index}: AOI with "
                           f"{payload.satellites_used} selected satellites"),
                )
                written.append(fig_path)
    return written
