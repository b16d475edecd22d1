"""zsm-urban command line.

Subcommands: scene gen|show, dataset build, train, run, compare, plot.
Exit codes: 0 success, 2 configuration error, 3 pipeline error. The
ZSM_URBAN_THREADS environment variable caps the experiment worker pool.
File formats are documented in docs/formats.md.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .features import samples_from_csv, samples_to_csv, split_samples
from .harness import (
    ConfigError,
    ExperimentConfig,
    HarnessError,
    MethodReport,
    compare_methods,
    run_experiment,
)
from .ml import GbdtConfig, RfConfig, SvmConfig, model_to_json, train_gbdt, train_rf, train_svm
from .report import emit_report, plot_scene_map, plot_visible_satellites
from .scene import (
    NLOS,
    NoiseConfig,
    SceneConfig,
    epochs_from_jsonl,
    epochs_to_jsonl,
    generate_scene,
    scene_from_json,
    scene_to_json,
    simulate,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PIPELINE = 3


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from err


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _cmd_scene_gen(args: argparse.Namespace) -> int:
    cfg = SceneConfig(seed=args.seed, epoch_count=args.epochs,
                      train_epoch_count=args.train_epochs)
    scene, epochs = simulate(cfg, NoiseConfig())
    out = Path(args.out)
    _write_text(out / "scene.json", scene_to_json(scene))
    _write_text(out / "epochs.jsonl", epochs_to_jsonl(epochs))
    print(f"wrote {out / 'scene.json'} and {out / 'epochs.jsonl'} "
          f"({len(scene.buildings)} buildings, {len(epochs)} epochs)")
    return EXIT_OK


def _cmd_scene_show(args: argparse.Namespace) -> int:
    scene = scene_from_json(_read_text(args.scene))
    print(f"seed:            {scene.rng_seed}")
    print(f"street:          {scene.street_length:.0f} m x {scene.street_width:.0f} m")
    print(f"buildings:       {len(scene.buildings)}")
    print(f"epochs:          {scene.epoch_count} ({scene.target_epoch_count} on the target road)")
    print(f"initial AOI:     {len(scene.initial_aoi.parts)} parts, {scene.initial_aoi.area:.0f} m^2")
    if args.epochs:
        epochs = epochs_from_jsonl(_read_text(args.epochs))
        n_obs = sum(len(e.observations) for e in epochs)
        n_nlos = sum(1 for e in epochs for o in e.observations if o.truth_label == NLOS)
        print(f"observations:    {n_obs} ({n_nlos / n_obs:.1%} NLOS, "
              f"{n_obs / len(epochs):.2f} visible per epoch)")
    return EXIT_OK


def _cmd_dataset_build(args: argparse.Namespace) -> int:
    scene = scene_from_json(_read_text(args.scene))
    epochs = epochs_from_jsonl(_read_text(args.epochs))
    train, test = split_samples(scene, epochs)
    _write_text(Path(args.out_train), samples_to_csv(train))
    _write_text(Path(args.out_test), samples_to_csv(test))
    print(f"wrote {args.out_train} ({len(train)} samples) and {args.out_test} ({len(test)} samples)")
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    samples = samples_from_csv(_read_text(args.data))
    if args.algo == "rf":
        model = train_rf(samples, RfConfig(seed=args.seed))
    elif args.algo == "gbdt":
        model = train_gbdt(samples, GbdtConfig())
    else:
        model = train_svm(samples, SvmConfig(seed=args.seed))
    _write_text(Path(args.out), model_to_json(model))
    print(f"trained {args.algo} on {len(samples)} samples -> {args.out}")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        payload = json.loads(_read_text(args.config))
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid experiment config JSON: {err}") from err
    cfg = ExperimentConfig.from_dict(payload)
    result = run_experiment(cfg)
    first_scene = None
    if result.seed_results:
        first_scene = generate_scene(replace(cfg.scene, seed=result.seed_results[0].seed))
    written = emit_report(result, args.out, scene=first_scene)
    for path in written:
        print(f"wrote {path}")
    for failure in result.failures:
        print(f"seed {failure.seed} failed ({failure.stage}): {failure.error}", file=sys.stderr)
    if result.trends is not None:
        print(f"trends: fewer_misclassified={result.trends.fewer_misclassified} "
              f"success_ordering={result.trends.success_ordering} "
              f"containment_ordering={result.trends.containment_ordering} "
              f"bounds_weakly_larger={result.trends.bounds_weakly_larger}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    try:
        payload = json.loads(_read_text(args.report))
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid report JSON: {err}") from err
    pooled = payload.get("pooled")
    if not isinstance(pooled, dict):
        raise ConfigError("report JSON has no pooled method table")
    reports = {}
    for method, row in pooled.items():
        reports[method] = MethodReport(
            method=method, seed=None,
            epoch_count=int(row["epoch_count"]),
            classification_accuracy=float(row["classification_accuracy"]),
            mean_misclassified_per_epoch=float(row["mean_misclassified_per_epoch"]),
            success_count=int(row["success_count"]),
            containment_count=int(row["containment_count"]),
            success_rate=float(row["success_rate"]),
            containment_rate=float(row["containment_rate"]),
            mean_cross_bound=row["mean_cross_bound_m"],
            mean_along_bound=row["mean_along_bound_m"],
            mean_satellites_used=float(row["mean_satellites_used"]),
            no_refinement_count=int(row["no_refinement_count"]),
            boundary_ambiguous_count=int(row["boundary_ambiguous_count"]),
        )
    try:
        trends = compare_methods(reports)
    except HarnessError as err:
        raise ConfigError(str(err)) from err
    print(f"T1 fewer misclassified per epoch: {trends.fewer_misclassified}")
    print(f"T2 success-rate ordering:         {trends.success_ordering}")
    print(f"T3 containment-rate ordering:     {trends.containment_ordering}")
    print(f"T4 bounds weakly larger:          {trends.bounds_weakly_larger}")
    return EXIT_OK


def _cmd_plot(args: argparse.Namespace) -> int:
    scene = scene_from_json(_read_text(args.scene))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plot_scene_map(scene, out / "scene_map.svg", title=f"scene (seed {scene.rng_seed})")
    print(f"wrote {out / 'scene_map.svg'}")
    if args.epochs:
        epochs = epochs_from_jsonl(_read_text(args.epochs))
        target = [e for e in epochs if e.epoch_index >= scene.target_start]
        counts = [len(e.observations) for e in (target or epochs)]
        plot_visible_satellites(counts, out / "visible_satellites.svg")
        print(f"wrote {out / 'visible_satellites.svg'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zsm-urban",
        description="Set-based urban GNSS shadow matching with conservative satellite selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scene = sub.add_parser("scene", help="generate or inspect synthetic scenes")
    scene_sub = scene.add_subparsers(dest="scene_command", required=True)
    gen = scene_sub.add_parser("gen", help="generate scene.json + epochs.jsonl")
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--epochs", type=int, default=146, help="target-road epochs")
    gen.add_argument("--train-epochs", type=int, default=292)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_scene_gen)
    show = scene_sub.add_parser("show", help="summarize a scene file")
    show.add_argument("--scene", required=True)
    show.add_argument("--epochs")
    show.set_defaults(func=_cmd_scene_show)

    dataset = sub.add_parser("dataset", help="feature dataset tools")
    dataset_sub = dataset.add_subparsers(dest="dataset_command", required=True)
    build = dataset_sub.add_parser("build", help="extract train/test feature CSVs")
    build.add_argument("--scene", required=True)
    build.add_argument("--epochs", required=True)
    build.add_argument("--out-train", required=True)
    build.add_argument("--out-test", required=True)
    build.set_defaults(func=_cmd_dataset_build)

    train = sub.add_parser("train", help="train one classifier from a feature CSV")
    train.add_argument("--algo", choices=("rf", "gbdt", "svm"), required=True)
    train.add_argument("--data", required=True)
    train.add_argument("--out", required=True)
    train.add_argument("--seed", type=int, default=0)
    train.set_defaults(func=_cmd_train)

    run = sub.add_parser("run", help="run a full experiment from exp.json")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.set_defaults(func=_cmd_run)

    compare = sub.add_parser("compare", help="evaluate trend verdicts on a report.json")
    compare.add_argument("--report", required=True)
    compare.set_defaults(func=_cmd_compare)

    plot = sub.add_parser("plot", help="render figures from scene/epoch files")
    plot.add_argument("--scene", required=True)
    plot.add_argument("--epochs")
    plot.add_argument("--out", required=True)
    plot.set_defaults(func=_cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, json.JSONDecodeError) as err:
        # Bad inputs (scene/config/CSV content) are configuration problems.
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"pipeline error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
