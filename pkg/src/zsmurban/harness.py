"""Experiment orchestration: run the full pipeline over seeds, aggregate the
reliability metrics into method reports, and check the headline trends.

A "method" is a satellite-selection policy evaluated over the target road:
the three single classifiers use every visible satellite with their own
labels, the two conservative policies gate satellites by unanimity (plus the
confidence threshold), and the oracle ablation injects ground-truth labels.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .features import FeatureVector, LabeledSample, samples_to_arrays, split_samples
from .ml import (
    GbdtConfig,
    RfConfig,
    SvmConfig,
    TrainedEnsemble,
    nlos_probabilities,
    train_ensemble,
)
from .scene import LOS, NLOS, NoiseConfig, SatelliteView, Scene, SceneConfig, simulate
from .selection import (
    SelectionDecision,
    SelectionStats,
    decisions_from_probabilities,
    selection_statistics,
)
from .zsm import (
    AOI,
    PositioningOutcome,
    ShadowRegion,
    compute_shadow,
    refine_aoi,
    score_epoch,
    truth_near_shadow_boundary,
)

__all__ = [
    "SINGLE_MODEL_METHODS",
    "CONSERVATIVE_METHODS",
    "ALL_METHODS",
    "HarnessError",
    "ConfigError",
    "PipelineError",
    "ExperimentConfig",
    "MethodReport",
    "TrendVerdict",
    "SeedFailure",
    "SeedRunResult",
    "ExperimentResult",
    "run_seed",
    "run_experiment",
    "compare_methods",
    "bounds_trend_for_seed",
    "pool_reports",
]

SINGLE_MODEL_METHODS = ("rf", "gbdt", "svm")
CONSERVATIVE_METHODS = ("unanimous", "unanimous_threshold")
ALL_METHODS = SINGLE_MODEL_METHODS + CONSERVATIVE_METHODS
_KNOWN_METHODS = ALL_METHODS + ("oracle",)


class HarnessError(RuntimeError):
    pass


class ConfigError(HarnessError):
    pass


class PipelineError(HarnessError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scene: SceneConfig = SceneConfig()
    noise: NoiseConfig = NoiseConfig()
    rf: RfConfig = RfConfig()
    gbdt: GbdtConfig = GbdtConfig()
    svm: SvmConfig = SvmConfig()
    threshold: float = 0.7
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    methods: tuple[str, ...] = ALL_METHODS
    # Target-road epoch offsets whose refined AOI gets a scene-map figure
    # (offsets beyond the target road are ignored).
    plot_epochs: tuple[int, ...] = (0, 73)

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold {self.threshold} outside [0, 1]")
        unknown = [m for m in self.methods if m not in _KNOWN_METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; known: {sorted(_KNOWN_METHODS)}")
        try:
            self.scene.validate()
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def to_dict(self) -> dict:
        return {
            "scene": asdict(self.scene),
            "noise": asdict(self.noise),
            "rf": asdict(self.rf),
            "gbdt": asdict(self.gbdt),
            "svm": asdict(self.svm),
            "threshold": self.threshold,
            "seeds": list(self.seeds),
            "methods": list(self.methods),
            "plot_epochs": list(self.plot_epochs),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        def build(klass, key):
            payload = dict(data.get(key, {}))
            for name, value in payload.items():
                if isinstance(value, list):
                    payload[name] = tuple(value)
            try:
                return klass(**payload)
            except TypeError as err:
                raise ConfigError(f"bad {key} section: {err}") from err

        cfg = cls(
            scene=build(SceneConfig, "scene"),
            noise=build(NoiseConfig, "noise"),
            rf=build(RfConfig, "rf"),
            gbdt=build(GbdtConfig, "gbdt"),
            svm=build(SvmConfig, "svm"),
            threshold=float(data.get("threshold", 0.7)),
            seeds=tuple(int(s) for s in data.get("seeds", (1, 2, 3, 4, 5))),
            methods=tuple(data.get("methods", ALL_METHODS)),
            plot_epochs=tuple(int(e) for e in data.get("plot_epochs", ())),
        )
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class MethodReport:
    method: str
    seed: int | None                 # None means pooled over seeds
    epoch_count: int
    classification_accuracy: float   # single models: all satellites; gated: among selected
    mean_misclassified_per_epoch: float
    success_count: int
    containment_count: int
    success_rate: float
    containment_rate: float
    mean_cross_bound: float | None   # averaged over successful epochs only
    mean_along_bound: float | None
    mean_satellites_used: float
    no_refinement_count: int
    boundary_ambiguous_count: int


@dataclass(frozen=True)
class TrendVerdict:
    """Machine-checkable versions of the four headline comparisons."""

    fewer_misclassified: bool     # gated misclassified/epoch < every single model
    success_ordering: bool        # thr >= unanimous >= min(single models)
    containment_ordering: bool    # thr >= every single model
    bounds_weakly_larger: bool    # both conservative bounds >= every single model

    @property
    def all_true(self) -> bool:
        return (self.fewer_misclassified and self.success_ordering
                and self.containment_ordering and self.bounds_weakly_larger)


@dataclass(frozen=True)
class SeedFailure:
    seed: int
    stage: str
    error: str


@dataclass
class PlotEpochPayload:
    epoch_index: int
    truth: tuple[float, float]
    aoi_parts: list[list[tuple[float, float]]]
    satellites_used: int


@dataclass
class SeedRunResult:
    seed: int
    reports: dict[str, MethodReport]
    outcomes: dict[str, list[PositioningOutcome]]
    selection: SelectionStats
    model_accuracies: dict[str, float]
    train_sample_count: int
    test_sample_count: int
    train_nlos_count: int
    test_nlos_count: int
    visible_per_epoch: list[int]
    plot_payloads: list[PlotEpochPayload] = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    seed_results: list[SeedRunResult]
    failures: list[SeedFailure]
    pooled: dict[str, MethodReport]
    trends: TrendVerdict | None
    bounds_trend_seeds: list[bool]


def _model_seeded(cfg: ExperimentConfig, seed: int) -> tuple[RfConfig, GbdtConfig, SvmConfig]:
    return (
        replace(cfg.rf, seed=1000 * seed + 1),
        cfg.gbdt,
        replace(cfg.svm, seed=1000 * seed + 3),
    )


def _single_model_decisions(features: Sequence[tuple[str, FeatureVector]],
                            p_nlos: np.ndarray) -> list[SelectionDecision]:
    decisions = []
    for (sat_id, _), p in zip(features, p_nlos):
        label = NLOS if p > 0.5 else LOS
        conf = max(float(p), 1.0 - float(p))
        decisions.append(SelectionDecision(
            sat_id=sat_id, per_model_labels=(label, label, label),
            per_model_confidences=(conf, conf, conf),
            selected=True, agreed_label=label, rejection_reason=None))
    return decisions


def _oracle_decisions(features: Sequence[tuple[str, FeatureVector]],
                      truth: Mapping[str, str]) -> list[SelectionDecision]:
    return [
        SelectionDecision(
            sat_id=sat_id, per_model_labels=(truth[sat_id],) * 3,
            per_model_confidences=(1.0, 1.0, 1.0),
            selected=True, agreed_label=truth[sat_id], rejection_reason=None)
        for sat_id, _ in features
    ]


def _summarize(method: str, seed: int | None, outcomes: Sequence[PositioningOutcome],
               classification_accuracy: float) -> MethodReport:
    n = len(outcomes)
    if n == 0:
        raise PipelineError("cannot summarize a method with no epochs")
    success = [o for o in outcomes if o.success]
    contained = sum(1 for o in outcomes if o.contains_truth)
    cross = [o.cross_street_bound for o in success if o.cross_street_bound is not None]
    along = [o.along_street_bound for o in success if o.along_street_bound is not None]
    return MethodReport(
        method=method,
        seed=seed,
        epoch_count=n,
        classification_accuracy=classification_accuracy,
        mean_misclassified_per_epoch=sum(o.misclassified_used for o in outcomes) / n,
        success_count=len(success),
        containment_count=contained,
        success_rate=len(success) / n,
        containment_rate=contained / n,
        mean_cross_bound=(sum(cross) / len(cross)) if cross else None,
        mean_along_bound=(sum(along) / len(along)) if along else None,
        mean_satellites_used=sum(o.satellites_used for o in outcomes) / n,
        no_refinement_count=sum(1 for o in outcomes if o.no_refinement),
        boundary_ambiguous_count=sum(1 for o in outcomes if o.boundary_ambiguous),
    )


def run_seed(cfg: ExperimentConfig, seed: int) -> SeedRunResult:
    """Full pipeline for one seed: simulate, split, train, select, refine,
    score. Deterministic for a fixed (config, seed).
    """
    scene_cfg = replace(cfg.scene, seed=seed)
    scene, epochs = simulate(scene_cfg, cfg.noise)
    train, test = split_samples(scene, epochs)
    if not train or not test:
        raise PipelineError(f"seed {seed}: empty train or test split")

    rf_cfg, gbdt_cfg, svm_cfg = _model_seeded(cfg, seed)
    ensemble = train_ensemble(train, rf_cfg, gbdt_cfg, svm_cfg)

    x_test, y_test = samples_to_arrays(test)
    model_accuracies = {}
    for name, model in zip(ensemble.names, ensemble.models):
        pred = (nlos_probabilities(model, x_test) > 0.5).astype(int)
        model_accuracies[name] = float((pred == y_test).mean())

    by_epoch: dict[int, list[LabeledSample]] = {}
    for sample in test:
        by_epoch.setdefault(sample.epoch_index, []).append(sample)

    # One batched probability pass per model over the whole test split; the
    # per-epoch loop then only slices.
    p_all = {name: nlos_probabilities(model, x_test)
             for name, model in zip(ensemble.names, ensemble.models)}
    row_of: dict[tuple[int, str], int] = {
        (s.epoch_index, s.sat_id): i for i, s in enumerate(test)}

    target_epochs = [e for e in epochs if e.epoch_index >= scene.target_start]
    aoi_bbox = scene.initial_aoi.bbox
    clip = (aoi_bbox[0] - 1.0, aoi_bbox[1] - 1.0, aoi_bbox[2] + 1.0, aoi_bbox[3] + 1.0)
    initial = AOI(region=scene.initial_aoi)

    methods = list(dict.fromkeys(cfg.methods))
    outcomes: dict[str, list[PositioningOutcome]] = {m: [] for m in methods}
    gated_decisions_by_epoch: list[list[SelectionDecision]] = []
    truth_by_epoch: list[dict[str, str]] = []
    plot_payloads: list[PlotEpochPayload] = []
    plot_offsets = set(cfg.plot_epochs)
    visible_per_epoch: list[int] = []
    correct_counts = {m: [0, 0] for m in methods}  # [correct used, total used]

    for offset, epoch in enumerate(target_epochs):
        samples = by_epoch[epoch.epoch_index]
        features = [(s.sat_id, s.features) for s in samples]
        sat_ids = [s.sat_id for s in samples]
        rows = [row_of[(epoch.epoch_index, sid)] for sid in sat_ids]
        truth = {s.sat_id: s.label for s in samples}
        truth_by_epoch.append(truth)
        visible_per_epoch.append(len(samples))

        shadows: dict[str, ShadowRegion] = {}
        for obs in epoch.observations:
            sat = SatelliteView(obs.sat_id, obs.azimuth_deg, obs.elevation_deg,
                                true_range_m=0.0)
            shadows[obs.sat_id] = compute_shadow(scene, sat, scene.antenna_height, clip)

        p_by_model = {name: p_all[name][rows] for name in ensemble.names}
        p_triplet = [p_by_model[name] for name in ensemble.names]

        decisions_thr = decisions_from_probabilities(sat_ids, p_triplet, cfg.threshold)
        gated_decisions_by_epoch.append(decisions_thr)

        # The refined region only depends on the used (satellite, label)
        # set, so methods that agree share one refinement.
        boundary_dist: dict[str, float] = {}
        aoi_memo: dict[tuple, AOI] = {}

        def boundary_flag(used: list[SelectionDecision]) -> bool:
            for d in used:
                if d.sat_id not in boundary_dist:
                    boundary_dist[d.sat_id] = (
                        0.0 if truth_near_shadow_boundary([shadows[d.sat_id]], epoch.true_position)
                        else 1.0)
                if boundary_dist[d.sat_id] == 0.0:
                    return True
            return False

        for method in methods:
            if method in SINGLE_MODEL_METHODS:
                decisions = _single_model_decisions(features, p_by_model[method])
            elif method == "unanimous":
                decisions = decisions_from_probabilities(sat_ids, p_triplet, 0.0)
            elif method == "unanimous_threshold":
                decisions = decisions_thr
            else:  # oracle ablation
                decisions = _oracle_decisions(features, truth)

            used = [d for d in decisions if d.selected]
            misclassified = sum(1 for d in used if d.agreed_label != truth[d.sat_id])
            correct_counts[method][0] += len(used) - misclassified
            correct_counts[method][1] += len(used)
            key = tuple(sorted((d.sat_id, d.agreed_label or "") for d in used))
            aoi = aoi_memo.get(key)
            if aoi is None:
                aoi = refine_aoi(initial, decisions, shadows)
                aoi_memo[key] = aoi
            outcome = score_epoch(
                aoi, epoch.true_position, scene.street_direction,
                epoch_index=epoch.epoch_index,
                satellites_used=len(used),
                misclassified_used=misclassified,
                boundary_ambiguous=boundary_flag(used),
            )
            outcomes[method].append(outcome)
            if method == "unanimous_threshold" and offset in plot_offsets:
                plot_payloads.append(PlotEpochPayload(
                    epoch_index=epoch.epoch_index,
                    truth=epoch.true_position,
                    aoi_parts=[list(p.vertices) for p in aoi.region.parts],
                    satellites_used=len(used),
                ))

    reports = {}
    for method in methods:
        if method in SINGLE_MODEL_METHODS:
            accuracy = model_accuracies[method]
        else:
            correct, total = correct_counts[method]
            accuracy = correct / total if total else 1.0
        reports[method] = _summarize(method, seed, outcomes[method], accuracy)

    selection = selection_statistics(gated_decisions_by_epoch, truth_by_epoch)
    _, y_train = samples_to_arrays(train)
    return SeedRunResult(
        seed=seed,
        reports=reports,
        outcomes=outcomes,
        selection=selection,
        model_accuracies=model_accuracies,
        train_sample_count=len(train),
        test_sample_count=len(test),
        train_nlos_count=int(y_train.sum()),
        test_nlos_count=int(y_test.sum()),
        visible_per_epoch=visible_per_epoch,
        plot_payloads=plot_payloads,
    )


def pool_reports(per_seed: Sequence[SeedRunResult], methods: Sequence[str]) -> dict[str, MethodReport]:
    """Sample-weighted pooling across seeds (bounds weighted by successful
    epochs, accuracy by used-satellite counts via the per-seed outcome rows).
    """
    pooled = {}
    for method in methods:
        outcomes = [o for res in per_seed for o in res.outcomes[method]]
        if not outcomes:
            continue
        weights = []
        accs = []
        for res in per_seed:
            n_used = sum(o.satellites_used for o in res.outcomes[method])
            if method in SINGLE_MODEL_METHODS:
                n_used = len(res.outcomes[method])  # accuracy is per-epoch-set
            weights.append(max(n_used, 1))
            accs.append(res.reports[method].classification_accuracy)
        accuracy = float(np.average(accs, weights=weights))
        pooled[method] = _summarize(method, None, outcomes, accuracy)
    return pooled


def compare_methods(reports: Mapping[str, MethodReport]) -> TrendVerdict:
    """Evaluate the four headline trends on a set of method reports.

    Needs the three single models plus both conservative methods; anything
    less is insufficient data.
    """
    if len(reports) < 2:
        raise HarnessError("insufficient data: need at least two methods")
    missing = [m for m in ALL_METHODS if m not in reports]
    if missing:
        raise HarnessError(f"insufficient data: missing methods {missing}")
    singles = [reports[m] for m in SINGLE_MODEL_METHODS]
    unanimous = reports["unanimous"]
    gated = reports["unanimous_threshold"]

    fewer = all(gated.mean_misclassified_per_epoch < s.mean_misclassified_per_epoch
                for s in singles)
    success = (gated.success_rate >= unanimous.success_rate
               and unanimous.success_rate >= min(s.success_rate for s in singles))
    containment = all(gated.containment_rate >= s.containment_rate for s in singles)

    def bound_ok(conservative: MethodReport) -> bool:
        if conservative.mean_cross_bound is None or conservative.mean_along_bound is None:
            return False
        return all(
            s.mean_cross_bound is not None and s.mean_along_bound is not None
            and conservative.mean_cross_bound >= s.mean_cross_bound
            and conservative.mean_along_bound >= s.mean_along_bound
            for s in singles
        )

    bounds = bound_ok(unanimous) and bound_ok(gated)
    return TrendVerdict(
        fewer_misclassified=fewer,
        success_ordering=success,
        containment_ordering=containment,
        bounds_weakly_larger=bounds,
    )


def bounds_trend_for_seed(result: SeedRunResult) -> bool:
    """Seed-level version of the bounds trend (geometry dependent, so the
    acceptance gate only requires it in most seeds).
    """
    try:
        return compare_methods(result.reports).bounds_weakly_larger
    except HarnessError:
        return False


def _worker(payload: tuple[dict, int]) -> SeedRunResult:
    cfg_dict, seed = payload
    return run_seed(ExperimentConfig.from_dict(cfg_dict), seed)


def _worker_count(cfg: ExperimentConfig) -> int:
    cap = os.environ.get("ZSM_URBAN_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    if limit < 1:
        raise ConfigError(f"ZSM_URBAN_THREADS must be >= 1, got {cap!r}")
    return max(1, min(len(cfg.seeds), limit))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every seed (in a worker pool when allowed), pool the survivors,
    and evaluate the trend verdicts. A failing seed becomes a structured
    diagnostic; the experiment only fails when no seed survives.
    """
    cfg.validate()
    workers = _worker_count(cfg)
    results: list[SeedRunResult] = []
    failures: list[SeedFailure] = []
    if workers == 1:
        for seed in cfg.seeds:
            try:
                results.append(run_seed(cfg, seed))
            except Exception as err:  # noqa: BLE001 - seed isolation is the contract
                failures.append(SeedFailure(seed=seed, stage=type(err).__name__, error=str(err)))
    else:
        cfg_dict = cfg.to_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {seed: pool.submit(_worker, (cfg_dict, seed)) for seed in cfg.seeds}
            for seed in cfg.seeds:
                try:
                    results.append(futures[seed].result())
                except Exception as err:  # noqa: BLE001
                    failures.append(SeedFailure(seed=seed, stage=type(err).__name__, error=str(err)))
    results.sort(key=lambda r: r.seed)
    if not results:
        raise PipelineError(f"all seeds failed: {[f.error for f in failures]}")

    methods = list(dict.fromkeys(cfg.methods))
    pooled = pool_reports(results, methods)
    trends = None
    if all(m in pooled for m in ALL_METHODS):
        trends = compare_methods(pooled)
    bounds_trend_seeds = [bounds_trend_for_seed(r) for r in results]
    return ExperimentResult(
        config=cfg,
        seed_results=results,
        failures=failures,
        pooled=pooled,
        trends=trends,
        bounds_trend_seeds=bounds_trend_seeds,
    )
