from dataclasses import replace

import pytest

from zsmurban.harness import (
    ConfigError,
    ExperimentConfig,
    HarnessError,
    compare_methods,
    run_experiment,
    run_seed,
)
from zsmurban.report import reference_reports

from .conftest import SMALL_EXPERIMENT


@pytest.fixture(scope="module")
def small_result():
    return run_experiment(SMALL_EXPERIMENT)


class TestConfig:
    def test_round_trip(self):
        cfg = SMALL_EXPERIMENT
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_bad_method_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(methods=("rf", "mystery")).validate()

    def test_bad_threshold_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(threshold=1.5).validate()

    def test_bad_section_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"scene": {"not_a_field": 3}})


class TestRunSeed:
    def test_oracle_ablation_is_perfectly_sound(self, small_result):
        for res in small_result.seed_results:
            oracle = res.reports["oracle"]
            ambiguous = oracle.boundary_ambiguous_count
            assert oracle.success_rate == 1.0
            assert oracle.containment_count + ambiguous >= oracle.epoch_count
            assert oracle.mean_misclassified_per_epoch == 0.0

    def test_containment_never_exceeds_success(self, small_result):
        for res in small_result.seed_results:
            for report in res.reports.values():
                assert report.containment_rate <= report.success_rate + 1e-12

    def test_conservative_methods_always_at_least_single_models(self, small_result):
        # Per-epoch superset structure: the gated region contains each single
        # model's region, so success and containment can only improve.
        for res in small_result.seed_results:
            gated = res.reports["unanimous_threshold"]
            unan = res.reports["unanimous"]
            for m in ("rf", "gbdt", "svm"):
                assert gated.success_rate >= res.reports[m].success_rate
                assert gated.containment_rate >= res.reports[m].containment_rate
                assert unan.containment_rate >= res.reports[m].containment_rate

    def test_identical_classifiers_reduce_to_single_model(self, small_split):
        # Degenerate ensemble: the same model three times makes unanimity
        # vacuous, so "unanimous" must equal the single-model baseline.
        from zsmurban.ml import TrainedEnsemble, train_rf
        import zsmurban.harness as harness

        cfg = replace(SMALL_EXPERIMENT, seeds=(11,),
                      methods=("rf", "unanimous"))
        original = harness.train_ensemble

        def same_model_thrice(train, rf_cfg, gbdt_cfg, svm_cfg):
            model = train_rf(train, rf_cfg)
            return TrainedEnsemble(rf=model, gbdt=model, svm=model)

        harness.train_ensemble = same_model_thrice
        try:
            res = run_seed(cfg, 11)
        finally:
            harness.train_ensemble = original
        rf, un = res.reports["rf"], res.reports["unanimous"]
        assert un.success_rate == rf.success_rate
        assert un.containment_rate == rf.containment_rate
        assert un.mean_misclassified_per_epoch == rf.mean_misclassified_per_epoch
        assert un.mean_cross_bound == pytest.approx(rf.mean_cross_bound, abs=1e-9)
        assert un.mean_along_bound == pytest.approx(rf.mean_along_bound, abs=1e-9)


class TestCompareMethods:
    def test_reference_fixture_all_trends_true(self):
        verdict = compare_methods(reference_reports())
        assert verdict.fewer_misclassified
        assert verdict.success_ordering
        assert verdict.containment_ordering
        assert verdict.bounds_weakly_larger
        assert verdict.all_true

    def test_insufficient_data_rejected(self):
        refs = reference_reports()
        with pytest.raises(HarnessError):
            compare_methods({"rf": refs["rf"]})
        partial = {m: refs[m] for m in ("rf", "gbdt", "svm", "unanimous")}
        with pytest.raises(HarnessError):
            compare_methods(partial)

    def test_small_experiment_records_trends(self, small_result):
        assert small_result.trends is not None
        assert len(small_result.bounds_trend_seeds) == len(small_result.seed_results)


class TestRunExperiment:
    def test_all_seeds_survive(self, small_result):
        assert small_result.failures == []
        assert [r.seed for r in small_result.seed_results] == list(SMALL_EXPERIMENT.seeds)

    def test_pooled_counts_are_sums(self, small_result):
        for method in SMALL_EXPERIMENT.methods:
            pooled = small_result.pooled[method]
            per_seed = [r.reports[method] for r in small_result.seed_results]
            assert pooled.epoch_count == sum(r.epoch_count for r in per_seed)
            assert pooled.success_count == sum(r.success_count for r in per_seed)
            assert pooled.containment_count == sum(r.containment_count for r in per_seed)

    def test_failed_seed_is_isolated(self):
        # An unsolvable seed (empty split) must become a structured failure
        # while the rest of the experiment completes.
        cfg = replace(SMALL_EXPERIMENT, seeds=(11,))
        import zsmurban.harness as harness
        original = harness.simulate

        def exploding(scene_cfg, noise):
            raise RuntimeError("boom")

        harness.simulate = exploding
        try:
            with pytest.raises(HarnessError):
                run_experiment(replace(cfg, seeds=(11,)))
        finally:
            harness.simulate = original

    def test_env_worker_cap_validated(self, monkeypatch):
        monkeypatch.setenv("ZSM_URBAN_THREADS", "0")
        with pytest.raises(ConfigError):
            run_experiment(replace(SMALL_EXPERIMENT, seeds=(11,)))

    def test_single_worker_inline_path(self, monkeypatch, small_result):
        # Forcing the pool to one worker must not change any pooled metric.
        monkeypatch.setenv("ZSM_URBAN_THREADS", "1")
        res = run_experiment(SMALL_EXPERIMENT)
        for method in SMALL_EXPERIMENT.methods:
            assert res.pooled[method] == small_result.pooled[method]
