import itertools

import numpy as np
import pytest

from zsmurban.features import FeatureVector
from zsmurban.scene import LOS, NLOS
from zsmurban.selection import (
    REJECT_DISAGREEMENT,
    REJECT_LOW_CONFIDENCE,
    SelectionError,
    decisions_from_probabilities,
    select_satellites,
    selection_statistics,
)


def p_nlos_for(label, confidence):
    """NLOS probability for a model that argmaxes to ``label`` at ``confidence``."""
    return confidence if label == NLOS else 1.0 - confidence


def gate(labels, confidences, threshold):
    rows = [[p_nlos_for(lbl, conf)] for lbl, conf in zip(labels, confidences)]
    return decisions_from_probabilities(["G01"], rows, threshold)[0]


class TestRule:
    def test_selected_when_unanimous_and_confident(self):
        d = gate((LOS, LOS, LOS), (0.9, 0.8, 0.75), 0.7)
        assert d.selected and d.agreed_label == LOS and d.rejection_reason is None

    def test_rejected_on_disagreement(self):
        d = gate((LOS, LOS, NLOS), (0.99, 0.99, 0.99), 0.7)
        assert not d.selected and d.rejection_reason == REJECT_DISAGREEMENT

    def test_rejected_on_low_confidence_strict(self):
        d = gate((NLOS, NLOS, NLOS), (0.95, 0.69, 0.99), 0.7)
        assert not d.selected and d.rejection_reason == REJECT_LOW_CONFIDENCE
        assert d.agreed_label == NLOS

    def test_exhaustive_truth_table_with_boundary_confidences(self):
        # Every labeling pattern of the three models, crossed with
        # confidences at and around the threshold; strict > is required.
        threshold = 0.7
        for labels in itertools.product((LOS, NLOS), repeat=3):
            for confs in itertools.product((0.699, 0.700, 0.701), repeat=3):
                d = gate(labels, confs, threshold)
                unanimous = labels[0] == labels[1] == labels[2]
                should_select = unanimous and min(confs) > threshold
                assert d.selected == should_select, (labels, confs)
                if not d.selected:
                    want = REJECT_DISAGREEMENT if not unanimous else REJECT_LOW_CONFIDENCE
                    assert d.rejection_reason == want

    def test_threshold_monotonicity_nested_sets(self, rng):
        # Raising the threshold never adds a satellite.
        sat_ids = [f"G{k:02d}" for k in range(12)]
        p = [rng.uniform(0, 1, size=12) for _ in range(3)]
        previous = None
        for threshold in np.linspace(0.0, 1.0, 11):
            selected = {
                d.sat_id for d in decisions_from_probabilities(sat_ids, p, float(threshold))
                if d.selected
            }
            if previous is not None:
                assert selected.issubset(previous)
            previous = selected

    def test_threshold_zero_is_pure_unanimity(self, rng):
        sat_ids = [f"G{k:02d}" for k in range(20)]
        p = [rng.uniform(0, 1, size=20) for _ in range(3)]
        decisions = decisions_from_probabilities(sat_ids, p, 0.0)
        for i, d in enumerate(sorted(decisions, key=lambda d: d.sat_id)):
            labels = {NLOS if row[int(d.sat_id[1:])] > 0.5 else LOS for row in p}
            assert d.selected == (len(labels) == 1)

    def test_model_permutation_invariance(self, rng):
        sat_ids = [f"G{k:02d}" for k in range(15)]
        p = [rng.uniform(0, 1, size=15) for _ in range(3)]
        base = decisions_from_probabilities(sat_ids, p, 0.7)
        for perm in itertools.permutations(range(3)):
            permuted = decisions_from_probabilities(sat_ids, [p[i] for i in perm], 0.7)
            for a, b in zip(base, permuted):
                assert a.selected == b.selected
                assert a.agreed_label == b.agreed_label
                assert a.rejection_reason == b.rejection_reason

    def test_invalid_threshold_rejected(self):
        with pytest.raises(SelectionError):
            decisions_from_probabilities(["G01"], [[0.5], [0.5], [0.5]], 1.5)

    def test_empty_input_gives_empty_output(self, small_ensemble):
        assert select_satellites([], small_ensemble, 0.7) == []

    def test_decisions_ordered_by_sat_id(self, small_ensemble):
        feats = [
            ("G07", FeatureVector(50.0, 45.0, 0.0)),
            ("G01", FeatureVector(30.0, 30.0, 20.0)),
            ("G03", FeatureVector(70.0, 48.0, -1.0)),
        ]
        decisions = select_satellites(feats, small_ensemble, 0.7)
        assert [d.sat_id for d in decisions] == ["G01", "G03", "G07"]


class TestStatistics:
    def test_perfect_models(self):
        sat_ids = ["G01", "G02", "G03", "G04"]
        truth = {"G01": LOS, "G02": NLOS, "G03": LOS, "G04": LOS}
        p = [[0.01 if truth[s] == LOS else 0.99 for s in sat_ids]] * 3
        decisions = decisions_from_probabilities(sat_ids, p, 0.7)
        stats = selection_statistics([decisions], [truth])
        assert stats.unanimous_fraction == 1.0
        assert stats.selected_fraction == 1.0
        assert stats.selected_correct_rate == 1.0
        assert stats.selected_misclassified_per_epoch == 0.0
        assert stats.per_model_accuracy == (1.0, 1.0, 1.0)

    def test_reference_selection_stats_recorded(self):
        from zsmurban.report import load_reference_metrics
        ref = load_reference_metrics()["selection"]
        assert ref["unanimous_fraction"] == pytest.approx(0.863)
        assert ref["selected_fraction"] == pytest.approx(0.709)
        assert ref["selected_correct_rate"] == pytest.approx(0.908)

    def test_mismatched_epochs_rejected(self):
        with pytest.raises(SelectionError):
            selection_statistics([[]], [])
