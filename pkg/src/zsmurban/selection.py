"""Conservative satellite selection by unanimous voting with a confidence gate.

A satellite enters positioning only when all three classifiers agree on its
LOS/NLOS label AND every model's confidence (its larger class probability)
strictly exceeds the threshold. Everything else is excluded and tagged with
why. The gate never looks at truth; statistics over truth labels live in
``selection_statistics`` for evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .features import FeatureVector
from .ml import TrainedEnsemble, nlos_probabilities
from .scene import LOS, NLOS

__all__ = [
    "REJECT_DISAGREEMENT",
    "REJECT_LOW_CONFIDENCE",
    "SelectionError",
    "SelectionDecision",
    "SelectionStats",
    "decisions_from_probabilities",
    "select_satellites",
    "selection_statistics",
]

REJECT_DISAGREEMENT = "disagreement"
REJECT_LOW_CONFIDENCE = "lowConfidence"


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class SelectionDecision:
    sat_id: str
    per_model_labels: tuple[str, str, str]
    per_model_confidences: tuple[float, float, float]
    selected: bool
    agreed_label: str | None
    rejection_reason: str | None

    def __post_init__(self):
        if self.selected:
            assert self.agreed_label is not None and self.rejection_reason is None
        else:
            assert self.rejection_reason in (REJECT_DISAGREEMENT, REJECT_LOW_CONFIDENCE)


def decisions_from_probabilities(
    sat_ids: Sequence[str],
    p_nlos_by_model: Sequence[Sequence[float]],
    threshold: float,
) -> list[SelectionDecision]:
    """Apply the gate to per-model NLOS probabilities (one rule, one place).

    ``p_nlos_by_model`` holds three rows aligned with ``sat_ids``; output is
    ordered by satellite id.
    """
    if not 0.0 <= threshold <= 1.0:
        raise SelectionError(f"threshold must be within [0, 1], got {threshold}")
    decisions: list[SelectionDecision] = []
    for i in sorted(range(len(sat_ids)), key=lambda k: sat_ids[k]):
        labels = []
        confidences = []
        for row in p_nlos_by_model:
            p = float(row[i])
            labels.append(NLOS if p > 0.5 else LOS)
            confidences.append(max(p, 1.0 - p))
        unanimous = labels[0] == labels[1] == labels[2]
        if unanimous and min(confidences) > threshold:
            decisions.append(SelectionDecision(
                sat_id=sat_ids[i],
                per_model_labels=tuple(labels),
                per_model_confidences=tuple(confidences),
                selected=True,
                agreed_label=labels[0],
                rejection_reason=None,
            ))
        else:
            decisions.append(SelectionDecision(
                sat_id=sat_ids[i],
                per_model_labels=tuple(labels),
                per_model_confidences=tuple(confidences),
                selected=False,
                agreed_label=labels[0] if unanimous else None,
                rejection_reason=REJECT_DISAGREEMENT if not unanimous else REJECT_LOW_CONFIDENCE,
            ))
    return decisions


def select_satellites(
    epoch_features: Sequence[tuple[str, FeatureVector]],
    ensemble: TrainedEnsemble,
    threshold: float = 0.7,
) -> list[SelectionDecision]:
    """One decision per satellite, ordered by satellite id.

    Selection requires unanimity and min confidence strictly above
    ``threshold``. For a binary argmax any confidence is >= 0.5, so
    thresholds at or below 0.5 reduce the gate to pure unanimity;
    0 is therefore a valid way to run unanimity-only selection.
    """
    if not epoch_features:
        if not 0.0 <= threshold <= 1.0:
            raise SelectionError(f"threshold must be within [0, 1], got {threshold}")
        return []
    x = np.array([fv.as_array() for _, fv in epoch_features])
    p_by_model = [nlos_probabilities(m, x) for m in ensemble.models]
    return decisions_from_probabilities([sid for sid, _ in epoch_features], p_by_model, threshold)


@dataclass(frozen=True)
class SelectionStats:
    """Aggregate behaviour of the gate over many epochs, against truth."""

    epoch_count: int
    satellite_count: int
    unanimous_fraction: float
    selected_fraction: float         # passed unanimity AND confidence
    selected_correct_rate: float
    selected_misclassified_per_epoch: float
    per_model_accuracy: tuple[float, float, float]
    per_model_misclassified_per_epoch: tuple[float, float, float]


def selection_statistics(
    decisions_by_epoch: Sequence[Sequence[SelectionDecision]],
    truth_by_epoch: Sequence[Mapping[str, str]],
) -> SelectionStats:
    if len(decisions_by_epoch) != len(truth_by_epoch):
        raise SelectionError("decisions and truth must cover the same epochs")
    n_epochs = len(decisions_by_epoch)
    n_sats = 0
    n_unanimous = 0
    n_selected = 0
    n_selected_correct = 0
    model_correct = [0, 0, 0]
    model_wrong = [0, 0, 0]
    for decisions, truth in zip(decisions_by_epoch, truth_by_epoch):
        for d in decisions:
            n_sats += 1
            t = truth[d.sat_id]
            if d.agreed_label is not None:
                n_unanimous += 1
            if d.selected:
                n_selected += 1
                if d.agreed_label == t:
                    n_selected_correct += 1
            for k, label in enumerate(d.per_model_labels):
                if label == t:
                    model_correct[k] += 1
                else:
                    model_wrong[k] += 1
    if n_sats == 0 or n_epochs == 0:
        raise SelectionError("no satellites to aggregate")
    return SelectionStats(
        epoch_count=n_epochs,
        satellite_count=n_sats,
        unanimous_fraction=n_unanimous / n_sats,
        selected_fraction=n_selected / n_sats,
        selected_correct_rate=(n_selected_correct / n_selected) if n_selected else 1.0,
        selected_misclassified_per_epoch=(n_selected - n_selected_correct) / n_epochs,
        per_model_accuracy=tuple(c / n_sats for c in model_correct),
        per_model_misclassified_per_epoch=tuple(w / n_epochs for w in model_wrong),
    )
