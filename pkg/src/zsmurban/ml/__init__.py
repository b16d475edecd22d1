"""From-scratch LOS/NLOS classifiers: random forest, gradient boosting, SVM."""

from .ensemble import (
    ClassProbability,
    MlError,
    TrainedEnsemble,
    evaluate_accuracy,
    model_from_json,
    model_to_json,
    nlos_probabilities,
    predict_label,
    predict_proba,
    train_ensemble,
    train_gbdt,
    train_rf,
    train_svm,
)
from .forest import RandomForestModel, RfConfig
from .gbdt import GbdtConfig, GbdtModel
from .svm import SmoNonConvergenceError, SvmConfig, SvmModel, kkt_max_violation
from .tree import DecisionTree

__all__ = [
    "ClassProbability",
    "DecisionTree",
    "GbdtConfig",
    "GbdtModel",
    "MlError",
    "RandomForestModel",
    "RfConfig",
    "SmoNonConvergenceError",
    "SvmConfig",
    "SvmModel",
    "TrainedEnsemble",
    "evaluate_accuracy",
    "kkt_max_violation",
    "model_from_json",
    "model_to_json",
    "nlos_probabilities",
    "predict_label",
    "predict_proba",
    "train_ensemble",
    "train_gbdt",
    "train_rf",
    "train_svm",
]
