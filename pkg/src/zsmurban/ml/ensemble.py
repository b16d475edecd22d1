"""The three-classifier ensemble and its shared probability interface.

Each algorithm reports a class probability for every satellite sample:
random forest as the NLOS vote fraction across trees, boosting as the sigmoid
of summed stage outputs, SVM via its calibrated sigmoid. The downstream
selection rule consumes only these probabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..features import LabeledSample, samples_to_arrays
from ..scene import LOS, NLOS
from .forest import RandomForestModel, RfConfig, train_rf_arrays
from .gbdt import GbdtConfig, GbdtModel, train_gbdt_arrays
from .svm import SvmConfig, SvmModel, train_svm_arrays

__all__ = [
    "MlError",
    "ClassProbability",
    "TrainedEnsemble",
    "train_rf",
    "train_gbdt",
    "train_svm",
    "train_ensemble",
    "predict_proba",
    "nlos_probabilities",
    "predict_label",
    "evaluate_accuracy",
    "model_to_json",
    "model_from_json",
]

AnyModel = RandomForestModel | GbdtModel | SvmModel

_ALGO_OF_TYPE = {RandomForestModel: "rf", GbdtModel: "gbdt", SvmModel: "svm"}
_TYPE_OF_ALGO = {"rf": RandomForestModel, "gbdt": GbdtModel, "svm": SvmModel}


class MlError(ValueError):
    pass


@dataclass(frozen=True)
class ClassProbability:
    p_los: float
    p_nlos: float

    def __post_init__(self):
        if not (0.0 <= self.p_nlos <= 1.0) or abs(self.p_los + self.p_nlos - 1.0) > 1e-9:
            raise MlError(f"invalid class probability pair ({self.p_los}, {self.p_nlos})")

    @property
    def label(self) -> str:
        return NLOS if self.p_nlos > 0.5 else LOS

    @property
    def confidence(self) -> float:
        """The larger of the two class probabilities."""
        return max(self.p_los, self.p_nlos)


@dataclass
class TrainedEnsemble:
    rf: RandomForestModel
    gbdt: GbdtModel
    svm: SvmModel

    @property
    def models(self) -> tuple[AnyModel, AnyModel, AnyModel]:
        return (self.rf, self.gbdt, self.svm)

    @property
    def names(self) -> tuple[str, str, str]:
        return ("rf", "gbdt", "svm")


def _check_trainable(y: np.ndarray) -> None:
    if len(np.unique(y)) < 2:
        raise MlError("single-class data: training needs both LOS and NLOS samples")


def train_rf(data: list[LabeledSample], cfg: RfConfig = RfConfig()) -> RandomForestModel:
    x, y = samples_to_arrays(data)
    _check_trainable(y)
    return train_rf_arrays(x, y, cfg)


def train_gbdt(data: list[LabeledSample], cfg: GbdtConfig = GbdtConfig()) -> GbdtModel:
    x, y = samples_to_arrays(data)
    if cfg.stages > 0:
        _check_trainable(y)
    return train_gbdt_arrays(x, y, cfg)


def train_svm(data: list[LabeledSample], cfg: SvmConfig = SvmConfig()) -> SvmModel:
    x, y = samples_to_arrays(data)
    _check_trainable(y)
    return train_svm_arrays(x, y, cfg)


def train_ensemble(data: list[LabeledSample],
                   rf_cfg: RfConfig = RfConfig(),
                   gbdt_cfg: GbdtConfig = GbdtConfig(),
                   svm_cfg: SvmConfig = SvmConfig()) -> TrainedEnsemble:
    return TrainedEnsemble(
        rf=train_rf(data, rf_cfg),
        gbdt=train_gbdt(data, gbdt_cfg),
        svm=train_svm(data, svm_cfg),
    )


def nlos_probabilities(model: AnyModel, x: np.ndarray) -> np.ndarray:
    """Vectorized NLOS probability for an (n, 3) feature matrix."""
    if isinstance(model, RandomForestModel):
        return model.vote_fractions(x)
    if isinstance(model, GbdtModel):
        return model.nlos_probability(x)
    if isinstance(model, SvmModel):
        return model.nlos_probability(x)
    raise MlError(f"unknown model type {type(model).__name__}")


def predict_proba(model: AnyModel, features) -> ClassProbability:
    """Class probabilities for a single feature vector."""
    arr = features.as_array() if hasattr(features, "as_array") else np.asarray(features, dtype=float)
    p_nlos = float(nlos_probabilities(model, arr[None, :])[0])
    p_nlos = min(max(p_nlos, 0.0), 1.0)
    return ClassProbability(p_los=1.0 - p_nlos, p_nlos=p_nlos)


def predict_label(model: AnyModel, features) -> str:
    return predict_proba(model, features).label


def evaluate_accuracy(model: AnyModel, data: list[LabeledSample]) -> float:
    """Fraction of argmax-correct predictions."""
    if not data:
        raise MlError("cannot evaluate accuracy on empty data")
    x, y = samples_to_arrays(data)
    pred = (nlos_probabilities(model, x) > 0.5).astype(int)
    return float((pred == y).mean())


def model_to_json(model: AnyModel) -> str:
    algo = _ALGO_OF_TYPE.get(type(model))
    if algo is None:
        raise MlError(f"cannot serialize {type(model).__name__}")
    return json.dumps({"format_version": 1, "algo": algo, "model": model.to_dict()},
                      sort_keys=True)


def model_from_json(text: str) -> AnyModel:
    data = json.loads(text)
    if data.get("format_version") != 1:
        raise MlError(f"unsupported model format version {data.get('format_version')!r}")
    algo = data.get("algo")
    if algo not in _TYPE_OF_ALGO:
        raise MlError(f"unknown model algo {algo!r}")
    return _TYPE_OF_ALGO[algo].from_dict(data["model"])
