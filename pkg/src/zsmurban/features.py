"""Receiver least squares and LOS/NLOS classification features.

Ranges are nonlinear in position, so the snapshot solution is a Gauss-Newton
iteration: linearize about the current state, solve the normal equations for
the 4-state update (3D position + clock bias), repeat until the step is below
1e-4 m. The residual vector of the final linear solve is the pseudorange
residual feature; together with elevation and C/N0 it forms the per-satellite
feature vector every classifier consumes.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .scene import LOS, NLOS, EpochObservation, Scene

__all__ = [
    "FeatureVector",
    "LabeledSample",
    "ReceiverEstimate",
    "LeastSquaresError",
    "DegenerateGeometryError",
    "NonConvergenceError",
    "solve_least_squares",
    "compute_residuals",
    "extract_features",
    "split_samples",
    "samples_to_csv",
    "samples_from_csv",
    "samples_to_arrays",
]

_STEP_TOL_M = 1e-4
_MAX_ITERATIONS = 10
_COND_LIMIT = 1e12


class LeastSquaresError(RuntimeError):
    pass


class DegenerateGeometryError(LeastSquaresError):
    """Normal equations are ill-conditioned (condition number > 1e12)."""


class NonConvergenceError(LeastSquaresError):
    def __init__(self, message: str, step_trace: list[float]):
        super().__init__(f"{message}; step trace (m): {step_trace}")
        self.step_trace = step_trace


@dataclass(frozen=True)
class ReceiverEstimate:
    position: tuple[float, float, float]  # m
    clock_bias_m: float


@dataclass(frozen=True)
class FeatureVector:
    elevation_deg: float
    cn0_dbhz: float
    residual_m: float

    def as_array(self) -> np.ndarray:
        return np.array([self.elevation_deg, self.cn0_dbhz, self.residual_m])


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    label: str  # LOS | NLOS
    epoch_index: int = -1
    sat_id: str = ""


def compute_residuals(rho: np.ndarray, geometry: np.ndarray, estimate: np.ndarray) -> np.ndarray:
    """Linearized residual: measurement vector minus G @ state.

    ``rho`` and ``estimate`` live in the linearization frame of the current
    iteration. When ``estimate`` solves the normal equations the result is
    orthogonal to the columns of G.
    """
    g = np.asarray(geometry, dtype=float)
    r = np.asarray(rho, dtype=float)
    p = np.asarray(estimate, dtype=float)
    if g.ndim != 2 or g.shape[0] != r.shape[0] or g.shape[1] != p.shape[0]:
        raise LeastSquaresError(
            f"dimension mismatch: G {g.shape}, rho {r.shape}, state {p.shape}")
    return r - g @ p


def _geometry_matrix(sat_positions: np.ndarray, position: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    delta = sat_positions - position[None, :]
    ranges = np.linalg.norm(delta, axis=1)
    g = np.empty((len(ranges), 4))
    g[:, :3] = -delta / ranges[:, None]
    g[:, 3] = 1.0
    return g, ranges


def solve_least_squares(
    epoch: EpochObservation,
    initial_position: tuple[float, float, float] | None = None,
) -> tuple[ReceiverEstimate, np.ndarray, np.ndarray]:
    """Iterated linearized least squares for one epoch.

    Returns (estimate, residual vector (m), final geometry matrix). The
    residuals come from the final normal-equation solve, so they satisfy
    ``||G.T @ delta|| ~ 0`` at convergence.

    Raises:
        DegenerateGeometryError: fewer than 4 usable satellites or an
            ill-conditioned G.T @ G.
        NonConvergenceError: step norm still above tolerance after the
            iteration cap (includes the step trace for diagnosis).
    """
    obs = epoch.observations
    if len(obs) < 4:
        raise DegenerateGeometryError(f"degenerate geometry: {len(obs)} < 4 satellites")
    sat_pos = np.array([o.sat_position for o in obs], dtype=float)
    rho = np.array([o.pseudorange_m for o in obs], dtype=float)

    state = np.zeros(4)
    state[:3] = (0.0, 0.0, 0.0) if initial_position is None else initial_position

    trace: list[float] = []
    residuals = np.zeros(len(obs))
    g = np.zeros((len(obs), 4))
    for _ in range(_MAX_ITERATIONS):
        g, ranges = _geometry_matrix(sat_pos, state[:3])
        y = rho - (ranges + state[3])
        gtg = g.T @ g
        if np.linalg.cond(gtg) > _COND_LIMIT:
            raise DegenerateGeometryError("degenerate geometry: ill-conditioned normal equations")
        step = np.linalg.solve(gtg, g.T @ y)
        residuals = compute_residuals(y, g, step)
        state += step
        norm = float(np.linalg.norm(step))
        trace.append(norm)
        if norm < _STEP_TOL_M:
            estimate = ReceiverEstimate(tuple(state[:3]), float(state[3]))
            return estimate, residuals, g
    raise NonConvergenceError("least squares did not converge", trace)


def extract_features(epoch: EpochObservation,
                     initial_position: tuple[float, float, float] | None = None) -> list[LabeledSample]:
    """One labeled sample per satellite of the epoch (elevation, C/N0,
    residual from this epoch's joint solve). Labels are copied from truth.
    """
    _, residuals, _ = solve_least_squares(epoch, initial_position)
    samples = []
    for obs, res in zip(epoch.observations, residuals):
        samples.append(LabeledSample(
            features=FeatureVector(obs.elevation_deg, obs.cn0_dbhz, float(res)),
            label=obs.truth_label,
            epoch_index=epoch.epoch_index,
            sat_id=obs.sat_id,
        ))
    return samples


def split_samples(scene: Scene, epochs: list[EpochObservation]) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Geographic train/test split: leading street section trains, the
    contiguous target road evaluates. Row order is (epoch, then sat id).
    """
    midpoint = (scene.street_length / 2.0, 0.0, scene.antenna_height)
    train: list[LabeledSample] = []
    test: list[LabeledSample] = []
    for epoch in epochs:
        dest = test if epoch.epoch_index >= scene.target_start else train
        dest.extend(extract_features(epoch, midpoint))
    return train, test


def samples_to_arrays(samples: list[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    """(n, 3) feature matrix and 0/1 label vector (1 = NLOS)."""
    x = np.array([s.features.as_array() for s in samples])
    y = np.array([1 if s.label == NLOS else 0 for s in samples], dtype=int)
    return x, y


def samples_to_csv(samples: list[LabeledSample]) -> str:
    buf = io.StringIO()
    buf.write("elevation_deg,cn0_dbhz,residual_m,label\n")
    for s in samples:
        f = s.features
        buf.write(f"{f.elevation_deg!r},{f.cn0_dbhz!r},{f.residual_m!r},{s.label}\n")
    return buf.getvalue()


def samples_from_csv(text: str) -> list[LabeledSample]:
    lines = text.strip().splitlines()
    if not lines or lines[0] != "elevation_deg,cn0_dbhz,residual_m,label":
        raise ValueError("feature CSV must start with the documented header")
    samples = []
    for line in lines[1:]:
        el, cn0, res, label = line.split(",")
        if label not in (LOS, NLOS):
            raise ValueError(f"unknown label {label!r}")
        samples.append(LabeledSample(FeatureVector(float(el), float(cn0), float(res)), label))
    return samples
