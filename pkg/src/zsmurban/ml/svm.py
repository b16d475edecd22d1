"""RBF-kernel SVM trained by sequential minimal optimization.

The dual is driven to the KKT conditions at the configured tolerance with
Platt's two-heuristic working-set selection, made fully deterministic (the
usual random sweep starts are replaced by a rotating counter). Probabilities
come from a sigmoid fit on cross-validated decision values; inputs are
standardized and the standardization lives in the model.

Internally labels are -1/+1 with +1 = NLOS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["SvmConfig", "SvmModel", "SmoNonConvergenceError", "train_svm_arrays", "kkt_max_violation"]


class SmoNonConvergenceError(RuntimeError):
    """SMO hit its sweep budget before reaching the KKT tolerance."""


@dataclass(frozen=True)
class SvmConfig:
    c: float = 10.0
    gamma: float | None = None  # None -> 1 / (d * var) on standardized inputs
    tol: float = 1e-3
    max_sweeps: int = 8000
    cv_folds: int = 3
    balanced: bool = False
    seed: int = 0


@dataclass
class SvmModel:
    support_vectors: np.ndarray   # (k, d), standardized space
    dual_coef: np.ndarray         # (k,) alpha_i * y_i
    bias: float
    gamma: float
    platt_a: float
    platt_b: float
    standardize_mean: np.ndarray
    standardize_std: np.ndarray

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.standardize_mean) / self.standardize_std
        k = _rbf_kernel(z, self.support_vectors, self.gamma)
        return k @ self.dual_coef + self.bias

    def nlos_probability(self, x: np.ndarray) -> np.ndarray:
        f = self.decision_values(x)
        return _sigmoid_ab(f, self.platt_a, self.platt_b)

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "gamma": self.gamma,
            "platt_a": self.platt_a,
            "platt_b": self.platt_b,
            "standardize_mean": self.standardize_mean.tolist(),
            "standardize_std": self.standardize_std.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SvmModel":
        return cls(
            support_vectors=np.asarray(data["support_vectors"], dtype=float).reshape(-1, len(data["standardize_mean"])),
            dual_coef=np.asarray(data["dual_coef"], dtype=float),
            bias=float(data["bias"]),
            gamma=float(data["gamma"]),
            platt_a=float(data["platt_a"]),
            platt_b=float(data["platt_b"]),
            standardize_mean=np.asarray(data["standardize_mean"], dtype=float),
            standardize_std=np.asarray(data["standardize_std"], dtype=float),
        )


def _rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        (a * a).sum(axis=1)[:, None]
        + (b * b).sum(axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def _sigmoid_ab(f: np.ndarray, a: float, b: float) -> np.ndarray:
    z = a * f + b
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = np.exp(-z[pos]) / (1.0 + np.exp(-z[pos]))
    out[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
    return out


class _Smo:
    """Platt-style SMO on a precomputed kernel with per-sample box bounds."""

    def __init__(self, kernel: np.ndarray, y: np.ndarray, c: np.ndarray, tol: float, max_sweeps: int):
        self.k = kernel
        self.y = y.astype(float)
        self.c = c
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.bias = 0.0
        self.errors = -self.y.copy()  # f(x_i) - y_i with f == 0
        self._cursor = 0

    def _refresh_errors(self) -> None:
        self.errors = (self.alpha * self.y) @ self.k + self.bias - self.y

    def _take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        c1, c2 = self.c[i1], self.c[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if s > 0:
            lo = max(0.0, a1 + a2 - c1)
            hi = min(c2, a1 + a2)
        else:
            lo = max(0.0, a2 - a1)
            hi = min(c2, c1 + a2 - a1)
        if hi - lo < 1e-12:
            return False
        k11, k12, k22 = self.k[i1, i1], self.k[i1, i2], self.k[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 1e-12:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(max(a2_new, lo), hi)
        else:
            # Flat direction: evaluate the dual objective at both ends.
            f1 = y1 * (e1 + self.bias) - a1 * k11 - s * a2 * k12
            f2 = y2 * (e2 + self.bias) - s * a1 * k12 - a2 * k22
            l1 = a1 + s * (a2 - lo)
            h1 = a1 + s * (a2 - hi)
            obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12
            obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12
            if obj_lo < obj_hi - 1e-12:
                a2_new = lo
            elif obj_lo > obj_hi + 1e-12:
                a2_new = hi
            else:
                a2_new = a2
        if abs(a2_new - a2) < 1e-10 * (a2_new + a2 + 1e-10):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        if a1_new < 0.0:
            a2_new += s * a1_new
            a1_new = 0.0
        elif a1_new > c1:
            a2_new += s * (a1_new - c1)
            a1_new = c1

        d1 = a1_new - a1
        d2 = a2_new - a2
        b1 = self.bias - e1 - y1 * d1 * k11 - y2 * d2 * k12
        b2 = self.bias - e2 - y1 * d1 * k12 - y2 * d2 * k22
        if 0.0 < a1_new < c1:
            new_bias = b1
        elif 0.0 < a2_new < c2:
            new_bias = b2
        else:
            new_bias = 0.5 * (b1 + b2)
        db = new_bias - self.bias

        self.errors += y1 * d1 * self.k[i1] + y2 * d2 * self.k[i2] + db
        self.alpha[i1] = a1_new
        self.alpha[i2] = a2_new
        self.bias = new_bias
        return True

    def _examine(self, i2: int) -> bool:
        y2 = self.y[i2]
        a2 = self.alpha[i2]
        e2 = self.errors[i2]
        r2 = e2 * y2
        if not ((r2 < -self.tol and a2 < self.c[i2]) or (r2 > self.tol and a2 > 0.0)):
            return False
        non_bound = np.nonzero((self.alpha > 0.0) & (self.alpha < self.c))[0]
        if len(non_bound) > 1:
            i1 = int(non_bound[np.argmax(np.abs(self.errors[non_bound] - e2))])
            if self._take_step(i1, i2):
                return True
        # Deterministic rotating sweep instead of Platt's random start.
        if len(non_bound):
            start = self._cursor % len(non_bound)
            self._cursor += 1
            for j in range(len(non_bound)):
                if self._take_step(int(non_bound[(start + j) % len(non_bound)]), i2):
                    return True
        start = self._cursor % self.n
        self._cursor += 1
        for j in range(self.n):
            if self._take_step((start + j) % self.n, i2):
                return True
        return False

    def solve(self) -> None:
        examine_all = True
        sweeps = 0
        while sweeps < self.max_sweeps:
            sweeps += 1
            changed = 0
            if examine_all:
                for i in range(self.n):
                    changed += self._examine(i)
            else:
                for i in np.nonzero((self.alpha > 0.0) & (self.alpha < self.c))[0]:
                    changed += self._examine(int(i))
            if examine_all:
                if changed == 0:
                    # Guard against drift in the incremental error cache:
                    # recompute exactly and require one clean full pass.
                    self._refresh_errors()
                    rechanged = sum(self._examine(i) for i in range(self.n))
                    if rechanged == 0:
                        return
                else:
                    examine_all = False
            elif changed == 0:
                examine_all = True
        raise SmoNonConvergenceError(
            f"SMO still changing after {self.max_sweeps} sweeps (tol={self.tol})")


def _fit_platt(decision: np.ndarray, y01: np.ndarray, max_iter: int = 200) -> tuple[float, float]:
    """Sigmoid calibration: robust Newton fit of P = 1/(1+exp(A f + B)).

    Targets are the usual prior-smoothed values so the fit stays proper even
    when one class dominates.
    """
    n = len(y01)
    n1 = int(y01.sum())
    n0 = n - n1
    hi = (n1 + 1.0) / (n1 + 2.0)
    lo = 1.0 / (n0 + 2.0)
    t = np.where(y01 == 1, hi, lo)
    a, b = 0.0, math.log((n0 + 1.0) / (n1 + 1.0))
    sigma = 1e-12

    def objective(av: float, bv: float) -> float:
        z = av * decision + bv
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)),
                                     (t - 1.0) * z + np.log1p(np.exp(z)))))

    best = objective(a, b)
    for _ in range(max_iter):
        p = _sigmoid_ab(decision, a, b)
        d1 = t - p  # dE/dz of the cross-entropy in z = A f + B
        g_a = float(np.sum(decision * d1))
        g_b = float(np.sum(d1))
        if abs(g_a) < 1e-10 and abs(g_b) < 1e-10:
            break
        w = np.maximum(p * (1.0 - p), 1e-12)
        h_aa = float(np.sum(decision * decision * w)) + sigma
        h_bb = float(np.sum(w)) + sigma
        h_ab = float(np.sum(decision * w))
        det = h_aa * h_bb - h_ab * h_ab
        if det <= 0:
            break
        da = -(h_bb * g_a - h_ab * g_b) / det
        db = -(-h_ab * g_a + h_aa * g_b) / det
        step = 1.0
        improved = False
        for _ in range(30):
            cand = objective(a + step * da, b + step * db)
            if cand < best - 1e-12:
                a += step * da
                b += step * db
                best = cand
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return a, b


def kkt_max_violation(kernel: np.ndarray, y: np.ndarray, alpha: np.ndarray,
                      bias: float, c: np.ndarray) -> float:
    """Largest KKT violation of the dual solution, computed from scratch."""
    f = (alpha * y) @ kernel + bias
    margins = y * f
    viol = np.zeros(len(y))
    at_zero = alpha <= 1e-9
    at_c = alpha >= c - 1e-9
    free = ~(at_zero | at_c)
    viol[at_zero] = np.maximum(0.0, 1.0 - margins[at_zero])
    viol[at_c] = np.maximum(0.0, margins[at_c] - 1.0)
    viol[free] = np.abs(margins[free] - 1.0)
    return float(viol.max(initial=0.0))


def _stratified_folds(y01: np.ndarray, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    pos = rng.permutation(np.nonzero(y01 == 1)[0])
    neg = rng.permutation(np.nonzero(y01 == 0)[0])
    out = []
    for k in range(folds):
        out.append(np.sort(np.concatenate([pos[k::folds], neg[k::folds]])))
    return out


def _solve_dual(z: np.ndarray, y: np.ndarray, cfg: SvmConfig, gamma: float,
                c_vec: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    kernel = _rbf_kernel(z, z, gamma)
    smo = _Smo(kernel, y, c_vec, cfg.tol, cfg.max_sweeps)
    smo.solve()
    return smo.alpha, smo.bias, kernel


def train_svm_arrays(x: np.ndarray, y01: np.ndarray, cfg: SvmConfig) -> SvmModel:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-9, 1.0, std)
    z = (x - mean) / std
    y = np.where(y01 == 1, 1.0, -1.0)
    d = x.shape[1]
    gamma = cfg.gamma if cfg.gamma is not None else 1.0 / (d * max(float(z.var()), 1e-12))

    if cfg.balanced:
        n = len(y01)
        n_pos = max(int(y01.sum()), 1)
        n_neg = max(n - int(y01.sum()), 1)
        c_of = {1: cfg.c * n / (2.0 * n_pos), 0: cfg.c * n / (2.0 * n_neg)}
        c_vec_full = np.where(y01 == 1, c_of[1], c_of[0])
    else:
        c_vec_full = np.full(len(y01), cfg.c)

    # Cross-validated decision values for an unbiased sigmoid fit; fall back
    # to training margins when a class is too small to stratify.
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 0x5F]))
    counts = (int((y01 == 0).sum()), int((y01 == 1).sum()))
    cv_decisions = np.zeros(len(y01))
    if min(counts) >= cfg.cv_folds and cfg.cv_folds >= 2:
        for fold in _stratified_folds(y01, cfg.cv_folds, rng):
            train_mask = np.ones(len(y01), dtype=bool)
            train_mask[fold] = False
            zi, yi = z[train_mask], y[train_mask]
            alpha_i, bias_i, _ = _solve_dual(zi, yi, cfg, gamma, c_vec_full[train_mask])
            k_cross = _rbf_kernel(z[fold], zi, gamma)
            cv_decisions[fold] = k_cross @ (alpha_i * yi) + bias_i
        platt_a, platt_b = _fit_platt(cv_decisions, y01)
        final_alpha, final_bias, _ = _solve_dual(z, y, cfg, gamma, c_vec_full)
    else:
        final_alpha, final_bias, kernel = _solve_dual(z, y, cfg, gamma, c_vec_full)
        train_decisions = kernel @ (final_alpha * y) + final_bias
        platt_a, platt_b = _fit_platt(train_decisions, y01)

    keep = final_alpha > 1e-9
    return SvmModel(
        support_vectors=z[keep],
        dual_coef=(final_alpha * y)[keep],
        bias=float(final_bias),
        gamma=float(gamma),
        platt_a=float(platt_a),
        platt_b=float(platt_b),
        standardize_mean=mean,
        standardize_std=std,
    )
