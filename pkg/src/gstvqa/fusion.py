"""Feature assembly and the support-vector quality regressor.

One spatial index plus the 14 temporal band features form the fused
15-vector; an epsilon-insensitive SVR (linear or RBF kernel) maps fused
vectors to opinion scores. The box-constrained dual QP is solved by
cvxopt's deterministic interior-point method (coordinate-ascent solvers
stall badly on the near-collinear feature sets typical of quality
studies); the multipliers are then snapped onto the active set and the
bias recovered from the KKT conditions, which are verified to a gap
below 1e-3. No randomness anywhere: given the same hyperparameters and
sample order the fit is bit-reproducible.

Features are z-scored per dimension with statistics from the training
set only; constant features are dropped and the drop mask recorded, so
models survive datasets where e.g. every spatial index is identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import cvxopt
import numpy as np

from .errors import ArgumentError, DataError, FitError
from .spatial import SpatialIndex
from .tgreed import TgreedFeatures

__all__ = [
    "GstFeatureVector",
    "SvrHyperparams",
    "SvrModel",
    "LabeledSet",
    "assemble",
    "fit",
    "predict",
    "grid_search",
    "default_grid",
]

_KKT_TOL = 1e-3


@dataclass(frozen=True)
class GstFeatureVector:
    """The fused 15-feature vector: [spatial, 7 bands at the fine scale,
    7 bands at the coarse scale]."""

    spatial: float
    temporal: np.ndarray

    def __post_init__(self) -> None:
        temporal = np.asarray(self.temporal, dtype=np.float64)
        if temporal.shape != (14,):
            raise ArgumentError(f"temporal part must have 14 entries, got {temporal.shape}")
        if not math.isfinite(self.spatial) or not np.all(np.isfinite(temporal)):
            raise ArgumentError("feature vector entries must all be finite")
        temporal.setflags(write=False)
        object.__setattr__(self, "temporal", temporal)

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.spatial], self.temporal])


def assemble(spatial: SpatialIndex, temporal: TgreedFeatures) -> GstFeatureVector:
    """Concatenate one spatial index with the temporal features, fixed order."""
    return GstFeatureVector(spatial=spatial.value, temporal=temporal.values)


@dataclass(frozen=True)
class SvrHyperparams:
    """One grid point: kernel, box constraint, RBF width, tube width."""

    kernel: str
    C: float
    gamma: float | None
    epsilon: float

    def __post_init__(self) -> None:
        if self.kernel not in ("linear", "rbf"):
            raise ArgumentError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "rbf" and (self.gamma is None or self.gamma <= 0):
            raise ArgumentError("rbf kernel needs a positive gamma")
        if self.C <= 0 or self.epsilon < 0:
            raise ArgumentError("need C > 0 and epsilon >= 0")


def default_grid() -> list[SvrHyperparams]:
    """The pinned hyperparameter grid, linear block first (tie-break order)."""
    grid = [
        SvrHyperparams("linear", C, None, eps)
        for C in (0.1, 1.0, 10.0, 100.0)
        for eps in (0.1, 1.0)
    ]
    grid += [
        SvrHyperparams("rbf", C, gamma, eps)
        for C in (0.1, 1.0, 10.0, 100.0)
        for gamma in (1.0 / 15.0, 0.1, 1.0)
        for eps in (0.1, 1.0)
    ]
    return grid


@dataclass(frozen=True)
class LabeledSet:
    """Feature matrix, opinion scores and the owning content of every row."""

    features: np.ndarray
    mos: np.ndarray
    content_ids: tuple

    @classmethod
    def build(cls, features, mos, content_ids) -> "LabeledSet":
        matrix = _to_matrix(features)
        mos = np.asarray(mos, dtype=np.float64)
        ids = tuple(content_ids)
        if len(matrix) != len(mos) or len(mos) != len(ids):
            raise DataError(
                f"row counts disagree: {len(matrix)} features, {len(mos)} scores, "
                f"{len(ids)} content ids"
            )
        return cls(features=matrix, mos=mos, content_ids=ids)


def _to_matrix(features) -> np.ndarray:
    if isinstance(features, np.ndarray) and features.ndim == 2:
        return np.asarray(features, dtype=np.float64)
    rows = [f.as_array() if isinstance(f, GstFeatureVector) else np.asarray(f, float) for f in features]
    if not rows:
        return np.empty((0, 0))
    return np.stack(rows)


def _kernel_matrix(a: np.ndarray, b: np.ndarray, kernel: str, gamma: float | None) -> np.ndarray:
    if kernel == "linear":
        return a @ b.T
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _kkt_scores(
    theta: np.ndarray, u: np.ndarray, z: np.ndarray, C: float, epsilon: float
) -> tuple[float, float]:
    """(max over up-candidates, min over down-candidates) of the KKT scores.

    At the optimum every feasible bias lies in [min, max]; the spread is
    the KKT gap. ``u`` is the kernel expansion without bias. Interior-point
    multipliers sit a hair inside the box, so membership uses a relative
    tolerance rather than strict comparisons.
    """
    margin = 1e-4 * C
    v = z - u
    alpha = np.maximum(theta, 0.0)
    alpha_star = np.maximum(-theta, 0.0)
    up = np.concatenate(
        [
            np.where(alpha < C - margin, v - epsilon, -np.inf),
            np.where(alpha_star > margin, v + epsilon, -np.inf),
        ]
    )
    low = np.concatenate(
        [
            np.where(alpha > margin, v - epsilon, np.inf),
            np.where(alpha_star < C - margin, v + epsilon, np.inf),
        ]
    )
    return float(up.max()), float(low.min())


def _solve_epsilon_svr(
    kmat: np.ndarray, z: np.ndarray, C: float, epsilon: float, tol: float = _KKT_TOL
) -> tuple[np.ndarray, float, int]:
    """Solve the epsilon-SVR dual QP; returns (theta, bias, iterations).

    ``theta[i] = alpha_i - alpha*_i`` so the regression function is
    ``f(x) = sum_i theta_i k(x_i, x) + bias``. The box QP

        min 1/2 [a;a*]' [[K,-K],[-K,K]] [a;a*] + [eps-z; eps+z]' [a;a*]
        st  sum(a - a*) = 0,  0 <= a, a* <= C

    is handed to cvxopt's interior-point solver, multipliers within a
    hair of the box are snapped onto it, and the bias is recovered as
    the midpoint of the feasible KKT interval, whose spread must end up
    below ``tol``.
    """
    l = len(z)
    kmat = np.asarray(kmat, dtype=np.float64)
    # tiny ridge keeps the (rank-deficient) dual Hessian factorizable
    quad = np.block([[kmat, -kmat], [-kmat, kmat]]) + 1e-10 * np.eye(2 * l)
    lin = np.concatenate([epsilon - z, epsilon + z])
    ineq_lhs = np.vstack([-np.eye(2 * l), np.eye(2 * l)])
    ineq_rhs = np.concatenate([np.zeros(2 * l), np.full(2 * l, C)])
    eq_lhs = np.concatenate([np.ones(l), -np.ones(l)])[None, :]
    options = {
        "show_progress": False,
        "abstol": 1e-11,
        "reltol": 1e-11,
        "feastol": 1e-10,
        "maxiters": 200,
    }
    solution = cvxopt.solvers.qp(
        cvxopt.matrix(quad),
        cvxopt.matrix(lin),
        cvxopt.matrix(ineq_lhs),
        cvxopt.matrix(ineq_rhs),
        cvxopt.matrix(eq_lhs),
        cvxopt.matrix([0.0]),
        options=options,
    )
    beta = np.asarray(solution["x"]).ravel()
    theta = beta[:l] - beta[l:]
    # interior-point noise around zero: drop it so non-SVs are genuinely sparse
    theta = np.where(np.abs(theta) < 1e-7 * C, 0.0, theta)
    u = kmat @ theta
    hi, lo = _kkt_scores(theta, u, z, C, epsilon)
    if math.isfinite(hi) and math.isfinite(lo):
        bias = 0.5 * (hi + lo)
        gap = hi - lo
    else:
        # one candidate set is empty (fully saturated box); any feasible bias works
        bias = hi if math.isfinite(hi) else (lo if math.isfinite(lo) else float(np.median(z - u)))
        gap = 0.0
    if gap > tol:
        raise FitError(
            f"SVR dual solve ended with KKT gap {gap:.3e} above tolerance {tol} "
            f"(solver status {solution['status']!r})"
        )
    return theta, float(bias), int(solution["iterations"])


@dataclass(frozen=True)
class SvrModel:
    """A trained regressor plus the normalization it was fitted under."""

    hyperparams: SvrHyperparams
    support_vectors: np.ndarray  # normalized, kept-feature space
    coef: np.ndarray             # theta at the support vectors
    sv_indices: np.ndarray       # training-row index of each support vector
    bias: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    kept: np.ndarray             # per-feature mask, False where training std was 0
    n_features: int

    def normalize(self, matrix: np.ndarray) -> np.ndarray:
        if matrix.shape[1] != self.n_features:
            raise ArgumentError(
                f"expected {self.n_features} features per row, got {matrix.shape[1]}"
            )
        kept = self.kept
        return (matrix[:, kept] - self.feature_mean[kept]) / self.feature_std[kept]

    def predict_matrix(self, matrix: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(matrix)):
            raise ArgumentError("prediction features must be finite")
        normalized = self.normalize(np.asarray(matrix, dtype=np.float64))
        if len(self.coef) == 0:
            return np.full(len(matrix), self.bias)
        kmat = _kernel_matrix(
            normalized, self.support_vectors, self.hyperparams.kernel, self.hyperparams.gamma
        )
        return kmat @ self.coef + self.bias

    def to_json_dict(self) -> dict:
        hp = self.hyperparams
        return {
            "format_version": 1,
            "kernel": hp.kernel,
            "C": hp.C,
            "gamma": hp.gamma,
            "epsilon": hp.epsilon,
            "bias": self.bias,
            "coef": self.coef.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "sv_indices": self.sv_indices.tolist(),
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "kept": [bool(k) for k in self.kept],
            "n_features": self.n_features,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SvrModel":
        if payload.get("format_version") != 1:
            raise DataError(f"unsupported model format {payload.get('format_version')!r}")
        hp = SvrHyperparams(
            kernel=payload["kernel"],
            C=payload["C"],
            gamma=payload["gamma"],
            epsilon=payload["epsilon"],
        )
        n_features = int(payload["n_features"])
        kept = np.asarray(payload["kept"], dtype=bool)
        n_kept = int(kept.sum())
        return cls(
            hyperparams=hp,
            support_vectors=np.asarray(payload["support_vectors"], float).reshape(-1, n_kept),
            coef=np.asarray(payload["coef"], dtype=np.float64),
            sv_indices=np.asarray(payload["sv_indices"], dtype=np.int64),
            bias=float(payload["bias"]),
            feature_mean=np.asarray(payload["feature_mean"], dtype=np.float64),
            feature_std=np.asarray(payload["feature_std"], dtype=np.float64),
            kept=kept,
            n_features=n_features,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SvrModel":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def fit(features, mos, hp: SvrHyperparams) -> SvrModel:
    """Train an epsilon-SVR on fused feature vectors.

    Normalization statistics come from these rows only; the solve is
    deterministic for a fixed row order.
    """
    matrix = _to_matrix(features)
    z = np.asarray(mos, dtype=np.float64)
    if matrix.ndim != 2 or len(matrix) != len(z):
        raise DataError(f"feature/label mismatch: {matrix.shape} vs {z.shape}")
    if len(z) < 2:
        raise DataError("need at least 2 training samples")
    if not np.all(np.isfinite(matrix)) or not np.all(np.isfinite(z)):
        raise DataError("training data contains non-finite values")

    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    kept = std > 0.0
    safe_std = np.where(kept, std, 1.0)
    normalized = (matrix[:, kept] - mean[kept]) / safe_std[kept]

    kmat = _kernel_matrix(normalized, normalized, hp.kernel, hp.gamma)
    theta, bias, _ = _solve_epsilon_svr(kmat, z, hp.C, hp.epsilon)
    sv = np.nonzero(theta != 0.0)[0]
    return SvrModel(
        hyperparams=hp,
        support_vectors=normalized[sv],
        coef=theta[sv],
        sv_indices=sv.astype(np.int64),
        bias=float(bias),
        feature_mean=mean,
        feature_std=safe_std,
        kept=kept,
        n_features=matrix.shape[1],
    )


def predict(model: SvrModel, features) -> float:
    """Score one fused feature vector with a trained model."""
    if isinstance(features, GstFeatureVector):
        row = features.as_array()
    else:
        row = np.asarray(features, dtype=np.float64)
    if row.ndim != 1:
        raise ArgumentError(f"expected a single feature vector, got shape {row.shape}")
    if not np.all(np.isfinite(row)):
        raise ArgumentError("prediction features must be finite")
    return float(model.predict_matrix(row[None, :])[0])


def grid_search(
    train: LabeledSet, val: LabeledSet, grid: list[SvrHyperparams] | None = None
) -> SvrHyperparams:
    """Pick the grid point with the lowest validation RMSE.

    Train and validation sets must be content-disjoint; ties keep the
    earlier grid entry, making the selection deterministic.
    """
    if grid is None:
        grid = default_grid()
    if not grid:
        raise DataError("empty hyperparameter grid")
    if len(train.mos) == 0 or len(val.mos) == 0:
        raise DataError("grid search needs non-empty train and validation sets")
    overlap = set(train.content_ids) & set(val.content_ids)
    if overlap:
        raise DataError(f"train/validation content overlap: {sorted(overlap)!r}")
    best_hp = None
    best_rmse = np.inf
    for hp in grid:
        model = fit(train.features, train.mos, hp)
        pred = model.predict_matrix(val.features)
        rmse = float(np.sqrt(np.mean((pred - val.mos) ** 2)))
        if rmse < best_rmse:
            best_rmse, best_hp = rmse, hp
    return best_hp
