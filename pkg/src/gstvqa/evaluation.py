"""Evaluation protocol: correlation metrics, content-disjoint splits, trials.

Rank correlations are computed in-repo (mid-rank Pearson for Spearman,
Knight's O(n log n) merge count for Kendall tau-b) so the test suite can
check them against independent brute-force pair enumeration. PLCC and
RMSE are, by default, computed after fitting a monotone four-parameter
logistic from predictions to opinion scores (standard practice for
quality models whose raw outputs are nonlinearly related to scores);
non-convergence falls back to raw values and flags the trial.

The repeated-trials driver re-splits the dataset per trial with an RNG
stream derived from (master seed, trial index), grid-searches the SVR on
the validation portion, fits on the training portion, scores the test
portion, and reports per-trial metrics plus their medians.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.optimize import curve_fit

from .errors import DataError, FitError
from .fusion import LabeledSet, SvrHyperparams, default_grid, fit, grid_search

__all__ = [
    "ManifestRow",
    "DatasetManifest",
    "TrialResult",
    "EvalReport",
    "PlccRmseResult",
    "srocc",
    "krocc",
    "plcc_rmse",
    "split_by_content",
    "run_trials",
]


# --------------------------------------------------------------------------
# rank metrics
# --------------------------------------------------------------------------

def _validated_pair(x, y, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
        raise DataError(f"need equal-length 1-D vectors, got shapes {x.shape}, {y.shape}")
    if len(x) < min_len:
        raise DataError(f"need at least {min_len} points, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("correlation inputs must be finite")
    return x, y


def _midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average of their positions."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise DataError("zero-variance input, correlation undefined")
    return float(xc @ yc) / denom


def srocc(x, y) -> float:
    """Spearman rank correlation: Pearson correlation of mid-ranks."""
    x, y = _validated_pair(x, y, min_len=3)
    return _pearson(_midranks(x), _midranks(y))


def _count_inversions(values: list[float]) -> int:
    """Strict inversions via merge sort (pairs i<j with values[i] > values[j])."""
    if len(values) <= 1:
        return 0
    mid = len(values) // 2
    left, right = values[:mid], values[mid:]
    count = _count_inversions(left) + _count_inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            count += len(left) - i
            merged.append(right[j])
            j += 1
    values[:] = merged + left[i:] + right[j:]
    return count


def _tie_pair_count(sorted_vals: np.ndarray) -> int:
    total = 0
    i = 0
    while i < len(sorted_vals):
        j = i
        while j + 1 < len(sorted_vals) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        run = j - i + 1
        total += run * (run - 1) // 2
        i = j + 1
    return total


def krocc(x, y) -> float:
    """Kendall tau-b, tie-corrected, via Knight's merge-count algorithm."""
    x, y = _validated_pair(x, y, min_len=3)
    n = len(x)
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    n0 = n * (n - 1) // 2
    n1 = _tie_pair_count(xs)
    n2 = _tie_pair_count(np.sort(y))
    joint = xs + 1j * ys  # runs of equal (x, y) pairs survive the lexsort contiguously
    n3 = _tie_pair_count(joint)
    discordant = _count_inversions(list(ys))
    denom = math.sqrt(float(n0 - n1) * float(n0 - n2))
    if denom == 0.0:
        raise DataError("zero-variance input, correlation undefined")
    s = (n0 - n1 - n2 + n3) - 2 * discordant
    return s / denom


# --------------------------------------------------------------------------
# PLCC / RMSE with optional logistic mapping
# --------------------------------------------------------------------------

class PlccRmseResult(NamedTuple):
    plcc: float
    rmse: float
    logistic_fallback: bool  # True when the logistic fit failed and raw values were used


def _logistic4(x, top, bottom, center, width):
    return bottom + (top - bottom) / (1.0 + np.exp(-(x - center) / width))


def plcc_rmse(pred, mos, fit_logistic: bool = True) -> PlccRmseResult:
    """Pearson correlation and RMSE of predictions against opinion scores.

    With ``fit_logistic`` a monotone 4-parameter logistic pred->mos map
    is least-squares fitted first; if the fit does not converge the raw
    values are used and the fallback flag is set.
    """
    min_len = 5 if fit_logistic else 3
    pred, mos = _validated_pair(pred, mos, min_len=min_len)
    mapped = pred
    fallback = False
    if fit_logistic:
        try:
            mapped = _fit_logistic(pred, mos)
        except FitError:
            mapped = pred
            fallback = True
    plcc = _pearson(mapped, mos)
    rmse = float(np.sqrt(np.mean((mapped - mos) ** 2)))
    return PlccRmseResult(plcc=plcc, rmse=rmse, logistic_fallback=fallback)


def _fit_logistic(pred: np.ndarray, mos: np.ndarray) -> np.ndarray:
    spread = float(pred.std())
    if spread == 0.0 or float(mos.std()) == 0.0:
        raise FitError("degenerate data for logistic fit")
    p0 = [float(mos.max()), float(mos.min()), float(np.median(pred)), spread / 4.0]
    try:
        with np.errstate(over="ignore"):
            params, _ = curve_fit(_logistic4, pred, mos, p0=p0, method="lm", maxfev=20000)
            mapped = _logistic4(pred, *params)
    except (RuntimeError, ValueError, TypeError) as exc:
        raise FitError(f"logistic fit failed: {exc}") from exc
    if not np.all(np.isfinite(mapped)) or float(np.std(mapped)) == 0.0:
        raise FitError("logistic fit produced a degenerate mapping")
    return mapped


# --------------------------------------------------------------------------
# dataset manifest and splits
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestRow:
    pair_id: str
    ref_path: str
    dist_path: str
    dist_fps: Fraction
    content_id: str
    mos: float
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetManifest:
    """All (reference, distorted) pairs of a study, one row per pair.

    Every distorted version of one source shares a ``content_id``; splits
    operate on contents so no source ever straddles subsets.
    """

    rows: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        seen = set()
        for row in self.rows:
            if row.pair_id in seen:
                raise DataError(f"duplicate pair_id {row.pair_id!r} in manifest")
            seen.add(row.pair_id)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def content_ids(self) -> list:
        out, seen = [], set()
        for row in self.rows:
            if row.content_id not in seen:
                seen.add(row.content_id)
                out.append(row.content_id)
        return out

    @classmethod
    def from_csv(cls, path: str | Path) -> "DatasetManifest":
        required = ["pair_id", "ref_path", "dist_path", "dist_fps", "content_id", "mos"]
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or any(c not in reader.fieldnames for c in required):
                raise DataError(f"{path}: manifest needs columns {required}")
            for lineno, raw in enumerate(reader, start=2):
                try:
                    fps = Fraction(raw["dist_fps"])
                    mos = float(raw["mos"])
                except (ValueError, ZeroDivisionError, TypeError) as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
                extras = {}
                for key, value in raw.items():
                    if key in required or key is None:
                        continue
                    try:
                        extras[key] = float(value)
                    except (TypeError, ValueError):
                        extras[key] = value
                rows.append(
                    ManifestRow(
                        pair_id=raw["pair_id"],
                        ref_path=raw["ref_path"],
                        dist_path=raw["dist_path"],
                        dist_fps=fps,
                        content_id=raw["content_id"],
                        mos=mos,
                        extras=extras,
                    )
                )
        return cls(rows=rows)


def split_by_content(
    manifest: DatasetManifest, fractions: tuple[float, float, float], seed: int
) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Shuffle contents with a seeded RNG and cut them into three subsets.

    Fractions apply to the content count (not the pair count); every pair
    of a content travels with it. Deterministic for a given seed.
    """
    if len(fractions) != 3:
        raise DataError(f"need 3 fractions, got {len(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f < 0 for f in fractions):
        raise DataError(f"fractions must be non-negative and sum to 1, got {fractions}")
    contents = sorted(manifest.content_ids)
    n = len(contents)
    rng = np.random.default_rng(seed)
    shuffled = [contents[i] for i in rng.permutation(n)]
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_train, n_val = max(n_train, 1), max(n_val, 1)
    n_test = n - n_train - n_val
    if n_test < 1:
        raise DataError(f"{n} contents cannot fill three subsets with fractions {fractions}")
    groups = (
        set(shuffled[:n_train]),
        set(shuffled[n_train : n_train + n_val]),
        set(shuffled[n_train + n_val :]),
    )
    return tuple(
        DatasetManifest(rows=[r for r in manifest.rows if r.content_id in group])
        for group in groups
    )


def _two_way_split(
    manifest: DatasetManifest, fractions: tuple[float, float], seed: int
) -> tuple[DatasetManifest, DatasetManifest]:
    """Content-disjoint train/test cut used by the legacy 80/20 protocol."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions must sum to 1, got {fractions}")
    contents = sorted(manifest.content_ids)
    n = len(contents)
    rng = np.random.default_rng(seed)
    shuffled = [contents[i] for i in rng.permutation(n)]
    n_train = min(max(int(round(fractions[0] * n)), 1), n - 1)
    train_set = set(shuffled[:n_train])
    train = DatasetManifest(rows=[r for r in manifest.rows if r.content_id in train_set])
    test = DatasetManifest(rows=[r for r in manifest.rows if r.content_id not in train_set])
    if len(train) == 0 or len(test) == 0:
        raise DataError("empty subset in two-way split")
    return train, test


# --------------------------------------------------------------------------
# repeated trials
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialResult:
    trial: int
    srocc: float
    krocc: float
    plcc: float
    rmse: float
    logistic_fallback: bool
    hyperparams: SvrHyperparams
    per_rate: dict | None = None

    def to_json_dict(self) -> dict:
        hp = self.hyperparams
        out = {
            "trial": self.trial,
            "srocc": self.srocc,
            "krocc": self.krocc,
            "plcc": self.plcc,
            "rmse": self.rmse,
            "logistic_fallback": self.logistic_fallback,
            "hyperparams": {
                "kernel": hp.kernel,
                "C": hp.C,
                "gamma": hp.gamma,
                "epsilon": hp.epsilon,
            },
        }
        if self.per_rate is not None:
            out["per_rate"] = self.per_rate
        return out


@dataclass(frozen=True)
class EvalReport:
    n_trials: int
    seed: int
    fractions: tuple
    fit_logistic: bool
    trials: tuple
    median: dict
    per_rate_median: dict | None = None

    def to_json_dict(self) -> dict:
        out = {
            "n_trials": self.n_trials,
            "seed": self.seed,
            "fractions": list(self.fractions),
            "fit_logistic": self.fit_logistic,
            "median": self.median,
            "trials": [t.to_json_dict() for t in self.trials],
        }
        if self.per_rate_median is not None:
            out["per_rate_median"] = self.per_rate_median
        return out


def _trial_seed(master_seed: int, trial: int, stream: int = 0) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial, stream))
    return int(ss.generate_state(1, np.uint64)[0])


def _labeled_set(manifest: DatasetManifest, features: dict) -> LabeledSet:
    rows = manifest.rows
    matrix = [features[r.pair_id] for r in rows]
    return LabeledSet.build(
        features=matrix, mos=[r.mos for r in rows], content_ids=[r.content_id for r in rows]
    )


def _rate_breakdown(test: DatasetManifest, pred: np.ndarray, fit_logistic: bool) -> dict:
    groups: dict[str, list[int]] = {}
    for idx, row in enumerate(test.rows):
        groups.setdefault(str(row.dist_fps), []).append(idx)
    breakdown = {}
    for rate in sorted(groups, key=lambda r: Fraction(r)):
        idx = groups[rate]
        entry: dict = {"n": len(idx)}
        mos = np.array([test.rows[i].mos for i in idx])
        sub_pred = pred[idx]
        if len(idx) >= max(3, 5 if fit_logistic else 3) and len(set(mos)) > 1:
            try:
                pr = plcc_rmse(sub_pred, mos, fit_logistic)
                entry.update(
                    srocc=srocc(sub_pred, mos),
                    krocc=krocc(sub_pred, mos),
                    plcc=pr.plcc,
                    rmse=pr.rmse,
                )
            except DataError:
                pass  # degenerate slice: row stays metric-less but keeps its count
        breakdown[rate] = entry
    return breakdown


def run_trials(
    manifest: DatasetManifest,
    features: dict,
    n_trials: int,
    seed: int,
    fractions: tuple = (0.7, 0.15, 0.15),
    grid: list[SvrHyperparams] | None = None,
    fit_logistic: bool = True,
    per_rate: bool = False,
) -> EvalReport:
    """Repeat split / select / fit / test and report per-trial medians.

    ``features`` maps pair_id to a fused feature vector. Three fractions
    run the train/val/test protocol; two fractions run the legacy
    train/test protocol, carving the validation contents for hyperparameter
    selection out of the training portion (final fit uses all of it).
    """
    if n_trials < 1:
        raise DataError("need at least one trial")
    missing = [r.pair_id for r in manifest.rows if r.pair_id not in features]
    if missing:
        raise DataError(f"features missing for pairs: {missing}")
    if grid is None:
        grid = default_grid()

    trials = []
    for t in range(n_trials):
        split_seed = _trial_seed(seed, t)
        if len(fractions) == 3:
            train_m, val_m, test_m = split_by_content(manifest, tuple(fractions), split_seed)
            fit_m = train_m
        elif len(fractions) == 2:
            fit_m, test_m = _two_way_split(manifest, tuple(fractions), split_seed)
            train_m, val_m, _ = _inner_selection_split(fit_m, _trial_seed(seed, t, stream=1))
        else:
            raise DataError(f"fractions must have 2 or 3 entries, got {len(fractions)}")

        train_set = _labeled_set(train_m, features)
        val_set = _labeled_set(val_m, features)
        hp = grid_search(train_set, val_set, grid)
        fit_set = _labeled_set(fit_m, features)
        model = fit(fit_set.features, fit_set.mos, hp)
        test_set = _labeled_set(test_m, features)
        pred = model.predict_matrix(test_set.features)
        pr = plcc_rmse(pred, test_set.mos, fit_logistic)
        trials.append(
            TrialResult(
                trial=t,
                srocc=srocc(pred, test_set.mos),
                krocc=krocc(pred, test_set.mos),
                plcc=pr.plcc,
                rmse=pr.rmse,
                logistic_fallback=pr.logistic_fallback,
                hyperparams=hp,
                per_rate=_rate_breakdown(test_m, pred, fit_logistic) if per_rate else None,
            )
        )

    median = {
        name: float(np.median([getattr(t, name) for t in trials]))
        for name in ("srocc", "krocc", "plcc", "rmse")
    }
    per_rate_median = _median_per_rate(trials) if per_rate else None
    return EvalReport(
        n_trials=n_trials,
        seed=seed,
        fractions=tuple(fractions),
        fit_logistic=fit_logistic,
        trials=tuple(trials),
        median=median,
        per_rate_median=per_rate_median,
    )


def _inner_selection_split(
    fit_m: DatasetManifest, seed: int
) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Carve validation contents out of the training portion (2-way protocol)."""
    contents = sorted(fit_m.content_ids)
    if len(contents) < 2:
        raise DataError("two-way protocol needs at least 2 training contents")
    rng = np.random.default_rng(seed)
    shuffled = [contents[i] for i in rng.permutation(len(contents))]
    n_val = max(1, int(round(0.15 * len(contents))))
    val_ids = set(shuffled[:n_val])
    train = DatasetManifest(rows=[r for r in fit_m.rows if r.content_id not in val_ids])
    val = DatasetManifest(rows=[r for r in fit_m.rows if r.content_id in val_ids])
    return train, val, fit_m


def _median_per_rate(trials: list) -> dict:
    rates: dict[str, dict[str, list[float]]] = {}
    counts: dict[str, list[int]] = {}
    for trial in trials:
        if not trial.per_rate:
            continue
        for rate, entry in trial.per_rate.items():
            counts.setdefault(rate, []).append(entry["n"])
            for name in ("srocc", "krocc", "plcc", "rmse"):
                if name in entry:
                    rates.setdefault(rate, {}).setdefault(name, []).append(entry[name])
    out = {}
    for rate in sorted(counts, key=lambda r: Fraction(r)):
        entry: dict = {"median_n": float(np.median(counts[rate]))}
        for name, values in rates.get(rate, {}).items():
            entry[name] = float(np.median(values))
        out[rate] = entry
    return out
