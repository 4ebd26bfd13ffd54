"""Spatial quality indices for the fusion front end.

Built-in single-scale SSIM and five-scale MS-SSIM with the conventional
settings (11x11 Gaussian window, sigma 1.5, 8-bit stabilizers, valid-mode
windows, published scale exponents), applied per frame at native
resolution and averaged over time. Lower-rate distorted videos are first
brought to the reference rate by frame duplication.

Scores from models this package deliberately does not reimplement
(ST-RRED, SpEED, VMAF, ...) enter through :func:`import_external_score`
or a CSV of precomputed values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from .errors import ArgumentError, DataError, DimensionError
from .video_io import PlanarVideo, frame_duplicate_upsample

__all__ = [
    "SpatialIndex",
    "ExternalScore",
    "ssim_frame",
    "msssim_frame",
    "spatial_index",
    "import_external_score",
    "load_external_scores",
    "SSIM_WINDOW",
    "MSSSIM_WEIGHTS",
]

_K1, _K2 = 0.01, 0.03
_DATA_RANGE = 255.0
_C1 = (_K1 * _DATA_RANGE) ** 2
_C2 = (_K2 * _DATA_RANGE) ** 2

#: Published per-scale exponents for 5-scale MS-SSIM.
MSSSIM_WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])
MSSSIM_WEIGHTS.setflags(write=False)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    window = np.outer(g, g)
    return window / window.sum()

#: 11x11 unit-sum Gaussian window shared by both metrics.
SSIM_WINDOW = _gaussian_window()
SSIM_WINDOW.setflags(write=False)


@dataclass(frozen=True)
class SpatialIndex:
    """One spatial score for a (reference, distorted) pair."""

    model_name: str
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ArgumentError(f"spatial index for {self.model_name!r} must be finite")


@dataclass(frozen=True)
class ExternalScore:
    """One row of an externally computed score table."""

    ref_id: str
    dist_id: str
    model_name: str
    score: float


def _filter_valid(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    # window is symmetric, so convolution equals correlation
    return convolve2d(img, window, mode="valid")


def _ssim_maps(ref: np.ndarray, dist: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Luminance and contrast-structure maps over all valid 11x11 windows."""
    x = np.asarray(ref, dtype=np.float64)
    y = np.asarray(dist, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"frame shapes differ: {x.shape} vs {y.shape}")
    if x.ndim != 2 or min(x.shape) < SSIM_WINDOW.shape[0]:
        raise DimensionError(
            f"frames must be at least {SSIM_WINDOW.shape[0]}x{SSIM_WINDOW.shape[0]}, got {x.shape}"
        )
    mu_x = _filter_valid(x, SSIM_WINDOW)
    mu_y = _filter_valid(y, SSIM_WINDOW)
    var_x = _filter_valid(x * x, SSIM_WINDOW) - mu_x * mu_x
    var_y = _filter_valid(y * y, SSIM_WINDOW) - mu_y * mu_y
    cov = _filter_valid(x * y, SSIM_WINDOW) - mu_x * mu_y
    lum = (2.0 * mu_x * mu_y + _C1) / (mu_x * mu_x + mu_y * mu_y + _C1)
    cs = (2.0 * cov + _C2) / (var_x + var_y + _C2)
    return lum, cs


def ssim_frame(ref, dist) -> float:
    """Mean single-scale SSIM between two equally sized luma planes."""
    lum, cs = _ssim_maps(ref, dist)
    return float((lum * cs).mean())


def _halve(img: np.ndarray) -> np.ndarray:
    """Low-pass dyadic downsampling: 2x2 block mean, odd trailing edge cropped."""
    h, w = (img.shape[0] // 2) * 2, (img.shape[1] // 2) * 2
    c = img[:h, :w]
    return 0.25 * (c[0::2, 0::2] + c[1::2, 0::2] + c[0::2, 1::2] + c[1::2, 1::2])


def _signed_power(value: float, exponent: float) -> float:
    # rare negative contrast terms keep their sign instead of going NaN
    return math.copysign(abs(value) ** exponent, value)


def msssim_frame(ref, dist) -> float:
    """Five-scale MS-SSIM with the conventional exponents.

    Contrast-structure means are taken at every scale, the luminance term
    only at the coarsest; frames must allow 5 dyadic scales with an 11-tap
    window (>= 176x176).
    """
    x = np.asarray(ref, dtype=np.float64)
    y = np.asarray(dist, dtype=np.float64)
    n_scales = len(MSSSIM_WEIGHTS)
    min_dim = SSIM_WINDOW.shape[0] * 2 ** (n_scales - 1)
    if x.ndim != 2 or x.shape != y.shape or min(x.shape) < min_dim:
        raise DimensionError(
            f"MS-SSIM needs equal frames of at least {min_dim}x{min_dim}, got "
            f"{x.shape} vs {y.shape}"
        )
    score = 1.0
    for level, weight in enumerate(MSSSIM_WEIGHTS):
        lum, cs = _ssim_maps(x, y)
        if level == n_scales - 1:
            score *= _signed_power(float((lum * cs).mean()), weight)
        else:
            score *= _signed_power(float(cs.mean()), weight)
            x, y = _halve(x), _halve(y)
    return score


_FRAME_METRICS = {"ssim": ssim_frame, "msssim": msssim_frame}


def spatial_index(
    reference: PlanarVideo, distorted: PlanarVideo, model: str = "ssim"
) -> SpatialIndex:
    """Temporally averaged per-frame score after duplication alignment.

    The distorted video must not exceed the reference rate; equal rates
    skip alignment entirely. Frame pairs beyond the shorter stream (only
    possible through uneven rate rounding) are ignored.
    """
    if model not in _FRAME_METRICS:
        raise ArgumentError(f"unknown spatial model {model!r} (built-ins: ssim, msssim)")
    if (reference.width, reference.height) != (distorted.width, distorted.height):
        raise DimensionError(
            f"spatial dims differ: {reference.width}x{reference.height} vs "
            f"{distorted.width}x{distorted.height}"
        )
    if distorted.fps > reference.fps:
        raise ArgumentError(
            f"distorted fps {distorted.fps} exceeds reference fps {reference.fps}"
        )
    aligned = frame_duplicate_upsample(distorted, reference.fps)
    n = min(reference.n_frames, aligned.n_frames)
    metric = _FRAME_METRICS[model]
    scores = [metric(reference.frames[i], aligned.frames[i]) for i in range(n)]
    return SpatialIndex(model_name=model, value=float(np.mean(scores)))


def import_external_score(model_name: str, value: float) -> SpatialIndex:
    """Wrap an externally computed model score for fusion."""
    value = float(value)
    if not math.isfinite(value):
        raise ArgumentError(f"external score for {model_name!r} is not finite: {value}")
    return SpatialIndex(model_name=model_name, value=value)


def load_external_scores(path: str | Path) -> list[ExternalScore]:
    """Read a (ref_id, dist_id, model_name, score) CSV of precomputed scores."""
    rows: list[ExternalScore] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"ref_id", "dist_id", "model_name", "score"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(f"{path}: external score CSV needs columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                score = float(row["score"])
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad score {row['score']!r}") from exc
            if not math.isfinite(score):
                raise DataError(f"{path}:{lineno}: non-finite score")
            rows.append(
                ExternalScore(
                    ref_id=row["ref_id"],
                    dist_id=row["dist_id"],
                    model_name=row["model_name"],
                    score=score,
                )
            )
    return rows
