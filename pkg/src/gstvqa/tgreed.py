"""Temporal entropic-difference features.

Pipeline per video and spatial scale ``s``: average-pool frames by
``2**s``, run the temporal packet filter bank, tile every subband frame
into non-overlapping 5x5 patches (row-major, trailing partials dropped)
and take each patch's variance-scaled GGD entropy. Three such entropy
fields -- reference R, pseudo-reference PR (R subsampled to the distorted
frame rate) and distorted D -- combine into one scalar per band:

    mean over time of  mean over patches of
        | (1 + |eD - ePR|) * (eR + 1) / (ePR + 1)  -  1 |

The ratio factor depends only on the frame-rate change (D never enters
it); the difference factor carries everything else. D and PR are aligned
to R's frame count by frame duplication before filtering so all three
fields share one (band, patch, time) shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import ggd
from .errors import ArgumentError, DimensionError, ShapeError
from .filterbank import FilterBankConfig, decompose
from .video_io import (
    PlanarVideo,
    frame_duplicate_upsample,
    spatial_downsample,
    temporal_subsample,
)

__all__ = [
    "PATCH_SIZE",
    "DEFAULT_SCALES",
    "EntropyField",
    "TgreedFeatures",
    "build_pseudo_reference",
    "entropy_field",
    "tgreed_band",
    "tgreed_ratio_term",
    "compute_tgreed",
]

PATCH_SIZE = 5

#: Spatial scale exponents used for the published 14-feature layout.
DEFAULT_SCALES = (4, 5)


@dataclass(frozen=True)
class EntropyField:
    """Variance-scaled entropies of one video at one scale.

    ``eps`` and ``sigma2`` are indexed (band k-1, patch p, time t) with
    patches in row-major frame order; ``grid`` is the (rows, cols) patch
    layout of one frame.
    """

    eps: np.ndarray
    sigma2: np.ndarray
    grid: tuple[int, int]
    scale: int

    def __post_init__(self) -> None:
        for name in ("eps", "sigma2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.eps.shape != self.sigma2.shape or self.eps.ndim != 3:
            raise ShapeError(f"inconsistent field shapes {self.eps.shape} / {self.sigma2.shape}")


@dataclass(frozen=True)
class TgreedFeatures:
    """Per-band temporal features, scale-major then band-minor.

    ``values[i*7 + (k-1)]`` is band k at ``scales[i]``; every entry is
    non-negative by construction.
    """

    values: np.ndarray
    scales: tuple[int, ...] = DEFAULT_SCALES

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (7 * len(self.scales),):
            raise ArgumentError(
                f"expected {7 * len(self.scales)} feature values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ArgumentError("temporal features must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "scales", tuple(int(s) for s in self.scales))

    def by_scale(self) -> dict[str, list[float]]:
        """JSON-friendly view: {"scale4": [7 floats], "scale5": [7 floats]}."""
        return {
            f"scale{s}": [float(x) for x in self.values[7 * i : 7 * (i + 1)]]
            for i, s in enumerate(self.scales)
        }


def build_pseudo_reference(reference: PlanarVideo, distorted_fps: Fraction | int) -> PlanarVideo:
    """Subsample the reference to the distorted frame rate (identity when equal)."""
    target = Fraction(distorted_fps)
    if target > reference.fps:
        raise ArgumentError(
            f"distorted fps {target} exceeds reference fps {reference.fps}"
        )
    return temporal_subsample(reference, target)


def _patch_moments(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Biased centered variance and kurtosis of every 5x5 patch.

    ``coeffs`` is one subband volume (T, h, w); returns (P, T) arrays with
    patches enumerated row-major within each frame.
    """
    t_len, height, width = coeffs.shape
    rows, cols = height // PATCH_SIZE, width // PATCH_SIZE
    tiles = coeffs[:, : rows * PATCH_SIZE, : cols * PATCH_SIZE]
    tiles = tiles.reshape(t_len, rows, PATCH_SIZE, cols, PATCH_SIZE)
    tiles = tiles.transpose(0, 1, 3, 2, 4).reshape(t_len, rows * cols, PATCH_SIZE * PATCH_SIZE)
    centered = tiles - tiles.mean(axis=2, keepdims=True)
    m2 = np.mean(centered**2, axis=2)
    m4 = np.mean(centered**4, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        kurt = np.where(m2 > 0.0, m4 / (m2 * m2), np.nan)
    return m2.T, kurt.T


def entropy_field(
    v: PlanarVideo, s: int, cfg: FilterBankConfig = FilterBankConfig()
) -> EntropyField:
    """Compute the (7, P, T) variance-scaled entropy field of a video at scale ``s``."""
    small = spatial_downsample(v, s)
    rows, cols = small.height // PATCH_SIZE, small.width // PATCH_SIZE
    if rows < 1 or cols < 1:
        raise DimensionError(
            f"{v.width}x{v.height} video leaves no {PATCH_SIZE}x{PATCH_SIZE} patch "
            f"after downsampling by 2^{s}"
        )
    subbands = decompose(small, cfg)
    eps_bands = []
    var_bands = []
    for sb in subbands:
        m2, kurt = _patch_moments(sb.coeffs)
        eps_bands.append(ggd.scaled_entropy_from_moments(m2, kurt))
        var_bands.append(m2)
    return EntropyField(
        eps=np.stack(eps_bands), sigma2=np.stack(var_bands), grid=(rows, cols), scale=s
    )


def tgreed_ratio_term(eps_ref: np.ndarray, eps_pseudo: np.ndarray) -> np.ndarray:
    """The frame-rate factor (eR + 1)/(ePR + 1); independent of the distorted video."""
    eps_ref = np.asarray(eps_ref, dtype=np.float64)
    eps_pseudo = np.asarray(eps_pseudo, dtype=np.float64)
    if eps_ref.shape != eps_pseudo.shape:
        raise ShapeError(f"shape mismatch {eps_ref.shape} vs {eps_pseudo.shape}")
    return (eps_ref + 1.0) / (eps_pseudo + 1.0)


def tgreed_band(eps_ref, eps_pseudo, eps_dist) -> float:
    """Weighted entropic difference of one band, pooled over patches then time.

    The three slices must share a (P, T) shape; scalars and 1-D inputs are
    promoted for convenience in hand calculations.
    """
    e_r = np.atleast_2d(np.asarray(eps_ref, dtype=np.float64))
    e_pr = np.atleast_2d(np.asarray(eps_pseudo, dtype=np.float64))
    e_d = np.atleast_2d(np.asarray(eps_dist, dtype=np.float64))
    if not (e_r.shape == e_pr.shape == e_d.shape):
        raise ShapeError(
            f"entropy slices disagree: {e_r.shape}, {e_pr.shape}, {e_d.shape}"
        )
    ratio = tgreed_ratio_term(e_r, e_pr)
    per_entry = np.abs((1.0 + np.abs(e_d - e_pr)) * ratio - 1.0)
    return float(per_entry.mean(axis=0).mean())


def _truncate(v: PlanarVideo, n: int) -> PlanarVideo:
    return v if v.n_frames == n else PlanarVideo(frames=v.frames[:n], fps=v.fps)


def compute_tgreed(
    reference: PlanarVideo,
    distorted: PlanarVideo,
    cfg: FilterBankConfig = FilterBankConfig(),
    scales: tuple[int, ...] = DEFAULT_SCALES,
) -> TgreedFeatures:
    """Full temporal feature vector for one (reference, distorted) pair.

    The pseudo-reference is built by temporal subsampling; PR and D are
    then duplicated back up to the reference rate (and all three streams
    truncated to a common frame count, which differs only when rate
    ratios round unevenly) so the entropy fields align sample-for-sample.
    """
    if (reference.width, reference.height) != (distorted.width, distorted.height):
        raise ArgumentError(
            f"spatial dims differ: {reference.width}x{reference.height} vs "
            f"{distorted.width}x{distorted.height}"
        )
    if distorted.fps > reference.fps:
        raise ArgumentError(
            f"distorted fps {distorted.fps} exceeds reference fps {reference.fps}"
        )
    same_rate = distorted.fps == reference.fps
    pseudo = build_pseudo_reference(reference, distorted.fps)
    dist_aligned = frame_duplicate_upsample(distorted, reference.fps)
    pseudo_aligned = frame_duplicate_upsample(pseudo, reference.fps)
    n = min(reference.n_frames, dist_aligned.n_frames, pseudo_aligned.n_frames)
    ref_t = _truncate(reference, n)
    dist_t = _truncate(dist_aligned, n)
    pseudo_t = _truncate(pseudo_aligned, n)

    values = []
    for s in scales:
        field_ref = entropy_field(ref_t, s, cfg)
        field_pseudo = field_ref if same_rate else entropy_field(pseudo_t, s, cfg)
        field_dist = entropy_field(dist_t, s, cfg)
        for k in range(7):
            values.append(
                tgreed_band(field_ref.eps[k], field_pseudo.eps[k], field_dist.eps[k])
            )
    return TgreedFeatures(values=np.asarray(values), scales=tuple(scales))
