"""Temporal band-pass decomposition via a 3-level bior2.2 wavelet packet.

Every pixel's time series is expanded independently into the 8 terminal
packet nodes of a three-level cascade of the biorthogonal-2.2 analysis
pair (filter, then keep every second sample). The pure low-pass terminal
node carries the DC content and is dropped; the remaining 7 band-pass
subbands are returned in frequency order (lowest band first), obtained
from the natural packet order by the standard Gray-code reordering.

Analysis step convention, applied per level to a series ``x`` of length n:

    ext  = x extended on the left by L-1 samples, half-sample symmetric
    y[i] = sum_m filt[m] * ext[2*i + m]        for i in 0 .. n//2 - 1

so each level halves the temporal length (floor), and a shift of the
input by 8 frames shifts every terminal subband by exactly one sample
away from the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .video_io import PlanarVideo

__all__ = [
    "FilterBankConfig",
    "SubbandVolume",
    "decompose",
    "BIOR22_DEC_LO",
    "BIOR22_DEC_HI",
    "band_order",
    "dump_subbands",
    "load_subbands",
]

_SQRT2 = np.sqrt(2.0)

#: Biorthogonal-2.2 analysis low-pass filter, conventional published
#: coefficients (spline 5/3 family), zero-padded to even length.
BIOR22_DEC_LO = _SQRT2 * np.array([0.0, -1 / 8, 1 / 4, 3 / 4, 1 / 4, -1 / 8])

#: Biorthogonal-2.2 analysis high-pass filter (same padding convention).
BIOR22_DEC_HI = _SQRT2 * np.array([0.0, 1 / 4, -1 / 2, 1 / 4, 0.0, 0.0])

BIOR22_DEC_LO.setflags(write=False)
BIOR22_DEC_HI.setflags(write=False)


@dataclass(frozen=True)
class FilterBankConfig:
    """Configuration of the temporal packet transform.

    Only the bior2.2 / 3-level / symmetric combination is supported; the
    fields exist so artifacts can record exactly what produced them.
    """

    wavelet: str = "bior2.2"
    levels: int = 3
    boundary: str = "symmetric"

    def __post_init__(self) -> None:
        if self.wavelet != "bior2.2":
            raise ArgumentError(f"unsupported wavelet {self.wavelet!r}")
        if self.levels != 3:
            raise ArgumentError(f"levels must be 3, got {self.levels}")
        if self.boundary != "symmetric":
            raise ArgumentError(f"unsupported boundary rule {self.boundary!r}")


@dataclass(frozen=True)
class SubbandVolume:
    """One band-pass coefficient volume, shape (T_k, height, width).

    ``band_index`` runs 1..7 in frequency order; ``scale`` records the
    spatial scale exponent of the video the volume was computed from
    (filled in by the entropy pipeline, None when decomposed directly).
    """

    band_index: int
    coeffs: np.ndarray
    scale: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.band_index <= 7:
            raise ArgumentError(f"band_index must be in 1..7, got {self.band_index}")
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)


def band_order(levels: int = 3) -> list[str]:
    """Filter paths ('a' = low-pass, 'd' = high-pass) of the band-pass
    terminal nodes in frequency order, all-low-pass node excluded."""
    n_nodes = 1 << levels
    paths = []
    for f in range(1, n_nodes):
        natural = f ^ (f >> 1)  # frequency index -> natural (Paley) index
        bits = format(natural, f"0{levels}b")
        paths.append(bits.replace("0", "a").replace("1", "d"))
    return paths


def _analysis_step(volume: np.ndarray, filt: np.ndarray) -> np.ndarray:
    """One filter-and-decimate level along axis 0 of a (n, h, w) volume."""
    n = volume.shape[0]
    taps = filt.shape[0]
    pad = [(taps - 1, 0)] + [(0, 0)] * (volume.ndim - 1)
    ext = np.pad(volume, pad, mode="symmetric")
    n_out = n // 2
    out = np.zeros((n_out,) + volume.shape[1:], dtype=np.float64)
    for m in range(taps):  # fixed summation order: results are schedule-independent
        out += filt[m] * ext[m : m + 2 * n_out : 2]
    return out


def decompose(v: PlanarVideo, cfg: FilterBankConfig = FilterBankConfig()) -> list[SubbandVolume]:
    """Run the 3-level temporal wavelet packet over every pixel.

    Returns the 7 band-pass terminal subbands in frequency order. All
    subbands share the same temporal length ``n_frames // 8``.
    """
    min_frames = 1 << cfg.levels
    if v.n_frames < min_frames:
        raise ArgumentError(
            f"need at least {min_frames} frames for {cfg.levels} decomposition levels, "
            f"got {v.n_frames}"
        )
    nodes = {"": v.frames.astype(np.float64)}
    for _ in range(cfg.levels):
        nodes = {
            path + suffix: _analysis_step(volume, filt)
            for path, volume in nodes.items()
            for suffix, filt in (("a", BIOR22_DEC_LO), ("d", BIOR22_DEC_HI))
        }
    return [
        SubbandVolume(band_index=k, coeffs=nodes[path])
        for k, path in enumerate(band_order(cfg.levels), start=1)
    ]


def dump_subbands(subbands: list[SubbandVolume], basepath) -> None:
    """Debug dump: per-band flat little-endian float64 files plus a JSON
    sidecar recording dims and band order."""
    import json
    from pathlib import Path

    base = Path(basepath)
    sidecar = {"dtype": "<f8", "layout": "(t, y, x) C-order", "order": "frequency", "bands": []}
    for sb in subbands:
        fname = f"{base.name}.band{sb.band_index}.f64"
        sb.coeffs.astype("<f8").tofile(base.with_name(fname))
        sidecar["bands"].append(
            {"band_index": sb.band_index, "file": fname, "shape": list(sb.coeffs.shape)}
        )
    base.with_name(base.name + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_subbands(basepath) -> list[SubbandVolume]:
    """Inverse of :func:`dump_subbands`."""
    import json
    from pathlib import Path

    base = Path(basepath)
    sidecar = json.loads(base.with_name(base.name + ".json").read_text())
    out = []
    for entry in sidecar["bands"]:
        raw = np.fromfile(base.with_name(entry["file"]), dtype="<f8")
        out.append(
            SubbandVolume(band_index=entry["band_index"], coeffs=raw.reshape(entry["shape"]))
        )
    return out
