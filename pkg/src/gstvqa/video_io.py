"""Uncompressed video ingestion and resampling primitives.

Supports Y4M ("YUV4MPEG2", C420 family) and headerless planar YUV420 8-bit
files. Only the luma plane is ever loaded; chroma bytes are skipped. All
downstream processing treats a video as an immutable stack of luma planes
with an exact rational frame rate.

Resampling conventions (pinned here, relied on by the feature pipeline):

* ``frame_duplicate_upsample`` replicates the source frame that is on
  display at each output timestamp, i.e. output frame ``j`` copies source
  frame ``floor(j * src_fps / target_fps)``. For integer rate ratios every
  frame is repeated exactly ``ratio`` times.
* ``temporal_subsample`` keeps, for each output timestamp, the source frame
  whose own timestamp is nearest (ties resolved toward the earlier frame).
* Both directions produce ``floor(n * target / src + 1/2)`` frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DimensionError, FormatError, IoError

__all__ = [
    "PlanarVideo",
    "VideoMeta",
    "read_video",
    "spatial_downsample",
    "frame_duplicate_upsample",
    "temporal_subsample",
    "SUPPORTED_SCALES",
]

#: Scale exponents accepted by :func:`spatial_downsample` (block size 2**s).
SUPPORTED_SCALES = (0, 1, 2, 3, 4, 5)

_Y4M_MAGIC = b"YUV4MPEG2"
_C420_FAMILY = {"420", "420jpeg", "420paldv", "420mpeg2"}


@dataclass(frozen=True)
class PlanarVideo:
    """A luma-only frame sequence: ``frames`` has shape (n_frames, height, width).

    Instances are immutable; the frame array is marked read-only on
    construction so videos can be shared freely across threads.
    """

    frames: np.ndarray
    fps: Fraction

    def __post_init__(self) -> None:
        arr = np.asarray(self.frames)
        if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ArgumentError(f"frames must be a (n, h, w) volume, got shape {arr.shape}")
        fps = Fraction(self.fps)
        if fps <= 0:
            raise ArgumentError(f"fps must be positive, got {fps}")
        arr = arr.copy() if arr.base is not None and not arr.flags.owndata else arr
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)
        object.__setattr__(self, "fps", fps)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


@dataclass(frozen=True)
class VideoMeta:
    """Where and how to read a video file.

    ``width``/``height``/``declared_fps`` are required for headerless raw
    YUV; for Y4M they are optional and the header wins.
    """

    path: str | Path
    pix_format: str = "yuv420p"
    declared_fps: Fraction | int | None = None
    width: int | None = None
    height: int | None = None

    def __post_init__(self) -> None:
        if self.pix_format != "yuv420p":
            raise FormatError(f"unsupported pixel format: {self.pix_format!r}")


def read_video(meta: VideoMeta) -> PlanarVideo:
    """Load the luma planes of a Y4M or raw planar YUV420 file.

    The container is sniffed from the file magic, not the extension.
    Raises ``IoError`` for missing/empty/truncated files and ``FormatError``
    for malformed headers or payloads inconsistent with the declared
    geometry.
    """
    path = Path(meta.path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read video file {path}: {exc}") from exc
    if len(data) == 0:
        raise IoError(f"empty video file: {path}")
    if data.startswith(_Y4M_MAGIC):
        return _parse_y4m(data, path)
    return _parse_raw_yuv420(data, meta, path)


def _parse_y4m(data: bytes, path: Path) -> PlanarVideo:
    header_end = data.find(b"\n", 0, 4096)
    if header_end < 0:
        raise FormatError(f"{path}: Y4M stream header has no terminating newline")
    header = data[:header_end].decode("ascii", errors="replace")
    width = height = None
    fps = None
    colorspace = "420"
    for tag in header.split(" ")[1:]:
        if not tag:
            continue
        key, value = tag[0], tag[1:]
        if key == "W":
            width = _parse_positive_int(value, path, "W")
        elif key == "H":
            height = _parse_positive_int(value, path, "H")
        elif key == "F":
            num, sep, den = value.partition(":")
            if not sep:
                raise FormatError(f"{path}: malformed F tag {value!r}")
            fps = Fraction(_parse_positive_int(num, path, "F"), _parse_positive_int(den, path, "F"))
        elif key == "C":
            colorspace = value
        # I (interlace), A (aspect) and X (comment) tags carry nothing we need
    if width is None or height is None or fps is None:
        raise FormatError(f"{path}: Y4M header is missing one of W/H/F tags")
    if colorspace not in _C420_FAMILY:
        raise FormatError(f"{path}: unsupported Y4M colorspace C{colorspace} (C420 family only)")

    luma_size = width * height
    frame_size = luma_size + luma_size // 2
    frames: list[np.ndarray] = []
    pos = header_end + 1
    while pos < len(data):
        marker_end = data.find(b"\n", pos, pos + 1024)
        if not data.startswith(b"FRAME", pos) or marker_end < 0:
            raise FormatError(f"{path}: expected FRAME marker at byte {pos}")
        payload_start = marker_end + 1
        payload_end = payload_start + frame_size
        if payload_end > len(data):
            if frames:
                raise IoError(f"{path}: truncated mid-frame after {len(frames)} frames")
            raise FormatError(
                f"{path}: payload smaller than one {width}x{height} frame "
                f"(dimension mismatch or truncation)"
            )
        luma = np.frombuffer(data, dtype=np.uint8, count=luma_size, offset=payload_start)
        frames.append(luma.reshape(height, width))
        pos = payload_end
    if not frames:
        raise FormatError(f"{path}: Y4M stream contains no frames")
    return PlanarVideo(frames=np.stack(frames), fps=fps)


def _parse_raw_yuv420(data: bytes, meta: VideoMeta, path: Path) -> PlanarVideo:
    if meta.width is None or meta.height is None or meta.declared_fps is None:
        raise FormatError(f"{path}: raw YUV requires explicit width, height and fps")
    width, height = meta.width, meta.height
    if width < 1 or height < 1 or width % 2 or height % 2:
        raise FormatError(f"{path}: invalid raw YUV420 dimensions {width}x{height}")
    fps = Fraction(meta.declared_fps)
    if fps <= 0:
        raise FormatError(f"{path}: fps must be positive, got {fps}")
    luma_size = width * height
    frame_size = luma_size + luma_size // 2
    n_frames, remainder = divmod(len(data), frame_size)
    if remainder or n_frames == 0:
        raise FormatError(
            f"{path}: {len(data)} bytes is not a whole number of {width}x{height} "
            f"YUV420 frames ({frame_size} bytes each)"
        )
    arr = np.frombuffer(data, dtype=np.uint8).reshape(n_frames, frame_size)
    frames = arr[:, :luma_size].reshape(n_frames, height, width)
    return PlanarVideo(frames=frames, fps=fps)


def _parse_positive_int(text: str, path: Path, tag: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer {tag} tag {text!r}") from exc
    if value <= 0:
        raise FormatError(f"{path}: {tag} tag must be positive, got {value}")
    return value


def spatial_downsample(v: PlanarVideo, s: int) -> PlanarVideo:
    """Average-pool every frame over non-overlapping ``2**s`` x ``2**s`` blocks.

    Trailing rows/columns that do not fill a block are dropped. Block
    means (rather than decimation) avoid aliasing ahead of the entropy
    statistics. Frame rate and frame count are unchanged.
    """
    if s not in SUPPORTED_SCALES:
        raise DimensionError(f"unsupported scale exponent s={s} (supported: {SUPPORTED_SCALES})")
    block = 1 << s
    out_h = v.height // block
    out_w = v.width // block
    if out_h < 1 or out_w < 1:
        raise DimensionError(
            f"{v.width}x{v.height} frames cannot be downsampled by 2^{s}={block}"
        )
    if block == 1:
        return PlanarVideo(frames=v.frames.astype(np.float64), fps=v.fps)
    cropped = v.frames[:, : out_h * block, : out_w * block].astype(np.float64)
    blocks = cropped.reshape(v.n_frames, out_h, block, out_w, block)
    return PlanarVideo(frames=blocks.mean(axis=(2, 4)), fps=v.fps)


def _resampled_length(n_frames: int, src_fps: Fraction, target_fps: Fraction) -> int:
    # round-half-up on the exact rational frame count
    return math.floor(Fraction(n_frames) * target_fps / src_fps + Fraction(1, 2))


def frame_duplicate_upsample(v: PlanarVideo, target_fps: Fraction | int) -> PlanarVideo:
    """Raise the frame rate by frame duplication.

    Output frame ``j`` copies the source frame on display at time
    ``j / target_fps``, i.e. source index ``floor(j * src / target)``; an
    integer rate ratio repeats every frame exactly ``ratio`` times.
    """
    target = Fraction(target_fps)
    if target < v.fps:
        raise ArgumentError(f"target fps {target} is below source fps {v.fps}")
    if target == v.fps:
        return v
    n_out = _resampled_length(v.n_frames, v.fps, target)
    ratio = v.fps / target
    idx = [min(math.floor(j * ratio), v.n_frames - 1) for j in range(n_out)]
    return PlanarVideo(frames=v.frames[idx], fps=target)


def temporal_subsample(v: PlanarVideo, target_fps: Fraction | int) -> PlanarVideo:
    """Lower the frame rate, keeping the nearest-timestamp source frame.

    For each output timestamp ``j / target_fps`` the source frame with the
    nearest presentation timestamp is selected, ties going to the earlier
    frame. When ``target_fps == v.fps`` the input is returned unchanged.
    """
    target = Fraction(target_fps)
    if target > v.fps:
        raise ArgumentError(f"target fps {target} exceeds source fps {v.fps}")
    if target == v.fps:
        return v
    n_out = _resampled_length(v.n_frames, v.fps, target)
    ratio = v.fps / target
    # nearest integer to j*ratio with half-way ties rounded down
    idx = [min(math.ceil(j * ratio - Fraction(1, 2)), v.n_frames - 1) for j in range(n_out)]
    return PlanarVideo(frames=v.frames[idx], fps=target)
