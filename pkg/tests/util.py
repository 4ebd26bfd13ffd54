"""Shared builders for test videos and Y4M byte streams."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from gstvqa.video_io import PlanarVideo


def make_video(frames, fps=30) -> PlanarVideo:
    return PlanarVideo(frames=np.asarray(frames), fps=Fraction(fps))


def noise_video(rng, n=16, h=32, w=32, fps=30) -> PlanarVideo:
    return make_video(rng.integers(0, 256, (n, h, w)).astype(np.uint8), fps)


def y4m_bytes(frames, fps=(30, 1), colorspace="420", extra_header="") -> bytes:
    """Assemble a Y4M byte stream around the given luma frames (chroma = 128)."""
    frames = np.asarray(frames, dtype=np.uint8)
    n, h, w = frames.shape
    header = f"YUV4MPEG2 W{w} H{h} F{fps[0]}:{fps[1]} Ip A1:1 C{colorspace}{extra_header}\n"
    chroma = np.full((h // 2) * (w // 2) * 2, 128, np.uint8).tobytes()
    parts = [header.encode("ascii")]
    for frame in frames:
        parts.append(b"FRAME\n")
        parts.append(frame.tobytes())
        parts.append(chroma)
    return b"".join(parts)


def write_y4m(path, frames, fps=(30, 1)) -> None:
    path.write_bytes(y4m_bytes(frames, fps=fps))


def sample_ggd(rng, beta, alpha, size):
    """Draw GGD samples via the gamma transform |X|^beta ~ Gamma(1/beta)."""
    magnitude = rng.gamma(shape=1.0 / beta, scale=1.0, size=size) ** (1.0 / beta)
    signs = rng.choice([-1.0, 1.0], size=size)
    return alpha * magnitude * signs
