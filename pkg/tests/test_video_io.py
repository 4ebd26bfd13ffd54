"""Reader, downsampling, and temporal resampling contracts."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gstvqa.errors import ArgumentError, DimensionError, FormatError, IoError
from gstvqa.video_io import (
    PlanarVideo,
    VideoMeta,
    frame_duplicate_upsample,
    read_video,
    spatial_downsample,
    temporal_subsample,
)
from util import make_video, y4m_bytes


class TestReadY4m:
    def test_handcrafted_two_frame_file(self, tmp_path):
        # 4x4, 2 frames, luma bytes 0..15 and 16..31, built byte-by-byte
        luma0 = bytes(range(16))
        luma1 = bytes(range(16, 32))
        chroma = bytes([128] * 8)
        blob = (
            b"YUV4MPEG2 W4 H4 F24:1 Ip A1:1 C420\n"
            + b"FRAME\n" + luma0 + chroma
            + b"FRAME\n" + luma1 + chroma
        )
        path = tmp_path / "tiny.y4m"
        path.write_bytes(blob)
        video = read_video(VideoMeta(path=path))
        assert video.fps == Fraction(24)
        assert video.n_frames == 2 and video.width == 4 and video.height == 4
        np.testing.assert_array_equal(video.frames[0].ravel(), np.arange(16))
        np.testing.assert_array_equal(video.frames[1].ravel(), np.arange(16, 32))

    def test_fractional_frame_rate(self, tmp_path):
        path = tmp_path / "ntsc.y4m"
        path.write_bytes(y4m_bytes(np.zeros((1, 4, 4), np.uint8), fps=(30000, 1001)))
        assert read_video(VideoMeta(path=path)).fps == Fraction(30000, 1001)

    def test_empty_file_is_io_error(self, tmp_path):
        path = tmp_path / "empty.y4m"
        path.write_bytes(b"")
        with pytest.raises(IoError):
            read_video(VideoMeta(path=path))

    def test_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(IoError):
            read_video(VideoMeta(path=tmp_path / "nope.y4m"))

    def test_header_payload_dimension_mismatch(self, tmp_path):
        # header promises 8x8 but the payload holds a single 4x4 frame
        small_frame = b"FRAME\n" + bytes(16) + bytes(8)
        path = tmp_path / "mismatch.y4m"
        path.write_bytes(b"YUV4MPEG2 W8 H8 F30:1 C420\n" + small_frame)
        with pytest.raises(FormatError):
            read_video(VideoMeta(path=path))

    def test_truncation_after_complete_frame(self, tmp_path):
        blob = y4m_bytes(np.zeros((2, 4, 4), np.uint8))
        path = tmp_path / "trunc.y4m"
        path.write_bytes(blob[:-5])
        with pytest.raises(IoError):
            read_video(VideoMeta(path=path))

    def test_unsupported_colorspace(self, tmp_path):
        path = tmp_path / "c444.y4m"
        path.write_bytes(b"YUV4MPEG2 W4 H4 F30:1 C444\nFRAME\n" + bytes(48))
        with pytest.raises(FormatError):
            read_video(VideoMeta(path=path))

    def test_missing_required_tag(self, tmp_path):
        path = tmp_path / "nofps.y4m"
        path.write_bytes(b"YUV4MPEG2 W4 H4\nFRAME\n" + bytes(24))
        with pytest.raises(FormatError):
            read_video(VideoMeta(path=path))

    def test_read_is_deterministic(self, tmp_path, rng):
        path = tmp_path / "det.y4m"
        path.write_bytes(y4m_bytes(rng.integers(0, 256, (3, 8, 8)).astype(np.uint8)))
        a = read_video(VideoMeta(path=path))
        b = read_video(VideoMeta(path=path))
        assert a.fps == b.fps
        np.testing.assert_array_equal(a.frames, b.frames)


class TestReadRawYuv:
    def test_luma_extraction(self, tmp_path, rng):
        luma = rng.integers(0, 256, (3, 4, 6)).astype(np.uint8)
        frame_size = 24 + 12
        blob = b"".join(luma[i].tobytes() + bytes([7] * 12) for i in range(3))
        assert len(blob) == 3 * frame_size
        path = tmp_path / "raw.yuv"
        path.write_bytes(blob)
        video = read_video(VideoMeta(path=path, declared_fps=25, width=6, height=4))
        assert video.fps == Fraction(25)
        np.testing.assert_array_equal(video.frames, luma)

    def test_partial_frame_is_format_error(self, tmp_path):
        path = tmp_path / "bad.yuv"
        path.write_bytes(bytes(37))  # 4x4 YUV420 frame is 24 bytes
        with pytest.raises(FormatError):
            read_video(VideoMeta(path=path, declared_fps=30, width=4, height=4))

    def test_missing_geometry_is_format_error(self, tmp_path):
        path = tmp_path / "raw.yuv"
        path.write_bytes(bytes(24))
        with pytest.raises(FormatError):
            read_video(VideoMeta(path=path))

    def test_empty_raw_is_io_error(self, tmp_path):
        path = tmp_path / "empty.yuv"
        path.write_bytes(b"")
        with pytest.raises(IoError):
            read_video(VideoMeta(path=path, declared_fps=30, width=4, height=4))


class TestPlanarVideo:
    def test_frames_are_immutable(self, rng):
        video = make_video(rng.integers(0, 256, (2, 4, 4)).astype(np.uint8))
        with pytest.raises(ValueError):
            video.frames[0, 0, 0] = 1

    def test_invalid_construction(self):
        with pytest.raises(ArgumentError):
            PlanarVideo(frames=np.zeros((4, 4)), fps=Fraction(30))
        with pytest.raises(ArgumentError):
            make_video(np.zeros((1, 4, 4), np.uint8), fps=0)


class TestSpatialDownsample:
    def test_constant_video_stays_constant(self):
        video = make_video(np.full((2, 64, 96), 128, np.uint8))
        for s in (4, 5):
            out = spatial_downsample(video, s)
            assert out.width == 96 // (1 << s) and out.height == 64 // (1 << s)
            assert np.all(out.frames == 128.0)
            assert out.fps == video.fps and out.n_frames == video.n_frames

    def test_block_means_32x32_scale4(self):
        # four 16x16 quadrants with distinct values -> 2x2 frame of those means
        frame = np.zeros((32, 32), np.uint8)
        frame[:16, :16] = 10
        frame[:16, 16:] = 20
        frame[16:, :16] = 30
        frame[16:, 16:] = 40
        out = spatial_downsample(make_video(frame[None]), 4)
        np.testing.assert_array_equal(out.frames[0], [[10.0, 20.0], [30.0, 40.0]])

    def test_mixed_block_mean(self, rng):
        frame = rng.integers(0, 256, (32, 32)).astype(np.uint8)
        out = spatial_downsample(make_video(frame[None]), 4)
        expected = frame.astype(float).reshape(2, 16, 2, 16).mean(axis=(1, 3))
        np.testing.assert_allclose(out.frames[0], expected, rtol=0, atol=1e-12)

    def test_64x64_supported_scales(self):
        video = make_video(np.zeros((1, 64, 64), np.uint8))
        assert spatial_downsample(video, 5).width == 2
        with pytest.raises(DimensionError):
            spatial_downsample(video, 6)

    def test_output_must_keep_a_pixel(self):
        video = make_video(np.zeros((1, 8, 8), np.uint8))
        with pytest.raises(DimensionError):
            spatial_downsample(video, 4)

    def test_global_mean_preserved_when_dims_divide(self, rng):
        frames = rng.integers(0, 256, (3, 32, 64)).astype(np.uint8)
        out = spatial_downsample(make_video(frames), 4)
        for i in range(3):
            assert abs(out.frames[i].mean() - frames[i].astype(float).mean()) < 1e-10

    def test_trailing_partial_blocks_dropped(self, rng):
        frames = rng.integers(0, 256, (1, 40, 50)).astype(np.uint8)
        out = spatial_downsample(make_video(frames), 4)
        assert (out.height, out.width) == (2, 3)
        expected = frames[0, :32, :48].astype(float).reshape(2, 16, 3, 16).mean(axis=(1, 3))
        np.testing.assert_allclose(out.frames[0], expected, atol=1e-12)


class TestFrameDuplicateUpsample:
    def test_30_to_120_pattern(self):
        video = make_video(
            np.stack([np.full((4, 4), 1, np.uint8), np.full((4, 4), 2, np.uint8)]), fps=30
        )
        up = frame_duplicate_upsample(video, 120)
        assert up.fps == Fraction(120)
        assert [int(f[0, 0]) for f in up.frames] == [1, 1, 1, 1, 2, 2, 2, 2]

    def test_identity_at_equal_rate(self, rng):
        video = make_video(rng.integers(0, 256, (5, 4, 4)).astype(np.uint8), fps=60)
        assert frame_duplicate_upsample(video, 60) is video

    def test_24_to_120_each_frame_five_times(self):
        frames = np.arange(4, dtype=np.uint8)[:, None, None] * np.ones((1, 4, 4), np.uint8)
        up = frame_duplicate_upsample(make_video(frames, fps=24), 120)
        assert up.n_frames == 20
        values = [int(f[0, 0]) for f in up.frames]
        assert values == sorted(values)
        assert all(values.count(v) == 5 for v in range(4))

    def test_downrate_target_rejected(self):
        video = make_video(np.zeros((2, 4, 4), np.uint8), fps=60)
        with pytest.raises(ArgumentError):
            frame_duplicate_upsample(video, 30)


class TestTemporalSubsample:
    def test_120_to_24_takes_every_fifth(self):
        frames = np.arange(10, dtype=np.uint8)[:, None, None] * np.ones((1, 4, 4), np.uint8)
        sub = temporal_subsample(make_video(frames, fps=120), 24)
        assert sub.fps == Fraction(24)
        assert [int(f[0, 0]) for f in sub.frames] == [0, 5]

    def test_identity_at_equal_rate(self, rng):
        video = make_video(rng.integers(0, 256, (4, 4, 4)).astype(np.uint8), fps=120)
        assert temporal_subsample(video, 120) is video

    def test_120_to_82_has_no_duplicates(self):
        frames = np.arange(120, dtype=np.uint8)[:, None, None] * np.ones((1, 2, 2), np.uint8)
        sub = temporal_subsample(make_video(frames, fps=120), 82)
        picked = [int(f[0, 0]) for f in sub.frames]
        assert len(picked) == 82
        assert len(set(picked)) == 82  # down-ratio below 2 never repeats a frame
        assert picked == sorted(picked)
        # spot-check the nearest-timestamp rule on the first few outputs
        ratio = Fraction(120, 82)
        for j in (1, 2, 3, 40, 81):
            exact = j * ratio
            assert abs(picked[j] - exact) <= Fraction(1, 2)

    def test_uprate_target_rejected(self):
        video = make_video(np.zeros((2, 4, 4), np.uint8), fps=30)
        with pytest.raises(ArgumentError):
            temporal_subsample(video, 60)

    def test_tie_breaks_toward_earlier_frame(self):
        # 4 frames at 60 fps -> 30 fps: output j=1 sits exactly between frames 1 and 2
        frames = np.arange(4, dtype=np.uint8)[:, None, None] * np.ones((1, 2, 2), np.uint8)
        sub = temporal_subsample(make_video(frames, fps=Fraction(60)), Fraction(40))
        # j*60/40 = 0, 1.5, 3 -> ties at 1.5 resolve to frame 1
        assert [int(f[0, 0]) for f in sub.frames] == [0, 1, 3]


class TestRoundTrip:
    @pytest.mark.parametrize("n,ratio", [(40, 4), (64, 2), (120, 5), (24, 3)])
    def test_exact_when_ratio_divides_frame_count(self, n, ratio):
        frames = np.zeros((n, 4, 4), np.uint8)
        video = make_video(frames, fps=120)
        down = temporal_subsample(video, Fraction(120, ratio))
        assert down.n_frames == n // ratio
        back = frame_duplicate_upsample(down, 120)
        assert back.n_frames == n

    @given(
        n=st.integers(min_value=9, max_value=200),
        target=st.integers(min_value=61, max_value=119),
    )
    @settings(max_examples=60, deadline=None)
    def test_count_within_one_for_mild_ratios(self, n, target):
        # down-ratio below 2 keeps the count error bounded by rounding
        video = make_video(np.zeros((n, 2, 2), np.uint8), fps=120)
        down = temporal_subsample(video, Fraction(target))
        back = frame_duplicate_upsample(down, 120)
        assert abs(back.n_frames - n) <= 1
