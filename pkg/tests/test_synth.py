"""Tests for the event simulator, blur synthesis, and the round trip."""

import numpy as np
import pytest

from edi.model import EPS_LOG
from edi.optimize import EnergyParams
from edi.synth import (
    SharpVideo,
    SimConfig,
    make_blurry,
    make_translating_texture,
    round_trip,
    simulate_events,
)


def single_pixel_video(values, stamps=None):
    values = np.asarray(values, float)
    if stamps is None:
        stamps = np.arange(len(values), dtype=float)
    return SharpVideo(values.reshape(-1, 1, 1), stamps)


class TestSimConfig:
    def test_defaults(self):
        cfg = SimConfig()
        assert cfg.c_true == 0.3 and cfg.blur_span == 7
        assert cfg.epsilon_log == EPS_LOG

    def test_rejects_bad_values(self):
        with pytest.raises(Exception):
            SimConfig(c_true=0.0)
        with pytest.raises(ValueError):
            SimConfig(epsilon_log=0.0)
        with pytest.raises(ValueError):
            SimConfig(blur_span=0)
        with pytest.raises(ValueError):
            SimConfig(t_jitter=-0.1)

    def test_noise_requires_seed(self):
        with pytest.raises(ValueError):
            SimConfig(t_jitter=0.1)
        SimConfig(t_jitter=0.1, seed=4)


class TestSimulateEvents:
    def test_static_video_gives_empty_stream(self):
        video = SharpVideo(np.full((4, 3, 5), 0.6), np.arange(4.0))
        stream = simulate_events(video, SimConfig())
        assert stream.ts.size == 0
        # coverage still spans the whole video
        assert stream.t_min == 0.0 and stream.t_max == 3.0
        assert stream.covers(0.0, 3.0)

    def test_single_doubling_emits_one_positive_event(self):
        # 0.25 -> 0.5 is one full log-2 step
        video = single_pixel_video([0.25, 0.5])
        stream = simulate_events(video, SimConfig(c_true=np.log(2.0)))
        assert stream.ts.size == 1
        assert stream.sigmas[0] == 1
        assert stream.xs[0] == 0 and stream.ys[0] == 0

    def test_crossing_times_linear_in_log(self):
        c = 0.3
        video = single_pixel_video([0.2, 0.2 * np.exp(0.65)], [0.0, 1.0])
        stream = simulate_events(video, SimConfig(c_true=c))
        travel = np.log(video.frames[1, 0, 0]) - np.log(video.frames[0, 0, 0])
        np.testing.assert_allclose(stream.ts, [c / travel, 2 * c / travel], rtol=1e-12)
        assert np.all(stream.sigmas == 1)

    def test_up_then_down_balances_polarities(self):
        video = single_pixel_video([0.3, 0.6, 0.3])
        stream = simulate_events(video, SimConfig(c_true=0.1))
        assert np.sum(stream.sigmas == 1) == np.sum(stream.sigmas == -1)
        assert stream.ts.size > 0

    def test_events_land_on_the_changing_pixel(self):
        frames = np.full((3, 1, 2), 0.4)
        frames[:, 0, 1] = [0.2, 0.4, 0.8]
        video = SharpVideo(frames, np.arange(3.0))
        stream = simulate_events(video, SimConfig(c_true=0.2))
        assert stream.ts.size > 0
        assert np.all(stream.xs == 1) and np.all(stream.ys == 0)

    def test_event_conservation(self):
        # net signed count times c tracks the net log change within one c
        rng = np.random.default_rng(13)
        for _ in range(10):
            n, h, w = 8, 5, 6
            walk = rng.uniform(-0.15, 0.15, (n, h, w)).cumsum(axis=0)
            frames = np.clip(0.5 + walk, 0.1, 0.9)
            video = SharpVideo(frames, np.arange(n, dtype=float))
            c = float(rng.uniform(0.05, 0.4))
            stream = simulate_events(video, SimConfig(c_true=c))
            logs = np.log(np.maximum(frames, EPS_LOG))
            net = np.zeros((h, w))
            np.add.at(net, (stream.ys, stream.xs), stream.sigmas)
            np.testing.assert_array_less(
                np.abs(c * net - (logs[-1] - logs[0])), c + 1e-12
            )

    def test_deterministic(self):
        video = make_translating_texture(width=40, height=30, n_frames=5, n_patches=12)
        a = simulate_events(video, SimConfig())
        b = simulate_events(video, SimConfig())
        np.testing.assert_array_equal(a.ts, b.ts)
        np.testing.assert_array_equal(a.xs, b.xs)
        np.testing.assert_array_equal(a.ys, b.ys)
        np.testing.assert_array_equal(a.sigmas, b.sigmas)

    def test_timestamps_stay_inside_video_span(self):
        video = make_translating_texture(width=40, height=30, n_frames=6, n_patches=12)
        for cfg in [SimConfig(), SimConfig(t_jitter=0.2, seed=9)]:
            stream = simulate_events(video, cfg)
            assert stream.ts.min() >= video.timestamps[0]
            assert stream.ts.max() <= video.timestamps[-1]

    def test_threshold_noise_changes_the_stream(self):
        video = make_translating_texture(width=40, height=30, n_frames=5, n_patches=12)
        clean = simulate_events(video, SimConfig())
        noisy = simulate_events(video, SimConfig(c_jitter=0.2, seed=2))
        assert clean.ts.size != noisy.ts.size or not np.array_equal(clean.ts, noisy.ts)


class TestMakeBlurry:
    def test_mean_of_two(self):
        video = single_pixel_video([0.2, 0.6])
        blurry = make_blurry(video, 2)
        assert blurry.pixels[0, 0] == pytest.approx(0.4)
        assert blurry.exposure_start == 0.0 and blurry.exposure_end == 1.0

    def test_span_one_keeps_pixels_and_widens_window(self):
        video = single_pixel_video([0.2, 0.6, 0.9], [0.0, 0.5, 1.0])
        blurry = make_blurry(video, 1, start=1)
        assert blurry.pixels[0, 0] == 0.6
        assert blurry.exposure_start == pytest.approx(0.25)
        assert blurry.exposure_end == pytest.approx(0.75)
        assert blurry.midpoint == pytest.approx(0.5)

    def test_span_one_at_the_last_frame_uses_previous_gap(self):
        video = single_pixel_video([0.2, 0.6], [0.0, 1.0])
        blurry = make_blurry(video, 1, start=1)
        assert blurry.exposure_start == pytest.approx(0.5)
        assert blurry.exposure_end == pytest.approx(1.5)

    def test_matches_explicit_average(self):
        rng = np.random.default_rng(17)
        frames = rng.uniform(0, 1, (9, 6, 7))
        video = SharpVideo(frames, np.arange(9.0))
        for start, span in [(0, 7), (2, 5), (1, 2)]:
            blurry = make_blurry(video, span, start=start)
            want = sum(frames[start + i] for i in range(span)) / span
            np.testing.assert_allclose(blurry.pixels, want, atol=1e-15)
            assert blurry.exposure_start == float(start)
            assert blurry.exposure_end == float(start + span - 1)

    def test_moving_step_edge_blurs_to_a_ramp(self):
        # a step sweeping right turns into a monotone staircase profile
        n, w = 7, 14
        frames = np.full((n, 3, w), 0.2)
        for i in range(n):
            frames[i, :, : 3 + i] = 0.8
        video = SharpVideo(frames, np.arange(n, dtype=float))
        profile = make_blurry(video, n).pixels[0]
        np.testing.assert_allclose(profile[:3], 0.8, rtol=1e-12)
        np.testing.assert_allclose(profile[3 + n - 1 :], 0.2, rtol=1e-12)
        swept = profile[2 : 3 + n]
        assert np.all(np.diff(swept) < 0)
        assert profile[3] == pytest.approx(0.2 + 0.6 * 6 / 7)

    def test_constant_offset_commutes(self):
        rng = np.random.default_rng(19)
        frames = rng.uniform(0.1, 0.6, (5, 4, 4))
        video = SharpVideo(frames, np.arange(5.0))
        shifted = SharpVideo(frames + 0.3, np.arange(5.0))
        np.testing.assert_allclose(
            make_blurry(shifted, 5).pixels, make_blurry(video, 5).pixels + 0.3,
            atol=1e-15,
        )

    def test_rejects_bad_spans(self):
        video = single_pixel_video([0.2, 0.6])
        with pytest.raises(ValueError):
            make_blurry(video, 3)
        with pytest.raises(ValueError):
            make_blurry(video, 0)
        with pytest.raises(ValueError):
            make_blurry(video, 2, start=1)
        with pytest.raises(ValueError):
            make_blurry(video, 1, start=-1)


class TestRoundTrip:
    def test_static_video_is_a_fixed_point(self):
        video = SharpVideo(np.full((7, 24, 32), 0.5), np.arange(7.0) / 100)
        report = round_trip(video, SimConfig(blur_span=7))
        assert report.psnr_blurry == 100.0
        assert report.psnr_recovered == 100.0
        assert report.ssim_blurry == 1.0
        assert report.search.flat
        assert report.c_hat == EnergyParams().c_lo

    def test_recovery_beats_blur_on_translating_scene(self):
        video = make_translating_texture(width=96, height=72, n_patches=36, seed=5)
        report = round_trip(video, SimConfig(c_true=0.3, blur_span=7))
        assert report.psnr_recovered > report.psnr_blurry + 5.0
        assert report.ssim_recovered > report.ssim_blurry
        assert abs(report.c_hat - 0.3) / 0.3 <= 0.20
        assert report.psnr_at_c_hat > report.psnr_blurry

    def test_report_is_consistent_with_its_search(self):
        video = make_translating_texture(width=96, height=72, n_patches=36)
        report = round_trip(video, SimConfig())
        assert report.search.curve.shape[1] == 2
        assert report.c_hat == report.search.c_hat
        assert EnergyParams().c_lo <= report.c_hat <= EnergyParams().c_hi


class TestMakeTranslatingTexture:
    def test_shape_and_range(self):
        video = make_translating_texture()
        assert video.frames.shape == (15, 180, 240)
        assert video.frames.min() >= 0.1 and video.frames.max() <= 0.9
        np.testing.assert_allclose(np.diff(video.timestamps), 1.0 / 240.0)

    def test_frames_are_exact_rolls(self):
        video = make_translating_texture(width=60, height=40, n_patches=20)
        for i in range(len(video)):
            assert np.array_equal(
                video.frames[i], np.roll(video.frames[0], 2 * i, axis=1)
            )

    def test_seed_controls_content(self):
        a = make_translating_texture(width=40, height=30, n_patches=12, seed=1)
        b = make_translating_texture(width=40, height=30, n_patches=12, seed=1)
        c = make_translating_texture(width=40, height=30, n_patches=12, seed=2)
        assert np.array_equal(a.frames, b.frames)
        assert not np.array_equal(a.frames, c.frames)

    def test_rejects_too_few_patches(self):
        with pytest.raises(ValueError):
            make_translating_texture(n_patches=1)
