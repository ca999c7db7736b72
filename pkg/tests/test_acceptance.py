"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

These pin the package-level guarantees at their stated tolerances; the unit
suites cover the same ground in finer grain. The browser tuner has its own
end-to-end check in the frontend workspace and is not duplicated here.
"""

import json
import time

import numpy as np
import pytest

from edi.cli import main
from edi.events import EventStream, PixelTimeline, index_events
from edi.formats import parse_events, write_events, write_gray_png
from edi.metrics import psnr, ssim
from edi.model import (
    EPS_LOG,
    Frame,
    double_integral_term,
    recover_latent,
    rollout_values,
)
from edi.optimize import EnergyParams, find_c
from edi.synth import SimConfig, make_blurry, make_translating_texture, simulate_events


def report(num: int, ok: bool, detail: str) -> None:
    line = f"[criterion {num}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    assert ok, line


def dense_grid_oracle(times, sigmas, window, f, c, n=1_000_000):
    """Left-endpoint Riemann sum on a uniform grid refined with the event
    times, which is exact for a piecewise-constant integrand up to float
    rounding."""
    start, end = window
    grid = np.linspace(start, end, n)
    bps = times[(times > start) & (times < end)]
    grid = np.insert(grid, np.searchsorted(grid, bps), bps)
    cum = np.concatenate([[0.0], np.cumsum(sigmas)])
    s_f = cum[np.searchsorted(times, f, side="right")]
    levels = cum[np.searchsorted(times, grid[:-1], side="right")] - s_f
    return float(np.sum(np.diff(grid) * np.exp(c * levels))) / (end - start)


def acceptance_clip():
    video = make_translating_texture()  # 240x180, 15 frames
    cfg = SimConfig(c_true=0.3, blur_span=7)
    stream = simulate_events(video, cfg)
    blurry = make_blurry(video, cfg.blur_span)
    gt = video.frames[int(np.argmin(np.abs(video.timestamps - blurry.midpoint)))]
    return video, stream, blurry, gt


def test_criterion_1_integral_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(0, 101))
        times = np.unique(rng.uniform(0.0, 1.0, m))
        sigmas = rng.choice([-1, 1], times.size)
        c = float(rng.uniform(0.01, 1.0))
        f = float(rng.uniform(0.0, 1.0))
        timeline = PixelTimeline(times, sigmas)
        got = double_integral_term(timeline, (0.0, 1.0), f, c)
        want = dense_grid_oracle(times, sigmas, (0.0, 1.0), f, c)
        worst = max(worst, abs(got - want) / abs(want))
    elapsed = time.perf_counter() - t0
    report(
        1,
        worst <= 1e-6 and elapsed < 30.0,
        f"1000 timelines vs 1e6-sample grid, worst rel err {worst:.2e} "
        f"(tol 1e-6), {elapsed:.1f}s (< 30s)",
    )


def test_criterion_2_zero_event_identity():
    rng = np.random.default_rng(102)
    empty = EventStream(32, 24, [], [], [], [], t_min=0.0, t_max=1.0)
    exact = True
    for c in [0.01, 0.037, 0.3, 1.0]:
        pixels = rng.uniform(EPS_LOG, 1.0, (24, 32))
        blurry = Frame(pixels, 0.0, 1.0)
        latent = recover_latent(blurry, empty, c)
        exact = exact and np.array_equal(latent.pixels, pixels)
        exact = exact and latent.n_saturated == 0
    report(2, exact, "empty stream reproduces the blurry frame bit-exactly "
                     "for c across the search bounds")


def test_criterion_3_round_trip_gain():
    t0 = time.perf_counter()
    _, stream, blurry, gt = acceptance_clip()
    recovered = recover_latent(blurry, stream, 0.3)
    gain = psnr(recovered.pixels, gt) - psnr(blurry.pixels, gt)
    elapsed = time.perf_counter() - t0
    report(
        3,
        gain >= 5.0 and elapsed < 60.0,
        f"240x180 translating texture: PSNR gain {gain:.2f} dB (>= 5 dB) "
        f"in {elapsed:.1f}s (< 60s)",
    )


def test_criterion_4_threshold_recovery():
    _, stream, blurry, gt = acceptance_clip()
    result = find_c(blurry, stream)
    rel_err = abs(result.c_hat - 0.3) / 0.3

    params = EnergyParams()
    grid = np.geomspace(params.c_lo, params.c_hi, params.grid_n)
    psnr_curve = [psnr(recover_latent(blurry, stream, c).pixels, gt) for c in grid]
    peak_cell = int(np.argmax(psnr_curve))
    min_cell = int(np.argmin(np.abs(grid - result.c_hat)))
    cells_apart = abs(peak_cell - min_cell)
    report(
        4,
        rel_err <= 0.20 and cells_apart <= 1,
        f"c_hat={result.c_hat:.4f} rel err {rel_err:.3f} (<= 0.20); energy "
        f"minimum cell {min_cell} vs PSNR peak cell {peak_cell} "
        f"({cells_apart} apart, <= 1)",
    )


def test_criterion_5_rollout_consistency():
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(100):
        w, h = 4, 3
        n = int(rng.integers(1, 60))
        stream = EventStream(
            w, h,
            rng.integers(0, w, n), rng.integers(0, h, n),
            np.sort(rng.uniform(0.0, 1.0, n)), rng.choice([-1, 1], n),
            t_min=0.0, t_max=1.0,
        )
        timelines = index_events(stream)
        anchor = rng.uniform(0.1, 1.0, (h, w))
        f = float(rng.uniform(0.0, 1.0))
        t = float(rng.uniform(0.0, 1.0))
        c = float(rng.uniform(0.01, 0.5))
        forward = rollout_values(anchor, f, timelines, c, np.array([t]))[0]
        back = rollout_values(forward, t, timelines, c, np.array([f]))[0]
        worst = max(worst, float(np.max(np.abs(back - anchor))))
    report(
        5,
        worst <= 1e-9,
        f"forward+inverse rollout over 100 random timelines, worst "
        f"deviation {worst:.2e} (<= 1e-9, pre-clamp)",
    )


def test_criterion_6_frame_rate_contract(tmp_path):
    rng = np.random.default_rng(106)
    n = 12_000
    stream = EventStream(
        64, 48,
        rng.integers(0, 64, n), rng.integers(0, 48, n),
        np.sort(rng.uniform(0.0, 1.0, n)), rng.choice([-1, 1], n),
        t_min=0.0, t_max=1.0,
    )
    write_events(stream, tmp_path / "events.txt")
    write_gray_png(tmp_path / "blur.png", np.full((48, 64), 0.5))
    (tmp_path / "frames.txt").write_text("0.0 1.0 blur.png\n")
    out = tmp_path / "recon"
    rc = main([
        "reconstruct",
        "--events", str(tmp_path / "events.txt"),
        "--frames", str(tmp_path / "frames.txt"),
        "--out", str(out), "--c", "0.3", "--events-per-frame", "60",
    ])
    manifest = json.loads((out / "reconstruct.json").read_text())
    count = manifest["n_output_frames"]
    report(
        6,
        rc == 0 and abs(count - 200) <= 2 and "frame_rate_multiplier" in manifest,
        f"events_per_frame=60 on 12000 in-window events -> {count} frames "
        f"(200 +/- 2), multiplier {manifest.get('frame_rate_multiplier')}",
    )


def test_criterion_7_metrics_pinning():
    rng = np.random.default_rng(107)
    a = np.full((32, 32), 0.25)
    uniform_gap = abs(psnr(a, a + 0.1) - 20.0)

    img = rng.uniform(0.0, 1.0, (48, 48))
    self_ssim = ssim(img, img)

    sym_gap = 0.0
    for _ in range(10):
        x = rng.uniform(0.0, 1.0, (24, 24))
        y = rng.uniform(0.0, 1.0, (24, 24))
        sym_gap = max(sym_gap, abs(ssim(x, y) - ssim(y, x)))
    report(
        7,
        uniform_gap <= 1e-6 and self_ssim == 1.0 and sym_gap <= 1e-12,
        f"psnr uniform-0.1 within {uniform_gap:.1e} of 20 dB; ssim(a,a)=="
        f"{self_ssim}; ssim asymmetry {sym_gap:.1e} (<= 1e-12)",
    )


def test_criterion_8_format_round_trip(tmp_path):
    rng = np.random.default_rng(108)
    n = 10_000
    stream = EventStream(
        240, 180,
        rng.integers(0, 240, n), rng.integers(0, 180, n),
        np.sort(rng.uniform(0.0, 5.0, n)), rng.choice([-1, 1], n),
    )
    p = tmp_path / "events.txt"
    write_events(stream, p)
    back = parse_events(p)
    p2 = tmp_path / "events2.txt"
    write_events(back, p2)
    again = parse_events(p2)
    ok = (
        back.width == stream.width
        and back.height == stream.height
        and np.array_equal(back.ts, stream.ts)
        and np.array_equal(back.xs, stream.xs)
        and np.array_equal(back.ys, stream.ys)
        and np.array_equal(back.sigmas, stream.sigmas)
        and back.t_min == stream.t_min
        and back.t_max == stream.t_max
        and p.read_text() == p2.read_text()
        and np.array_equal(again.ts, stream.ts)
    )
    report(8, ok, f"parse -> write -> parse identity on {n} canonical events")
