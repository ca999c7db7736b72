"""Forward simulation: sharp video to events and motion-blurred frames.

The simulator is the closed validation loop for everything else: generate a
stream and a blurry frame from known ground truth, reconstruct, and measure.
Event generation follows the standard threshold-crossing model: each pixel
keeps a reference log intensity, and whenever the (piecewise-linear in time)
log intensity moves a full threshold away from the reference, an event fires
at the interpolated crossing time and the reference steps by one threshold
toward the signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidThresholdError
from .events import EventStream
from .metrics import psnr, ssim
from .model import EPS_LOG, Frame, recover_latent
from .optimize import EnergyParams, ThresholdSearchResult, find_c

__all__ = [
    "SharpVideo",
    "SimConfig",
    "RoundTripReport",
    "simulate_events",
    "make_blurry",
    "round_trip",
    "make_translating_texture",
]


@dataclass(frozen=True)
class SharpVideo:
    """Ground-truth sharp frames on a shared clock."""

    frames: np.ndarray  # (n, height, width), values in [0, 1]
    timestamps: np.ndarray  # (n,), strictly increasing seconds

    def __post_init__(self):
        frames = np.ascontiguousarray(np.asarray(self.frames, dtype=np.float64))
        stamps = np.ascontiguousarray(np.asarray(self.timestamps, dtype=np.float64))
        if frames.ndim != 3 or frames.shape[0] < 2:
            raise ValueError(f"need a (n>=2, h, w) frame stack, got shape {frames.shape}")
        if stamps.shape != (frames.shape[0],):
            raise ValueError("need exactly one timestamp per frame")
        if not np.all(np.diff(stamps) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if frames.min() < 0.0 or frames.max() > 1.0 or not np.all(np.isfinite(frames)):
            raise ValueError("frame values must be finite and in [0, 1]")
        frames.flags.writeable = False
        stamps.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "timestamps", stamps)

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    def __len__(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class SimConfig:
    """Simulation knobs. Noise is off unless a seed is supplied."""

    c_true: float = 0.3
    epsilon_log: float = EPS_LOG
    blur_span: int = 7
    t_jitter: float = 0.0  # timestamp noise, std as a fraction of the frame gap
    c_jitter: float = 0.0  # per-pixel threshold noise, std as a fraction of c_true
    seed: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.c_true) and self.c_true > 0):
            raise InvalidThresholdError(f"c_true must be > 0, got {self.c_true}")
        if not (0 < self.epsilon_log < 1):
            raise ValueError(f"epsilon_log must be in (0, 1), got {self.epsilon_log}")
        if self.blur_span < 1:
            raise ValueError(f"blur_span must be >= 1, got {self.blur_span}")
        if self.t_jitter < 0 or self.c_jitter < 0:
            raise ValueError("noise magnitudes must be non-negative")
        if (self.t_jitter > 0 or self.c_jitter > 0) and self.seed is None:
            raise ValueError("noise requires an explicit seed for reproducibility")


def simulate_events(video: SharpVideo, cfg: SimConfig) -> EventStream:
    """Threshold-crossing event generation over the whole video.

    Log intensity is taken as linear in time between consecutive frames, so
    each interval emits floor(|travel| / c) events per pixel at analytically
    interpolated times. The stream's coverage is the full video span even
    when no pixel fires.
    """
    logs = np.log(np.maximum(video.frames, cfg.epsilon_log))
    n, h, w = logs.shape
    npix = h * w
    logs = logs.reshape(n, npix)
    stamps = video.timestamps

    rng = np.random.default_rng(cfg.seed) if cfg.seed is not None else None
    if rng is not None and cfg.c_jitter > 0:
        c_pixel = cfg.c_true * np.maximum(1.0 + cfg.c_jitter * rng.standard_normal(npix), 0.05)
    else:
        c_pixel = np.full(npix, cfg.c_true)

    ref = logs[0].copy()
    out_t, out_pix, out_sig = [], [], []
    for i in range(1, n):
        prev, cur = logs[i - 1], logs[i]
        d = cur - ref
        k = np.floor(np.abs(d) / c_pixel).astype(np.int64)
        total = int(k.sum())
        if total:
            sign = np.where(d >= 0, 1, -1)
            pix = np.repeat(np.arange(npix), k)
            offsets = np.repeat(np.cumsum(k) - k, k)
            j = np.arange(total) - offsets + 1  # 1-based crossing index
            levels = ref[pix] + sign[pix] * c_pixel[pix] * j
            travel = cur[pix] - prev[pix]
            frac = np.zeros(total)
            moving = travel != 0
            frac[moving] = (levels[moving] - prev[pix[moving]]) / travel[moving]
            dt = stamps[i] - stamps[i - 1]
            t = stamps[i - 1] + np.clip(frac, 0.0, 1.0) * dt
            if rng is not None and cfg.t_jitter > 0:
                t = np.clip(t + rng.normal(0.0, cfg.t_jitter * dt, total), stamps[i - 1], stamps[i])
            out_t.append(t)
            out_pix.append(pix)
            out_sig.append(sign[pix])
            ref = ref + sign * k * c_pixel
    if out_t:
        ts = np.concatenate(out_t)
        pix = np.concatenate(out_pix)
        sig = np.concatenate(out_sig)
    else:
        ts = np.empty(0)
        pix = np.empty(0, dtype=np.int64)
        sig = np.empty(0, dtype=np.int64)
    return EventStream(
        w, h, pix % w, pix // w, ts, sig, t_min=float(stamps[0]), t_max=float(stamps[-1])
    )


def make_blurry(video: SharpVideo, span: int, start: int = 0) -> Frame:
    """Average `span` consecutive sharp frames into one exposure.

    The exposure window runs from the first to the last averaged timestamp.
    A span of 1 degenerates to a single instant, so the window is widened to
    the neighboring frame gap, centered on the frame, to keep duration
    positive; the pixels are the sharp frame unchanged.
    """
    span = int(span)
    if span < 1:
        raise ValueError(f"span must be >= 1, got {span}")
    if start < 0 or start + span > len(video):
        raise ValueError(
            f"span {span} starting at {start} exceeds the {len(video)} available frames"
        )
    pixels = video.frames[start : start + span].mean(axis=0)
    if span == 1:
        t0 = video.timestamps[start]
        gap = (
            video.timestamps[start + 1] - t0
            if start + 1 < len(video)
            else t0 - video.timestamps[start - 1]
        )
        return Frame(pixels, t0 - gap / 2.0, t0 + gap / 2.0)
    return Frame(
        pixels,
        float(video.timestamps[start]),
        float(video.timestamps[start + span - 1]),
    )


@dataclass(frozen=True)
class RoundTripReport:
    """Quality of blur and of recovery, against the ground-truth midpoint."""

    psnr_blurry: float
    ssim_blurry: float
    psnr_recovered: float
    ssim_recovered: float
    c_hat: float
    psnr_at_c_hat: float
    ssim_at_c_hat: float
    search: ThresholdSearchResult


def round_trip(
    video: SharpVideo, cfg: SimConfig, params: EnergyParams | None = None
) -> RoundTripReport:
    """Simulate, blur, recover with the true and the estimated threshold.

    Ground truth is the sharp frame nearest the exposure midpoint (exact for
    odd spans on a uniform clock). Recovery uses c_true for the upper bound
    and the energy search's c_hat for the end-to-end figure.
    """
    stream = simulate_events(video, cfg)
    blurry = make_blurry(video, cfg.blur_span)
    mid = blurry.midpoint
    gt_idx = int(np.argmin(np.abs(video.timestamps - mid)))
    gt = video.frames[gt_idx]

    recovered = recover_latent(blurry, stream, cfg.c_true)
    search = find_c(blurry, stream, params)
    at_hat = recover_latent(blurry, stream, search.c_hat)
    return RoundTripReport(
        psnr_blurry=psnr(blurry.pixels, gt),
        ssim_blurry=ssim(blurry.pixels, gt),
        psnr_recovered=psnr(recovered.pixels, gt),
        ssim_recovered=ssim(recovered.pixels, gt),
        c_hat=search.c_hat,
        psnr_at_c_hat=psnr(at_hat.pixels, gt),
        ssim_at_c_hat=ssim(at_hat.pixels, gt),
        search=search,
    )


def make_translating_texture(
    width: int = 240,
    height: int = 180,
    n_frames: int = 15,
    shift_per_frame: int = 2,
    dt: float = 1.0 / 240.0,
    seed: int = 7,
    n_patches: int = 140,
) -> SharpVideo:
    """Flat-shaded patchwork texture translating horizontally with wraparound.

    The scene is a nearest-seed partition of the image into constant-intensity
    patches, which gives crisp step edges everywhere: every edge both blurs
    visibly and fires a dense event line, the regime the threshold energy is
    built for. The seed distance wraps in x so the rolled frames contain no
    synthetic seam. Integer shifts keep the per-frame images exact copies of
    each other, so reconstruction error comes only from event quantization,
    never from resampling. Patch levels live inside [0.1, 0.9] to stay clear
    of the log floor and of saturation.
    """
    if n_patches < 2:
        raise ValueError(f"need at least 2 patches, got {n_patches}")
    rng = np.random.default_rng(seed)
    px = rng.uniform(0.0, width, n_patches)
    py = rng.uniform(0.0, height, n_patches)
    levels = rng.uniform(0.1, 0.9, n_patches)
    yy, xx = np.mgrid[0:height, 0:width]
    dx = np.abs(xx[..., None] - px)
    dx = np.minimum(dx, width - dx)  # x wraps with the roll
    d2 = dx * dx + (yy[..., None] - py) ** 2
    tex = levels[np.argmin(d2, axis=2)]
    frames = np.stack(
        [np.roll(tex, i * shift_per_frame, axis=1) for i in range(n_frames)]
    )
    return SharpVideo(frames, dt * np.arange(n_frames))
