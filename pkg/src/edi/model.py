"""Blur-to-sharp recovery and event-rate video rollout.

A blurry frame is the time average of a latent sharp video over its exposure
window. Events report log-intensity steps of size c, so between the window
midpoint f and any time t the latent image satisfies
L(t) = L(f) * exp(c * E(t)) with E the signed per-pixel event count. Plugging
that into the average gives, per pixel,

    B = L(f) * (1/T) * integral over the window of exp(c * E(t)) dt

and the integral is an exact finite sum because E(t) is a step function.
Dividing B by the integral recovers the sharp frame at f; re-applying the
exponential factor rolls it to any other time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CoverageError,
    InvalidThresholdError,
    InvalidWindowError,
)
from .events import EventStream, PixelTimeline, TimelineMap, index_events

__all__ = [
    "EPS_LOG",
    "Frame",
    "LatentFrame",
    "LatentVideo",
    "ExposurePlan",
    "double_integral_term",
    "recover_pixels",
    "recover_latent",
    "rollout_values",
    "rollout",
    "default_sample_times",
    "reconstruct_sequence",
]

# log floor: half an 8-bit quantization level, keeps log(B) finite for B = 0
EPS_LOG = 1.0 / (2 * 255)


def _check_threshold(c: float) -> float:
    if not (np.isfinite(c) and c > 0):
        raise InvalidThresholdError(f"threshold must be finite and > 0, got {c}")
    return float(c)


def _check_pixels(pixels) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.size == 0:
        raise ValueError(f"pixel grid must be 2-D and non-empty, got shape {pixels.shape}")
    if not np.all(np.isfinite(pixels)):
        raise ValueError("pixel values must be finite")
    if pixels.min() < 0.0 or pixels.max() > 1.0:
        raise ValueError("pixel values must lie in [0, 1]")
    out = np.ascontiguousarray(pixels)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Frame:
    """A blurry exposure: averaged intensities plus the window that made them."""

    pixels: np.ndarray
    exposure_start: float
    exposure_end: float

    def __post_init__(self):
        object.__setattr__(self, "pixels", _check_pixels(self.pixels))
        if not (self.exposure_end > self.exposure_start):
            raise InvalidWindowError(
                f"exposure window [{self.exposure_start}, {self.exposure_end}] "
                "must have positive duration"
            )

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.exposure_start + self.exposure_end)

    @property
    def duration(self) -> float:
        return self.exposure_end - self.exposure_start


@dataclass(frozen=True)
class LatentFrame:
    """A recovered sharp image at one instant.

    ``n_saturated`` counts pixels the exponential pushed outside [0, 1]
    before clamping; it is diagnostic only.
    """

    pixels: np.ndarray
    t: float
    c_used: float
    n_saturated: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pixels", _check_pixels(self.pixels))


@dataclass(frozen=True)
class LatentVideo:
    """Latent frames rolled out from one anchor with one shared threshold."""

    frames: tuple[LatentFrame, ...]
    source_frame_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        ts = [fr.t for fr in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("latent frames must have strictly increasing timestamps")
        cs = {fr.c_used for fr in self.frames}
        if len(cs) > 1:
            raise ValueError(f"all frames in a video must share one threshold, got {cs}")

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([fr.t for fr in self.frames])


def double_integral_term(
    timeline: PixelTimeline, frame_window: tuple[float, float], f: float, c: float
) -> float:
    """(1/T) * integral of exp(c * E(t)) over the window, as an exact sum.

    E(t) is the signed event count referenced at f, constant between event
    times, so the integral is sum_k dt_k * exp(c * level_k) over the segments
    the in-window events cut the window into.
    """
    start, end = float(frame_window[0]), float(frame_window[1])
    if not (end > start):
        raise InvalidWindowError(f"window [{start}, {end}] must have positive duration")
    c = _check_threshold(c)
    inside = timeline.slice(start, end)
    edges = np.concatenate(([start], inside.times, [end]))
    levels = np.concatenate(([0], np.cumsum(inside.sigmas)))
    s_f = levels[np.searchsorted(inside.times, f, side="right")]
    total = float(np.diff(edges) @ np.exp(c * (levels - s_f)))
    return total / (end - start)


class ExposurePlan:
    """Precomputed per-pixel segment data for one frame window.

    Splitting the window at every in-window event time once makes each
    threshold evaluation two array exps and a bincount, which is what lets
    the threshold search and the interactive server sweep c cheaply. Levels
    are stored relative to the reference f, so no per-c re-indexing happens.
    """

    def __init__(self, timelines: TimelineMap, start: float, end: float, f: float | None = None):
        if not (end > start):
            raise InvalidWindowError(f"window [{start}, {end}] must have positive duration")
        self.start = float(start)
        self.end = float(end)
        self.f = 0.5 * (self.start + self.end) if f is None else float(f)
        self.width = timelines.width
        self.height = timelines.height
        self.npix = self.width * self.height
        self.T = self.end - self.start

        ts, pix, sig = timelines.time_ordered()
        self._all_ts, self._all_pix, self._all_sig = ts, pix, sig

        win = (ts >= self.start) & (ts <= self.end)
        tw, pw, sw = ts[win], pix[win], sig[win]
        self.n_window_events = int(np.abs(sw).sum())

        order = np.lexsort((tw, pw))
        tw, pw, sw = tw[order], pw[order], sw[order]
        if tw.size:
            first = np.r_[True, pw[1:] != pw[:-1]]
            starts = np.flatnonzero(first)
            counts = np.diff(np.r_[starts, tw.size])
            cum = np.cumsum(sw)
            base = np.repeat(cum[starts] - sw[starts], counts)
            levels_after = cum - base
        else:
            first = np.empty(0, dtype=bool)
            levels_after = sw

        # S(f) per pixel from in-window events at or before f
        upto_f = tw <= self.f
        s_f = np.zeros(self.npix, dtype=np.int64)
        if upto_f.any():
            np.add.at(s_f, pw[upto_f], sw[upto_f])
        self._s_f_window = s_f

        # one segment per event (event time to next event or window end) plus
        # a leading segment per active pixel (window start to first event)
        next_t = np.empty_like(tw)
        if tw.size:
            same = pw[1:] == pw[:-1]
            next_t[:-1] = np.where(same, tw[1:], self.end)
            next_t[-1] = self.end
            lead_pix = pw[first]
            lead_t0 = tw[first]
            seg_pix = np.concatenate([lead_pix, pw])
            seg_dt = np.concatenate([lead_t0 - self.start, next_t - tw])
            seg_level = np.concatenate([np.zeros(lead_pix.size, dtype=np.int64), levels_after])
        else:
            seg_pix = np.empty(0, dtype=np.int64)
            seg_dt = np.empty(0, dtype=np.float64)
            seg_level = np.empty(0, dtype=np.int64)
        self._seg_pix = seg_pix
        self._seg_dt = seg_dt
        self._seg_level = seg_level - s_f[seg_pix] if seg_pix.size else seg_level
        self._active = np.zeros(self.npix, dtype=bool)
        self._active[pw] = True

        # S(f) over the full stream, for rollouts that leave the window
        s_f_all = np.zeros(self.npix, dtype=np.int64)
        before = ts <= self.f
        if before.any():
            np.add.at(s_f_all, pix[before], sig[before])
        self._s_f_all = s_f_all

    def integral_map(self, c: float) -> np.ndarray:
        """(1/T) * integral of exp(c * E(t)) dt for every pixel at once."""
        c = _check_threshold(c)
        out = np.ones(self.npix, dtype=np.float64)
        if self._seg_pix.size:
            contrib = np.bincount(
                self._seg_pix,
                weights=self._seg_dt * np.exp(c * self._seg_level),
                minlength=self.npix,
            )
            out[self._active] = contrib[self._active] / self.T
        return out.reshape(self.height, self.width)

    def count_map(self, t: float) -> np.ndarray:
        """E(t) for every pixel, referenced at f, using the full stream."""
        a_t = np.zeros(self.npix, dtype=np.int64)
        upto = self._all_ts <= t
        if upto.any():
            np.add.at(a_t, self._all_pix[upto], self._all_sig[upto])
        return (a_t - self._s_f_all).reshape(self.height, self.width)


def recover_pixels(blurry_pixels: np.ndarray, integral_map: np.ndarray) -> np.ndarray:
    """Unclamped latent intensities: max(B, eps) divided by the integral term.

    This is the linear-space form of log(max(B, eps)) - log(integral); the
    division is used directly so a unit integral returns the input bit for
    bit, which the log/exp round trip would not.
    """
    return np.maximum(blurry_pixels, EPS_LOG) / integral_map


def _clamp_counted(raw: np.ndarray) -> tuple[np.ndarray, int]:
    n_sat = int(np.count_nonzero((raw < 0.0) | (raw > 1.0)))
    return np.clip(raw, 0.0, 1.0), n_sat


def recover_latent(blurry: Frame, stream: EventStream, c: float) -> LatentFrame:
    """Sharp image at the exposure midpoint from one blurry frame plus events."""
    c = _check_threshold(c)
    if stream.width != blurry.width or stream.height != blurry.height:
        raise ValueError(
            f"stream sensor {stream.width}x{stream.height} does not match "
            f"frame {blurry.width}x{blurry.height}"
        )
    if not stream.covers(blurry.exposure_start, blurry.exposure_end):
        missing = []
        if stream.t_min > blurry.exposure_start:
            missing.append(f"[{blurry.exposure_start:g}, {stream.t_min:g})")
        if stream.t_max < blurry.exposure_end:
            missing.append(f"({stream.t_max:g}, {blurry.exposure_end:g}]")
        raise CoverageError(
            f"event stream covers [{stream.t_min:g}, {stream.t_max:g}] but the "
            f"exposure needs {' and '.join(missing)}"
        )
    plan = ExposurePlan(index_events(stream), blurry.exposure_start, blurry.exposure_end)
    return recover_from_plan(blurry, plan, c)


def recover_from_plan(blurry: Frame, plan: ExposurePlan, c: float) -> LatentFrame:
    raw = recover_pixels(blurry.pixels, plan.integral_map(c))
    pixels, n_sat = _clamp_counted(raw)
    return LatentFrame(pixels, t=plan.f, c_used=float(c), n_saturated=n_sat)


def rollout_values(
    anchor_pixels: np.ndarray,
    f: float,
    timelines: TimelineMap,
    c: float,
    sample_times,
) -> np.ndarray:
    """Unclamped L(t) = L(f) * exp(c * E(t)) stacked over the sample times.

    One pass over the time-sorted events updates a running count image; each
    sample reads the count relative to its value at f.
    """
    c = _check_threshold(c)
    sample_times = np.asarray(sample_times, dtype=np.float64)
    if sample_times.ndim != 1:
        raise ValueError("sample times must be a 1-D sequence")
    npix = timelines.width * timelines.height
    ts, pix, sig = timelines.time_ordered()

    a_f = np.zeros(npix, dtype=np.int64)
    upto = ts <= f
    if upto.any():
        np.add.at(a_f, pix[upto], sig[upto])

    order = np.argsort(sample_times, kind="stable")
    flat_anchor = np.asarray(anchor_pixels, dtype=np.float64).reshape(-1)
    out = np.empty((sample_times.size, npix), dtype=np.float64)
    running = np.zeros(npix, dtype=np.int64)
    p = 0
    for k in order:
        t = sample_times[k]
        q = int(np.searchsorted(ts, t, side="right"))
        if q > p:
            np.add.at(running, pix[p:q], sig[p:q])
            p = q
        out[k] = flat_anchor * np.exp(c * (running - a_f))
    h, w = timelines.height, timelines.width
    return out.reshape(sample_times.size, h, w)


def rollout(
    anchor: LatentFrame,
    timelines: TimelineMap,
    c: float,
    sample_times,
    source_frame_id: int = 0,
) -> LatentVideo:
    """Roll an anchor image to each sample time through the event stream."""
    sample_times = np.asarray(sample_times, dtype=np.float64)
    if sample_times.size > 1 and not np.all(np.diff(sample_times) > 0):
        raise ValueError("sample times must be strictly increasing")
    values = rollout_values(anchor.pixels, anchor.t, timelines, c, sample_times)
    frames = []
    for t, raw in zip(sample_times, values):
        pixels, n_sat = _clamp_counted(raw)
        frames.append(LatentFrame(pixels, t=float(t), c_used=float(c), n_saturated=n_sat))
    return LatentVideo(tuple(frames), source_frame_id=source_frame_id)


def default_sample_times(
    stream: EventStream, window: tuple[float, float], events_per_frame: int
) -> np.ndarray:
    """Sample timestamps: one after every k-th in-window event, plus f.

    The global event count across all pixels drives the spacing, so dense
    motion yields dense output frames. The window midpoint is always
    included; duplicates collapse.
    """
    k = int(events_per_frame)
    if k < 1:
        raise ValueError(f"events_per_frame must be >= 1, got {events_per_frame}")
    start, end = float(window[0]), float(window[1])
    if not (end > start):
        raise InvalidWindowError(f"window [{start}, {end}] must have positive duration")
    f = 0.5 * (start + end)
    lo = np.searchsorted(stream.ts, start, side="left")
    hi = np.searchsorted(stream.ts, end, side="right")
    marks = stream.ts[lo:hi][k - 1 :: k]
    return np.unique(np.concatenate([marks, [f]]))


def reconstruct_sequence(
    frames: list[Frame],
    stream: EventStream,
    c: float,
    events_per_frame: int,
) -> list[LatentVideo]:
    """Deblur every frame, then roll each out over its share of sample times.

    Sample times span the whole stream coverage (every k-th event plus each
    exposure midpoint) and each one is served by the frame whose midpoint is
    nearest, ties going to the earlier frame. Every rollout restarts from its
    own recovered anchor, so error does not accumulate along the sequence.
    """
    if not frames:
        raise ValueError("need at least one frame to reconstruct")
    c = _check_threshold(c)
    k = int(events_per_frame)
    if k < 1:
        raise ValueError(f"events_per_frame must be >= 1, got {events_per_frame}")
    mids = np.array([fr.midpoint for fr in frames])
    if np.any(np.diff(mids) <= 0):
        raise ValueError("frames must be sorted by strictly increasing midpoint")

    timelines = index_events(stream)
    marks = stream.ts[k - 1 :: k]
    samples = np.unique(np.concatenate([marks, mids]))

    # nearest midpoint, equidistant samples go to the earlier frame
    right = np.searchsorted(mids, samples, side="left")
    left = np.clip(right - 1, 0, len(frames) - 1)
    right = np.clip(right, 0, len(frames) - 1)
    d_left = np.abs(samples - mids[left])
    d_right = np.abs(mids[right] - samples)
    owner = np.where(d_left <= d_right, left, right)

    videos = []
    for i, frame in enumerate(frames):
        if not stream.covers(frame.exposure_start, frame.exposure_end):
            raise CoverageError(
                f"stream coverage [{stream.t_min:g}, {stream.t_max:g}] does not "
                f"span frame {i} exposure [{frame.exposure_start:g}, {frame.exposure_end:g}]"
            )
        plan = ExposurePlan(timelines, frame.exposure_start, frame.exposure_end)
        anchor = recover_from_plan(frame, plan, c)
        videos.append(
            rollout(anchor, timelines, c, samples[owner == i], source_frame_id=i)
        )
    return videos
