"""Event-stream data model and per-pixel event integration.

An event camera reports, per pixel, the times at which log intensity moved
by at least the contrast threshold, together with the direction of the move
(polarity +1 or -1). Everything downstream (deblurring, rollout, threshold
search, simulation) consumes the signed per-pixel count E(t) of events
between a reference time f and t, which is a step function of t.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .errors import InvalidThresholdError, OutOfBoundsError

__all__ = [
    "Event",
    "EventStream",
    "PixelTimeline",
    "StepFunction",
    "TimelineMap",
    "index_events",
    "event_count_function",
    "truncate",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Event:
    """One polarity-signed intensity-change impulse at (x, y, t)."""

    x: int
    y: int
    t: float
    sigma: int

    def __post_init__(self):
        if self.sigma not in (-1, 1):
            raise ValueError(f"polarity must be -1 or +1, got {self.sigma}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"negative pixel coordinates ({self.x}, {self.y})")


def truncate(d: float, c: float) -> int:
    """Quantize a log-intensity change d against threshold c.

    Returns +1 if d >= c, -1 if d <= -c, and 0 inside the dead zone (-c, c).
    A zero result means no event is emitted.
    """
    if not c > 0:
        raise InvalidThresholdError(f"threshold must be > 0, got {c}")
    if d >= c:
        return 1
    if d <= -c:
        return -1
    return 0


class EventStream:
    """A time-sorted set of events on a fixed-size sensor.

    Events are stored as parallel arrays (column, row, time, polarity) sorted
    by time, with ties broken by (row, column, polarity). ``t_min``/``t_max``
    declare the interval the recording covers; they may extend beyond the
    first and last event (an empty stream still covers an interval).
    """

    __slots__ = ("width", "height", "xs", "ys", "ts", "sigmas", "t_min", "t_max")

    def __init__(self, width, height, xs, ys, ts, sigmas, t_min=None, t_max=None):
        if width <= 0 or height <= 0:
            raise ValueError(f"sensor dimensions must be positive, got {width}x{height}")
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        ts = np.asarray(ts, dtype=np.float64)
        sigmas = np.asarray(sigmas, dtype=np.int64)
        if not (xs.shape == ys.shape == ts.shape == sigmas.shape) or xs.ndim != 1:
            raise ValueError("event columns must be 1-D arrays of equal length")
        if ts.size and not np.all(np.isfinite(ts)):
            raise ValueError("event timestamps must be finite")
        bad = (xs < 0) | (xs >= width) | (ys < 0) | (ys >= height)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise OutOfBoundsError(
                f"event at ({xs[i]}, {ys[i]}) outside {width}x{height} sensor"
            )
        if sigmas.size and not np.isin(sigmas, (-1, 1)).all():
            raise ValueError("polarities must be -1 or +1")

        order = np.lexsort((sigmas, xs, ys, ts))
        xs, ys, ts, sigmas = xs[order], ys[order], ts[order], sigmas[order]

        if t_min is None:
            t_min = float(ts[0]) if ts.size else 0.0
        if t_max is None:
            t_max = float(ts[-1]) if ts.size else 0.0
        if t_min > t_max:
            raise ValueError(f"t_min {t_min} exceeds t_max {t_max}")
        if ts.size and (ts[0] < t_min or ts[-1] > t_max):
            raise ValueError("events fall outside the declared coverage interval")

        self.width = int(width)
        self.height = int(height)
        self.xs = _readonly(xs)
        self.ys = _readonly(ys)
        self.ts = _readonly(ts)
        self.sigmas = _readonly(sigmas)
        self.t_min = float(t_min)
        self.t_max = float(t_max)

    @classmethod
    def from_events(cls, width, height, events, t_min=None, t_max=None) -> "EventStream":
        events = list(events)
        return cls(
            width,
            height,
            [e.x for e in events],
            [e.y for e in events],
            [e.t for e in events],
            [e.sigma for e in events],
            t_min=t_min,
            t_max=t_max,
        )

    def __len__(self) -> int:
        return int(self.ts.size)

    def __iter__(self) -> Iterator[Event]:
        for x, y, t, s in zip(self.xs, self.ys, self.ts, self.sigmas):
            yield Event(int(x), int(y), float(t), int(s))

    def covers(self, start: float, end: float) -> bool:
        return self.t_min <= start and end <= self.t_max

    def __repr__(self) -> str:
        return (
            f"EventStream({self.width}x{self.height}, {len(self)} events, "
            f"coverage [{self.t_min:g}, {self.t_max:g}])"
        )


@dataclass(frozen=True)
class PixelTimeline:
    """Time-sorted signed event times for one pixel.

    Canonical form: strictly increasing times; simultaneous events at the
    same pixel are merged by summing polarities, and a zero sum drops the
    entry entirely. Merged entries can therefore carry |sigma| > 1.
    """

    times: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    sigmas: np.ndarray = field(default_factory=lambda: _EMPTY_I)

    def __post_init__(self):
        object.__setattr__(self, "times", _readonly(np.asarray(self.times, dtype=np.float64)))
        object.__setattr__(self, "sigmas", _readonly(np.asarray(self.sigmas, dtype=np.int64)))
        if self.times.shape != self.sigmas.shape:
            raise ValueError("times and sigmas must have equal length")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("timeline times must be strictly increasing")
        if np.any(self.sigmas == 0):
            raise ValueError("canonical timelines hold no zero-sum entries")

    @classmethod
    def canonical(cls, times, sigmas) -> "PixelTimeline":
        """Sort, merge simultaneous entries by polarity sum, drop zero sums."""
        times = np.asarray(times, dtype=np.float64)
        sigmas = np.asarray(sigmas, dtype=np.int64)
        if times.size == 0:
            return cls()
        order = np.argsort(times, kind="stable")
        times, sigmas = times[order], sigmas[order]
        first = np.r_[True, times[1:] != times[:-1]]
        starts = np.flatnonzero(first)
        merged = np.add.reduceat(sigmas, starts)
        keep = merged != 0
        return cls(times[starts][keep], merged[keep])

    def __len__(self) -> int:
        return int(self.times.size)

    def slice(self, start: float, end: float) -> "PixelTimeline":
        """Restrict to events with start <= t <= end."""
        lo = np.searchsorted(self.times, start, side="left")
        hi = np.searchsorted(self.times, end, side="right")
        return PixelTimeline(self.times[lo:hi], self.sigmas[lo:hi])


_EMPTY_F = _readonly(np.empty(0, dtype=np.float64))
_EMPTY_I = _readonly(np.empty(0, dtype=np.int64))
EMPTY_TIMELINE = PixelTimeline()


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous piecewise-constant function of time.

    ``values`` has one more entry than ``breakpoints``: values[k] holds on
    [breakpoints[k-1], breakpoints[k]) with values[0] extending to -inf and
    values[-1] to +inf.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "breakpoints", _readonly(np.asarray(self.breakpoints, dtype=np.float64))
        )
        object.__setattr__(self, "values", _readonly(np.asarray(self.values, dtype=np.int64)))
        if self.values.size != self.breakpoints.size + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if self.breakpoints.size > 1 and not np.all(np.diff(self.breakpoints) > 0):
            raise ValueError("breakpoints must be strictly increasing")

    def __call__(self, t):
        idx = np.searchsorted(self.breakpoints, t, side="right")
        out = self.values[idx]
        return int(out) if np.isscalar(t) else out


def event_count_function(timeline: PixelTimeline, f: float) -> StepFunction:
    """Signed event count E(t) between reference time f and t for one pixel.

    E(t) sums polarities over events with f < t_i <= t when t >= f, and is
    minus the sum over (t, f] when t < f, so E(f) = 0 exactly. Equivalently
    E(t) = S(t) - S(f) where S is the running polarity sum, which is the
    form used here.
    """
    if not np.isfinite(f):
        raise ValueError(f"reference time must be finite, got {f}")
    cum = np.concatenate(([0], np.cumsum(timeline.sigmas)))
    s_f = cum[np.searchsorted(timeline.times, f, side="right")]
    return StepFunction(timeline.times, cum - s_f)


class TimelineMap(Mapping):
    """Per-pixel canonical timelines for one event stream.

    Acts as a mapping from (x, y) to :class:`PixelTimeline`; pixels without
    events yield the empty timeline. Also exposes the flat time-ordered
    event arrays that vectorized operations consume.
    """

    def __init__(self, width: int, height: int, ts, pix, sigmas):
        self.width = int(width)
        self.height = int(height)
        # canonical events sorted by time, pixel id = y * width + x
        self._ts = _readonly(np.asarray(ts, dtype=np.float64))
        self._pix = _readonly(np.asarray(pix, dtype=np.int64))
        self._sigmas = _readonly(np.asarray(sigmas, dtype=np.int64))
        order = np.lexsort((self._ts, self._pix))
        by_pix = self._pix[order]
        starts = np.flatnonzero(np.r_[True, by_pix[1:] != by_pix[:-1]]) if by_pix.size else np.empty(0, np.int64)
        self._by_pixel_order = _readonly(order)
        self._group_of: dict[int, tuple[int, int]] = {}
        bounds = np.r_[starts, by_pix.size]
        for k, s in enumerate(starts):
            self._group_of[int(by_pix[s])] = (int(bounds[k]), int(bounds[k + 1]))

    @property
    def n_events(self) -> int:
        """Canonical event count (after merging simultaneous pairs)."""
        return int(self._ts.size)

    def time_ordered(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(times, pixel ids, polarity sums) sorted by time."""
        return self._ts, self._pix, self._sigmas

    def __getitem__(self, key: tuple[int, int]) -> PixelTimeline:
        x, y = key
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise KeyError(key)
        span = self._group_of.get(y * self.width + x)
        if span is None:
            return EMPTY_TIMELINE
        lo, hi = span
        idx = self._by_pixel_order[lo:hi]
        return PixelTimeline(self._ts[idx], self._sigmas[idx])

    def __iter__(self) -> Iterator[tuple[int, int]]:
        for pid in self._group_of:
            yield (pid % self.width, pid // self.width)

    def __len__(self) -> int:
        return len(self._group_of)


def index_events(stream: EventStream) -> TimelineMap:
    """Group a stream into canonical per-pixel timelines.

    Simultaneous events at one pixel are merged by polarity sum; a net-zero
    merge drops the entry, so the canonical count can be lower than the raw
    one. Raises :class:`OutOfBoundsError` for events off the sensor (cannot
    happen for a validated stream, checked anyway since the map is the entry
    point for all integrals).
    """
    bad = (stream.xs < 0) | (stream.xs >= stream.width) | (stream.ys < 0) | (stream.ys >= stream.height)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise OutOfBoundsError(
            f"event at ({stream.xs[i]}, {stream.ys[i]}) outside "
            f"{stream.width}x{stream.height} sensor"
        )
    pix = stream.ys * stream.width + stream.xs
    order = np.lexsort((stream.ts, pix))
    pix_s = pix[order]
    ts_s = stream.ts[order]
    sig_s = stream.sigmas[order]
    if ts_s.size:
        first = np.r_[True, (pix_s[1:] != pix_s[:-1]) | (ts_s[1:] != ts_s[:-1])]
        starts = np.flatnonzero(first)
        merged = np.add.reduceat(sig_s, starts)
        keep = merged != 0
        ts_c, pix_c, sig_c = ts_s[starts][keep], pix_s[starts][keep], merged[keep]
        back = np.argsort(ts_c, kind="stable")
        ts_c, pix_c, sig_c = ts_c[back], pix_c[back], sig_c[back]
    else:
        ts_c, pix_c, sig_c = ts_s, pix_s, sig_s
    return TimelineMap(stream.width, stream.height, ts_c, pix_c, sig_c)
