"""Plain-text event files, frame manifests, and 8-bit grayscale image IO.

The event format is one event per line, `t x y p`, with an optional leading
`width height` line; timestamps in float seconds, polarity p in {0, 1}
standing for -1/+1. Everything is whitespace-separated text so artifacts
diff cleanly and the simulator can write them with no dependencies.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import EventFormatError, ManifestError
from .events import EventStream
from .model import Frame

__all__ = [
    "SequenceBundle",
    "parse_events",
    "write_events",
    "parse_frames_manifest",
    "write_frames_manifest",
    "find_exposure_overlaps",
    "to_uint8",
    "write_gray_png",
    "load_gray_image",
]


def parse_events(path) -> EventStream:
    """Read a text event file into a validated stream.

    Blank lines and `#` comments are skipped, except a `# coverage a b`
    comment, which declares the recording span (observed time without
    events is information). If the size header is absent the sensor is
    sized to the largest coordinate seen, which loses nothing for synthetic
    files but cannot represent silent border pixels. Files whose timestamps
    are not sorted load fine; the descent count is reported in a warning
    because it usually means concatenated recordings.
    """
    path = Path(path)
    width = height = None
    t_min = t_max = None
    xs: list[int] = []
    ys: list[int] = []
    ts: list[float] = []
    sigmas: list[int] = []
    descents = 0
    with path.open() as fh:
        for line_number, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                # recognized metadata comment: "# coverage <t_min> <t_max>"
                if len(parts) == 4 and parts[:2] == ["#", "coverage"]:
                    try:
                        t_min, t_max = float(parts[2]), float(parts[3])
                    except ValueError:
                        raise EventFormatError(
                            f"bad coverage comment {raw.strip()!r}",
                            line_number=line_number,
                        ) from None
                continue
            if len(parts) == 2 and width is None and not ts:
                try:
                    width, height = int(parts[0]), int(parts[1])
                except ValueError:
                    raise EventFormatError(
                        f"size header must be two integers, got {raw.strip()!r}",
                        line_number=line_number,
                    ) from None
                if width <= 0 or height <= 0:
                    raise EventFormatError(
                        f"size header must be positive, got {width} {height}",
                        line_number=line_number,
                    )
                continue
            if len(parts) != 4:
                raise EventFormatError(
                    f"expected `t x y p`, got {raw.strip()!r}", line_number=line_number
                )
            try:
                t = float(parts[0])
                x = int(parts[1])
                y = int(parts[2])
                p = int(parts[3])
            except ValueError:
                raise EventFormatError(
                    f"could not parse event line {raw.strip()!r}",
                    line_number=line_number,
                ) from None
            if p not in (0, 1):
                raise EventFormatError(
                    f"polarity must be 0 or 1, got {p}", line_number=line_number
                )
            if ts and t < ts[-1]:
                descents += 1
            xs.append(x)
            ys.append(y)
            ts.append(t)
            sigmas.append(2 * p - 1)
    if width is None:
        if not ts:
            raise EventFormatError(
                f"{path.name}: no size header and no events; sensor size unknown"
            )
        width = max(xs) + 1
        height = max(ys) + 1
    if descents:
        warnings.warn(
            f"{path.name}: {descents} out-of-order timestamp pairs; re-sorting",
            stacklevel=2,
        )
    return EventStream(width, height, xs, ys, ts, sigmas, t_min=t_min, t_max=t_max)


def write_events(stream: EventStream, path) -> None:
    """Write a stream in canonical time order with a size header.

    Timestamps are written with repr so a parse of the output reproduces the
    exact float values. The recording span goes into a coverage comment:
    silent-but-observed time matters for deblurring, and the event lines
    alone cannot express it.
    """
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"{stream.width} {stream.height}\n")
        fh.write(f"# coverage {float(stream.t_min)!r} {float(stream.t_max)!r}\n")
        for x, y, t, s in zip(stream.xs, stream.ys, stream.ts, stream.sigmas):
            fh.write(f"{float(t)!r} {x} {y} {(int(s) + 1) // 2}\n")


def parse_frames_manifest(path) -> list[Frame]:
    """Read `exposure_start exposure_end image_path` lines into Frames.

    Image paths are resolved relative to the manifest's directory; images
    are converted to 8-bit grayscale and scaled into [0, 1]. Overlapping
    exposure windows are legal (real shutters overlap) but reported in a
    warning so synthetic pipelines notice unintended spans.
    """
    path = Path(path)
    frames: list[Frame] = []
    with path.open() as fh:
        for line_number, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split(maxsplit=2)
            if len(parts) != 3:
                raise ManifestError(
                    f"line {line_number}: expected `start end image_path`, "
                    f"got {stripped!r}"
                )
            try:
                start = float(parts[0])
                end = float(parts[1])
            except ValueError:
                raise ManifestError(
                    f"line {line_number}: bad exposure times in {stripped!r}"
                ) from None
            if not end > start:
                raise ManifestError(
                    f"line {line_number}: exposure start {start} must precede end {end}"
                )
            image_path = Path(parts[2])
            if not image_path.is_absolute():
                image_path = path.parent / image_path
            try:
                pixels = load_gray_image(image_path)
            except FileNotFoundError:
                raise ManifestError(
                    f"line {line_number}: image file not found: {image_path}"
                ) from None
            frames.append(Frame(pixels, start, end))
    overlaps = find_exposure_overlaps(frames)
    if overlaps:
        warnings.warn(
            f"{path.name}: {len(overlaps)} overlapping exposure pair(s), "
            f"first at frames {overlaps[0]}",
            stacklevel=2,
        )
    return frames


def write_frames_manifest(path, entries) -> None:
    """Write (exposure_start, exposure_end, relative_image_path) rows."""
    path = Path(path)
    with path.open("w") as fh:
        for start, end, image_path in entries:
            fh.write(f"{float(start)!r} {float(end)!r} {image_path}\n")


def find_exposure_overlaps(frames) -> list[tuple[int, int]]:
    """Index pairs whose exposure windows overlap with positive measure."""
    order = sorted(range(len(frames)), key=lambda i: frames[i].exposure_start)
    out = []
    for a in range(len(order)):
        i = order[a]
        for b in range(a + 1, len(order)):
            j = order[b]
            if frames[j].exposure_start >= frames[i].exposure_end:
                break
            out.append((min(i, j), max(i, j)))
    return out


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize with round-half-up, so exported goldens
    are platform-stable (bankers rounding is not)."""
    clamped = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    return np.floor(clamped * 255.0 + 0.5).astype(np.uint8)


def write_gray_png(path, pixels: np.ndarray) -> None:
    Image.fromarray(to_uint8(pixels), mode="L").save(Path(path), format="PNG")


def load_gray_image(path) -> np.ndarray:
    """8-bit grayscale values scaled to [0, 1]; other modes are converted."""
    with Image.open(Path(path)) as img:
        gray = img.convert("L")
        return np.asarray(gray, dtype=np.float64) / 255.0


@dataclass(frozen=True)
class SequenceBundle:
    """One event file plus the blurry frames recorded alongside it.

    ``partial`` marks frames whose exposure window is not fully inside the
    stream's time coverage; the deblur path refuses those, but they stay
    loadable so a viewer can still show them.
    """

    events_path: Path
    frames_manifest_path: Path
    stream: EventStream
    frames: tuple[Frame, ...]
    partial: tuple[bool, ...]

    @classmethod
    def load(cls, events_path, frames_manifest_path) -> "SequenceBundle":
        events_path = Path(events_path)
        frames_manifest_path = Path(frames_manifest_path)
        stream = parse_events(events_path)
        frames = tuple(parse_frames_manifest(frames_manifest_path))
        partial = tuple(
            not stream.covers(f.exposure_start, f.exposure_end) for f in frames
        )
        return cls(
            events_path=events_path,
            frames_manifest_path=frames_manifest_path,
            stream=stream,
            frames=frames,
            partial=partial,
        )
