"""Sharp-image and high-frame-rate video recovery from blur plus events."""

from .errors import (
    CoverageError,
    DimensionMismatchError,
    EdiError,
    EventFormatError,
    InvalidThresholdError,
    InvalidWindowError,
    ManifestError,
    OptimizationError,
    OutOfBoundsError,
)
from .events import (
    Event,
    EventStream,
    PixelTimeline,
    StepFunction,
    TimelineMap,
    event_count_function,
    index_events,
    truncate,
)

__version__ = "0.1.0"
