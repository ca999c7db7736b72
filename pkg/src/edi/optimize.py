"""Contrast-threshold estimation by one-dimensional energy minimization.

The recovered latent image depends on a single unknown scalar, the contrast
threshold c. Deblurring with the right c produces a clean image; a wrong c
leaves residual blur or amplifies event noise, both of which raise total
variation. The energy adds a negatively weighted cross-correlation between
the latent image's edges and the edges implied by event density, so that
structure agreeing with the events lowers the energy rather than raising it.
A log-spaced coarse scan locates the basin and golden-section refinement
narrows it below tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, OptimizationError
from .events import EventStream, TimelineMap, index_events
from .model import ExposurePlan, Frame, LatentFrame, recover_latent, recover_pixels

__all__ = [
    "EdgeMap",
    "EnergyParams",
    "ThresholdSearchResult",
    "edge_map",
    "sobel",
    "phi_edge",
    "phi_tv",
    "energy",
    "energy_function",
    "search_threshold",
    "find_c",
]

FLAT_CURVE_SPAN = 1e-12


@dataclass(frozen=True)
class EdgeMap:
    """Signed, exponentially time-weighted event accumulation at one instant.

    Values keep the polarity sign; the Sobel step downstream responds to
    magnitude structure, so taking absolute values here would discard
    cancellation between opposite-polarity events.
    """

    values: np.ndarray
    t: float

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 2:
            raise ValueError(f"edge map must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("edge map values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class EnergyParams:
    """Weights and search controls for the threshold energy.

    ``lam`` is the edge-term weight (named so because ``lambda`` is reserved);
    it must not be positive, since edge alignment should lower the energy.
    Both energy terms are divided by pixel count, which keeps one default
    weight usable across image sizes. ``alpha`` controls how sharply the
    edge map forgets events far from the evaluation instant; the default
    keeps the memory to a small fraction of the exposure, which marks edges
    at their final position instead of smearing the whole motion band.
    """

    lam: float = -0.7
    alpha: float = 30.0
    c_lo: float = 0.01
    c_hi: float = 1.0
    tol: float = 1e-3
    grid_n: int = 20

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam <= 0):
            raise ValueError(f"lam must be <= 0 (edge alignment rewards), got {self.lam}")
        if not (self.alpha > 0):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not (0 < self.c_lo < self.c_hi):
            raise ValueError(f"need 0 < c_lo < c_hi, got [{self.c_lo}, {self.c_hi}]")
        if not (self.tol > 0):
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.grid_n < 3:
            raise ValueError(f"grid_n must be >= 3, got {self.grid_n}")


@dataclass(frozen=True)
class ThresholdSearchResult:
    """Estimated threshold plus every (c, energy) pair the search evaluated."""

    c_hat: float
    curve: np.ndarray  # shape (n, 2), sorted by c
    flat: bool
    n_evaluations: int


def edge_map(
    timelines: TimelineMap, t: float, alpha: float, window: tuple[float, float]
) -> EdgeMap:
    """Per-pixel signed sum of in-window events weighted by time distance.

    Each event contributes sigma * exp(-alpha * |t - t_i| / T) where T is the
    window duration; alpha is therefore a decay per normalized time, so the
    same alpha works for microsecond and second exposures alike.
    """
    if not (alpha > 0):
        raise ValueError(f"alpha must be > 0, got {alpha}")
    start, end = float(window[0]), float(window[1])
    if not (end > start):
        raise ValueError(f"window [{start}, {end}] must have positive duration")
    ts, pix, sig = timelines.time_ordered()
    inside = (ts >= start) & (ts <= end)
    npix = timelines.width * timelines.height
    weights = sig[inside] * np.exp(-alpha * np.abs(t - ts[inside]) / (end - start))
    values = np.bincount(pix[inside], weights=weights, minlength=npix)
    return EdgeMap(values.reshape(timelines.height, timelines.width), t=float(t))


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


def sobel(grid) -> np.ndarray:
    """Gradient magnitude under the 3x3 Sobel kernels.

    Borders replicate the nearest interior pixel. The raw magnitude is
    returned; normalization is left to the caller because the right scaling
    depends on what the map is compared against.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or min(grid.shape) < 3:
        raise ValueError(f"need a 2-D grid of at least 3x3, got shape {grid.shape}")
    p = np.pad(grid, 1, mode="edge")
    # row sums with [1,2,1] smoothing and [-1,0,1] difference, then transpose roles
    smooth_y = p[:-2, :] + 2.0 * p[1:-1, :] + p[2:, :]
    gx = smooth_y[:, 2:] - smooth_y[:, :-2]
    smooth_x = p[:, :-2] + 2.0 * p[:, 1:-1] + p[:, 2:]
    gy = smooth_x[2:, :] - smooth_x[:-2, :]
    return np.hypot(gx, gy)


def _pixels_of(latent) -> np.ndarray:
    return latent.pixels if isinstance(latent, LatentFrame) else np.asarray(latent, float)


def phi_edge(latent, edges: EdgeMap) -> float:
    """Cross-correlation of the latent image's edges with the event edges.

    The event-side Sobel map is scaled to peak 1 so the term is insensitive
    to event density; the latent-side map stays raw so the term carries the
    same intensity units as the total-variation term and one weight covers
    both. A flat edge map contributes zero.
    """
    pixels = _pixels_of(latent)
    if pixels.shape != edges.values.shape:
        raise DimensionMismatchError(
            f"latent {pixels.shape} vs edge map {edges.values.shape}"
        )
    guide = sobel(edges.values)
    peak = guide.max()
    if peak > 0:
        guide = guide / peak
    return float(np.sum(sobel(pixels) * guide))


def phi_tv(latent) -> float:
    """Anisotropic total variation: L1 of forward differences, zero at the
    last row and column."""
    pixels = _pixels_of(latent)
    return float(
        np.abs(np.diff(pixels, axis=0)).sum() + np.abs(np.diff(pixels, axis=1)).sum()
    )


def energy(c: float, blurry: Frame, stream: EventStream, params: EnergyParams) -> float:
    """Threshold-selection objective at one c: smoothness plus weighted edge
    agreement of the latent image recovered with that c, at the midpoint."""
    latent = recover_latent(blurry, stream, c)
    edges = edge_map(
        index_events(stream),
        blurry.midpoint,
        params.alpha,
        (blurry.exposure_start, blurry.exposure_end),
    )
    npix = blurry.pixels.size
    return (phi_tv(latent) + params.lam * phi_edge(latent, edges)) / npix


def search_threshold(fn, params: EnergyParams) -> ThresholdSearchResult:
    """Minimize a scalar function on [c_lo, c_hi]: log-spaced coarse scan,
    then golden-section refinement between the bracketing grid neighbors.

    ``fn`` may return non-finite values at some points; the search treats
    them as infinitely bad. All finite evaluations come back in the curve.
    """
    grid = np.geomspace(params.c_lo, params.c_hi, params.grid_n)
    evals: dict[float, float] = {}

    def f(c: float) -> float:
        c = float(c)
        if c not in evals:
            evals[c] = float(fn(c))
        v = evals[c]
        return v if np.isfinite(v) else np.inf

    grid_vals = np.array([f(c) for c in grid])
    if not np.any(np.isfinite(grid_vals)):
        raise OptimizationError(
            f"energy was non-finite at every coarse grid point in "
            f"[{params.c_lo}, {params.c_hi}]"
        )

    finite = grid_vals[np.isfinite(grid_vals)]
    flat = finite.size == grid_vals.size and float(finite.max() - finite.min()) <= FLAT_CURVE_SPAN

    if not flat:
        i = int(np.argmin(grid_vals))
        a = float(grid[max(i - 1, 0)])
        b = float(grid[min(i + 1, params.grid_n - 1)])
        invphi = (np.sqrt(5.0) - 1.0) / 2.0
        x1 = b - invphi * (b - a)
        x2 = a + invphi * (b - a)
        f1, f2 = f(x1), f(x2)
        while b - a > params.tol:
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - invphi * (b - a)
                f1 = f(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + invphi * (b - a)
                f2 = f(x2)

    curve = np.array(sorted((c, v) for c, v in evals.items()))
    finite_rows = curve[np.isfinite(curve[:, 1])]
    c_hat = float(grid[0]) if flat else float(finite_rows[np.argmin(finite_rows[:, 1]), 0])
    return ThresholdSearchResult(
        c_hat=c_hat, curve=curve, flat=flat, n_evaluations=len(evals)
    )


def energy_function(blurry: Frame, timelines: TimelineMap, params: EnergyParams):
    """Build the per-candidate evaluator with all c-independent work done.

    One exposure plan and one Sobel of the edge map are shared by every
    evaluation, so a candidate costs two exps and a few reductions instead
    of a full re-index of the stream. Both the threshold scan and the HTTP
    energy endpoint go through here, so their curves are bit-identical.
    """
    plan = ExposurePlan(timelines, blurry.exposure_start, blurry.exposure_end)
    edges = edge_map(
        timelines, plan.f, params.alpha, (blurry.exposure_start, blurry.exposure_end)
    )
    sobel_edges = sobel(edges.values)
    if sobel_edges.max() > 0:
        sobel_edges /= sobel_edges.max()
    npix = blurry.pixels.size

    def fn(c: float) -> float:
        latent = np.clip(recover_pixels(blurry.pixels, plan.integral_map(c)), 0.0, 1.0)
        cross = float(np.sum(sobel(latent) * sobel_edges))
        return (phi_tv(latent) + params.lam * cross) / npix

    return fn


def find_c(
    blurry: Frame, stream: EventStream, params: EnergyParams | None = None
) -> ThresholdSearchResult:
    """Estimate the contrast threshold for one blurry frame from its events."""
    params = params or EnergyParams()
    timelines = index_events(stream)
    if not stream.covers(blurry.exposure_start, blurry.exposure_end):
        # delegate for the precise error message
        recover_latent(blurry, stream, params.c_lo)
    return search_threshold(energy_function(blurry, timelines, params), params)
