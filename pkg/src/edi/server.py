"""HTTP tuning service: reconstructed frames, energy curves, edge maps.

The browser tuner is a pure client of these endpoints. All heavy state is
immutable (the bundle and its per-frame exposure plans), so requests for
distinct cache keys may run concurrently; small locks only guard the cache
dictionaries and the one-job-per-frame optimizer table.
"""

from __future__ import annotations

import io
import threading
from concurrent.futures import Future

import numpy as np
from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import Response
from PIL import Image

from .events import index_events
from .formats import SequenceBundle, to_uint8
from .model import ExposurePlan, recover_from_plan, rollout_values
from .optimize import EnergyParams, edge_map, energy_function, find_c, sobel

__all__ = ["create_app", "C_QUANTUM", "T_QUANTUM"]

# cache keys quantize the sliders so scrubbing cannot grow the cache unboundedly
C_QUANTUM = 1e-4
T_QUANTUM = 1e-6


def _png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(pixels), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def create_app(
    bundle: SequenceBundle,
    params: EnergyParams | None = None,
    default_c: float | None = None,
) -> FastAPI:
    """Wire one loaded bundle into the tuner API.

    ``default_c`` seeds the UI slider; when omitted it falls to the log
    midpoint of the search range, which is a neutral starting point rather
    than a claim about the data.
    """
    params = params or EnergyParams()
    if default_c is None:
        default_c = float(np.sqrt(params.c_lo * params.c_hi))
    if not (params.c_lo <= default_c <= params.c_hi):
        raise ValueError(
            f"default c {default_c} outside [{params.c_lo}, {params.c_hi}]"
        )

    timelines = index_events(bundle.stream)
    app = FastAPI(title="edi tuner service")

    plans: dict[int, ExposurePlan] = {}
    evaluators: dict[int, object] = {}
    frame_png: dict[tuple[int, int, int], bytes] = {}
    blurry_png: dict[int, bytes] = {}
    edges_png: dict[tuple[int, int], bytes] = {}
    energy_rows: dict[tuple[int, int], list] = {}
    optimize_jobs: dict[int, Future] = {}
    lock = threading.Lock()

    def frame_or_404(index: int):
        if not (0 <= index < len(bundle.frames)):
            raise HTTPException(
                status_code=404,
                detail=f"frame {index} does not exist; have 0..{len(bundle.frames) - 1}",
            )
        return bundle.frames[index]

    def t_window(frame) -> tuple[float, float]:
        # the exposure extended by one exposure on each side
        return (
            frame.exposure_start - frame.duration,
            frame.exposure_end + frame.duration,
        )

    def check_c(c: float) -> float:
        if not (params.c_lo <= c <= params.c_hi):
            raise HTTPException(
                status_code=400,
                detail=f"c {c} outside bounds [{params.c_lo}, {params.c_hi}]",
            )
        return round(c / C_QUANTUM) * C_QUANTUM

    def check_t(frame, t: float | None) -> float:
        if t is None:
            t = frame.midpoint
        lo, hi = t_window(frame)
        if not (lo <= t <= hi):
            raise HTTPException(
                status_code=400, detail=f"t {t} outside bounds [{lo}, {hi}]"
            )
        return round(t / T_QUANTUM) * T_QUANTUM

    def plan_for(index: int) -> ExposurePlan:
        with lock:
            plan = plans.get(index)
        if plan is None:
            frame = bundle.frames[index]
            plan = ExposurePlan(timelines, frame.exposure_start, frame.exposure_end)
            with lock:
                plan = plans.setdefault(index, plan)
        return plan

    def evaluator_for(index: int):
        with lock:
            fn = evaluators.get(index)
        if fn is None:
            fn = energy_function(bundle.frames[index], timelines, params)
            with lock:
                fn = evaluators.setdefault(index, fn)
        return fn

    @app.get("/api/info")
    def info():
        rows = []
        for i, frame in enumerate(bundle.frames):
            lo, hi = t_window(frame)
            rows.append(
                {
                    "index": i,
                    "exposure_start": frame.exposure_start,
                    "exposure_end": frame.exposure_end,
                    "midpoint": frame.midpoint,
                    "t_lo": lo,
                    "t_hi": hi,
                    "partial": bundle.partial[i],
                }
            )
        return {
            "width": bundle.stream.width,
            "height": bundle.stream.height,
            "n_events": int(bundle.stream.ts.size),
            "c_lo": params.c_lo,
            "c_hi": params.c_hi,
            "c_default": default_c,
            "frames": rows,
        }

    @app.get("/api/frame")
    def frame_image(frame: int, c: float | None = None, t: float | None = None):
        blurry = frame_or_404(frame)
        cq = check_c(default_c if c is None else c)
        tq = check_t(blurry, t)
        key = (frame, round(cq / C_QUANTUM), round(tq / T_QUANTUM))
        with lock:
            cached = frame_png.get(key)
        if cached is None:
            plan = plan_for(frame)
            anchor = recover_from_plan(blurry, plan, cq)
            values = rollout_values(
                anchor.pixels, plan.f, timelines, cq, np.array([tq])
            )
            cached = _png_bytes(np.clip(values[0], 0.0, 1.0))
            with lock:
                cached = frame_png.setdefault(key, cached)
        return Response(content=cached, media_type="image/png")

    @app.get("/api/blurry")
    def blurry_image(frame: int):
        source = frame_or_404(frame)
        with lock:
            cached = blurry_png.get(frame)
        if cached is None:
            cached = _png_bytes(np.clip(source.pixels, 0.0, 1.0))
            with lock:
                cached = blurry_png.setdefault(frame, cached)
        return Response(content=cached, media_type="image/png")

    @app.get("/api/edges")
    def edges_image(frame: int, t: float | None = None):
        blurry = frame_or_404(frame)
        tq = check_t(blurry, t)
        key = (frame, round(tq / T_QUANTUM))
        with lock:
            cached = edges_png.get(key)
        if cached is None:
            edges = edge_map(
                timelines,
                tq,
                params.alpha,
                (blurry.exposure_start, blurry.exposure_end),
            )
            mag = sobel(edges.values)
            peak = mag.max()
            if peak > 0:
                mag = mag / peak
            cached = _png_bytes(mag)
            with lock:
                cached = edges_png.setdefault(key, cached)
        return Response(content=cached, media_type="image/png")

    @app.get("/api/energy")
    def energy_curve(frame: int, n: int = 20):
        frame_or_404(frame)
        if not (2 <= n <= 400):
            raise HTTPException(
                status_code=400, detail=f"n {n} outside bounds [2, 400]"
            )
        key = (frame, n)
        with lock:
            rows = energy_rows.get(key)
        if rows is None:
            fn = evaluator_for(frame)
            grid = np.geomspace(params.c_lo, params.c_hi, n)
            rows = [[float(c), float(fn(float(c)))] for c in grid]
            with lock:
                rows = energy_rows.setdefault(key, rows)
        return rows

    @app.post("/api/optimize")
    def optimize(payload: dict = Body(...)):
        if "frame" not in payload:
            raise HTTPException(status_code=400, detail="body must contain 'frame'")
        index = int(payload["frame"])
        frame_or_404(index)
        with lock:
            job = optimize_jobs.get(index)
            if job is None:
                job = Future()
                optimize_jobs[index] = job
                owner = True
            else:
                owner = False
        if owner:
            try:
                result = find_c(bundle.frames[index], bundle.stream, params)
                job.set_result(result)
            except Exception as exc:  # surface the failure to every waiter
                job.set_exception(exc)
                with lock:
                    del optimize_jobs[index]
        try:
            result = job.result()
        except Exception as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        return {
            "frame": index,
            "c_hat": result.c_hat,
            "flat": result.flat,
            "n_evaluations": result.n_evaluations,
            "curve": result.curve.tolist(),
        }

    return app
