"""Command-line pipeline: synth, deblur, reconstruct, eval, serve.

Every flag can also come from a `key=value` config file (comments with `#`,
keys match the long flag names); explicit flags win over the file, the file
wins over built-in defaults. All commands print a one-line summary per
output so logs stay greppable, and write machine-readable JSON next to the
images.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EdiError
from .formats import (
    SequenceBundle,
    load_gray_image,
    write_events,
    write_frames_manifest,
    write_gray_png,
)
from .metrics import compare_images
from .model import recover_latent, reconstruct_sequence
from .optimize import EnergyParams, find_c
from .synth import SimConfig, make_blurry, make_translating_texture, simulate_events

__all__ = ["RunConfig", "main", "build_parser"]

_CONFIG_KEYS = {
    "in": str,
    "events": str,
    "frames": str,
    "out": str,
    "c": float,
    "c_lo": float,
    "c_hi": float,
    "lambda": float,
    "alpha": float,
    "tol": float,
    "grid_n": int,
    "events_per_frame": int,
    "port": int,
    "host": str,
    "width": int,
    "height": int,
    "n_frames": int,
    "n_patches": int,
    "shift": int,
    "dt": float,
    "seed": int,
    "c_true": float,
    "blur_span": int,
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved knobs shared by the pipeline commands."""

    c: float | None
    params: EnergyParams
    events_per_frame: int = 60
    out_dir: Path | None = None
    port: int = 8731

    def __post_init__(self):
        if self.events_per_frame < 1:
            raise ValueError(
                f"events_per_frame must be >= 1, got {self.events_per_frame}"
            )


def load_config_file(path) -> dict[str, object]:
    """Parse `key=value` lines; keys may use `-` or `_` interchangeably."""
    conf: dict[str, object] = {}
    path = Path(path)
    for line_number, raw in enumerate(path.open(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{line_number}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{line_number}: unknown config key {key!r}")
        conf[key] = _CONFIG_KEYS[key](value.strip())
    return conf


def _pick(args, conf, key, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in conf:
        return conf[key]
    return default


def _energy_params(args, conf) -> EnergyParams:
    base = EnergyParams()
    return EnergyParams(
        lam=_pick(args, conf, "lam", base.lam),
        alpha=_pick(args, conf, "alpha", base.alpha),
        c_lo=_pick(args, conf, "c_lo", base.c_lo),
        c_hi=_pick(args, conf, "c_hi", base.c_hi),
        tol=_pick(args, conf, "tol", base.tol),
        grid_n=_pick(args, conf, "grid_n", base.grid_n),
    )


def _run_config(args, conf) -> RunConfig:
    out = _pick(args, conf, "out", None)
    return RunConfig(
        c=_pick(args, conf, "c", None),
        params=_energy_params(args, conf),
        events_per_frame=_pick(args, conf, "events_per_frame", 60),
        out_dir=Path(out) if out is not None else None,
        port=_pick(args, conf, "port", 8731),
    )


def _load_bundle(args, conf) -> SequenceBundle:
    events = _pick(args, conf, "events", None)
    frames = _pick(args, conf, "frames", None)
    if events is None or frames is None:
        raise ValueError("both --events and --frames are required")
    return SequenceBundle.load(events, frames)


def _require_out(config: RunConfig) -> Path:
    if config.out_dir is None:
        raise ValueError("--out is required")
    config.out_dir.mkdir(parents=True, exist_ok=True)
    return config.out_dir


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_sharp_dir(in_dir, dt: float):
    from .synth import SharpVideo

    paths = sorted(Path(in_dir).glob("*.png")) + sorted(Path(in_dir).glob("*.pgm"))
    if len(paths) < 2:
        raise ValueError(f"need at least 2 sharp frames in {in_dir}, found {len(paths)}")
    frames = np.stack([load_gray_image(p) for p in paths])
    return SharpVideo(frames, dt * np.arange(len(paths)))


def cmd_synth(args) -> int:
    conf = load_config_file(args.config) if args.config else {}
    config = _run_config(args, conf)
    out = _require_out(config)
    in_dir = args.in_dir if args.in_dir is not None else conf.get("in")
    if in_dir is not None:
        video = _load_sharp_dir(in_dir, _pick(args, conf, "dt", 1.0 / 240.0))
    else:
        video = make_translating_texture(
            width=_pick(args, conf, "width", 240),
            height=_pick(args, conf, "height", 180),
            n_frames=_pick(args, conf, "n_frames", 15),
            shift_per_frame=_pick(args, conf, "shift", 2),
            dt=_pick(args, conf, "dt", 1.0 / 240.0),
            seed=_pick(args, conf, "seed", 7),
            n_patches=_pick(args, conf, "n_patches", 140),
        )
    c_true = _pick(args, conf, "c_true", 0.3)
    span = _pick(args, conf, "blur_span", 7)
    if span > len(video):
        raise ValueError(f"blur_span {span} exceeds the {len(video)} sharp frames")
    cfg = SimConfig(c_true=c_true, blur_span=span)
    stream = simulate_events(video, cfg)
    write_events(stream, out / "events.txt")

    (out / "gt").mkdir(exist_ok=True)
    blurry_rows = []
    gt_rows = []
    for j, start in enumerate(range(0, len(video) - span + 1, span)):
        blurry = make_blurry(video, span, start=start)
        name = f"blurry_{j:04d}.png"
        write_gray_png(out / name, blurry.pixels)
        blurry_rows.append((blurry.exposure_start, blurry.exposure_end, name))
        gt_idx = int(np.argmin(np.abs(video.timestamps - blurry.midpoint)))
        gt_name = f"gt/gt_{j:04d}.png"
        write_gray_png(out / gt_name, video.frames[gt_idx])
        gt_rows.append((blurry.exposure_start, blurry.exposure_end, gt_name))
    write_frames_manifest(out / "blurry.txt", blurry_rows)
    write_frames_manifest(out / "gt.txt", gt_rows)
    _write_json(
        out / "synth.json",
        {
            "width": video.width,
            "height": video.height,
            "n_sharp_frames": len(video),
            "n_blurry_frames": len(blurry_rows),
            "n_events": int(stream.ts.size),
            "c_true": c_true,
            "blur_span": span,
        },
    )
    print(
        f"synth: {stream.ts.size} events, {len(blurry_rows)} blurry frame(s) -> {out}"
    )
    return 0


def cmd_deblur(args) -> int:
    conf = load_config_file(args.config) if args.config else {}
    config = _run_config(args, conf)
    out = _require_out(config)
    bundle = _load_bundle(args, conf)
    rows = []
    for i, frame in enumerate(bundle.frames):
        if config.c is None:
            search = find_c(frame, bundle.stream, config.params)
            c_used = search.c_hat
            curve = search.curve.tolist()
            flat = search.flat
        else:
            c_used = float(config.c)
            curve = None
            flat = None
        latent = recover_latent(frame, bundle.stream, c_used)
        name = f"latent_{i:04d}.png"
        write_gray_png(out / name, latent.pixels)
        rows.append(
            {
                "index": i,
                "c": c_used,
                "optimized": config.c is None,
                "flat_energy": flat,
                "n_saturated": latent.n_saturated,
                "energy_curve": curve,
                "output": name,
            }
        )
        print(f"deblur: frame {i} c={c_used:.4f} saturated={latent.n_saturated} -> {name}")
    _write_json(
        out / "deblur.json",
        {
            "frames": rows,
            "params": {
                "lambda": config.params.lam,
                "alpha": config.params.alpha,
                "c_lo": config.params.c_lo,
                "c_hi": config.params.c_hi,
                "tol": config.params.tol,
                "grid_n": config.params.grid_n,
            },
        },
    )
    return 0


def cmd_reconstruct(args) -> int:
    conf = load_config_file(args.config) if args.config else {}
    config = _run_config(args, conf)
    out = _require_out(config)
    bundle = _load_bundle(args, conf)
    if config.c is None:
        c_used = find_c(bundle.frames[0], bundle.stream, config.params).c_hat
    else:
        c_used = float(config.c)
    videos = reconstruct_sequence(
        list(bundle.frames), bundle.stream, c_used, config.events_per_frame
    )
    entries = []
    counter = 0
    for video in videos:
        for latent in video.frames:
            name = f"recon_{counter:05d}.png"
            write_gray_png(out / name, latent.pixels)
            entries.append(
                {
                    "t": latent.t,
                    "anchor": video.source_frame_id,
                    "n_saturated": latent.n_saturated,
                    "path": name,
                }
            )
            counter += 1
    multiplier = counter / len(bundle.frames)
    _write_json(
        out / "reconstruct.json",
        {
            "c": c_used,
            "events_per_frame": config.events_per_frame,
            "n_input_frames": len(bundle.frames),
            "n_output_frames": counter,
            "frame_rate_multiplier": multiplier,
            "frames": entries,
        },
    )
    print(
        f"reconstruct: {counter} frames from {len(bundle.frames)} input(s), "
        f"multiplier {multiplier:.1f}, c={c_used:.4f} -> {out}"
    )
    return 0


def cmd_eval(args) -> int:
    conf = load_config_file(args.config) if args.config else {}
    recovered_dir = Path(args.recovered)
    truth_dir = Path(args.truth)
    rec = sorted(recovered_dir.glob("*.png"))
    tru = sorted(truth_dir.glob("*.png"))
    if len(rec) != len(tru):
        raise ValueError(
            f"directory sizes differ: {len(rec)} recovered vs {len(tru)} truth"
        )
    if not rec:
        raise ValueError("no .png files to compare")
    rows = []
    for r, t in zip(rec, tru):
        report = compare_images(load_gray_image(r), load_gray_image(t))
        rows.append({"recovered": r.name, "truth": t.name,
                     "psnr": report.psnr_db, "ssim": report.ssim})
        print(f"eval: {r.name} vs {t.name}: psnr={report.psnr_db:.3f} ssim={report.ssim:.4f}")
    summary = {
        "pairs": rows,
        "mean_psnr": float(np.mean([r["psnr"] for r in rows])),
        "mean_ssim": float(np.mean([r["ssim"] for r in rows])),
    }
    print(f"eval: mean psnr={summary['mean_psnr']:.3f} mean ssim={summary['mean_ssim']:.4f}")
    out = _pick(args, conf, "out", None)
    if out is not None:
        _write_json(Path(out), summary)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    conf = load_config_file(args.config) if args.config else {}
    config = _run_config(args, conf)
    bundle = _load_bundle(args, conf)
    app = create_app(bundle, config.params, default_c=config.c)
    host = _pick(args, conf, "host", "127.0.0.1")
    print(f"serve: http://{host}:{config.port} ({len(bundle.frames)} frame(s), "
          f"{bundle.stream.ts.size} events)")
    uvicorn.run(app, host=host, port=config.port, log_level="warning")
    return 0


def _add_common(sub: argparse.ArgumentParser, bundle_args: bool = True) -> None:
    sub.add_argument("--config", help="key=value config file; flags override it")
    if bundle_args:
        sub.add_argument("--events", help="event text file")
        sub.add_argument("--frames", help="frames manifest file")
    sub.add_argument("--out", help="output directory (or file for eval)")
    sub.add_argument("--c", type=float, help="fixed threshold; omit to optimize")
    sub.add_argument("--c-lo", dest="c_lo", type=float, help="search lower bound")
    sub.add_argument("--c-hi", dest="c_hi", type=float, help="search upper bound")
    sub.add_argument("--lambda", dest="lam", type=float, help="edge term weight (<= 0)")
    sub.add_argument("--alpha", type=float, help="edge map time decay")
    sub.add_argument("--tol", type=float, help="search refinement tolerance")
    sub.add_argument("--grid-n", dest="grid_n", type=int, help="coarse grid size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edi",
        description="Event-assisted deblurring: simulate, deblur, reconstruct, "
        "evaluate, and serve the interactive tuner.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    synth = subs.add_parser("synth", help="generate a synthetic bundle")
    _add_common(synth, bundle_args=False)
    synth.add_argument(
        "--in", dest="in_dir",
        help="directory of sharp frames (sorted *.png/*.pgm); "
        "omit to generate the built-in translating texture",
    )
    synth.add_argument("--width", type=int)
    synth.add_argument("--height", type=int)
    synth.add_argument("--n-frames", dest="n_frames", type=int)
    synth.add_argument("--n-patches", dest="n_patches", type=int)
    synth.add_argument("--shift", type=int, help="pixels of motion per sharp frame")
    synth.add_argument("--dt", type=float, help="sharp frame spacing in seconds")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--c-true", dest="c_true", type=float)
    synth.add_argument("--blur-span", dest="blur_span", type=int)
    synth.set_defaults(handler=cmd_synth)

    deblur = subs.add_parser("deblur", help="recover latent frames at the midpoint")
    _add_common(deblur)
    deblur.set_defaults(handler=cmd_deblur)

    recon = subs.add_parser("reconstruct", help="roll out a high-rate sequence")
    _add_common(recon)
    recon.add_argument(
        "--events-per-frame", dest="events_per_frame", type=int,
        help="emit one frame per this many events (default 60)",
    )
    recon.set_defaults(handler=cmd_reconstruct)

    ev = subs.add_parser("eval", help="PSNR/SSIM between two image directories")
    ev.add_argument("--config", help="key=value config file; flags override it")
    ev.add_argument("--recovered", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--out", help="write the JSON report here")
    ev.set_defaults(handler=cmd_eval)

    serve = subs.add_parser("serve", help="HTTP service for the browser tuner")
    _add_common(serve)
    serve.add_argument("--port", type=int, help="default 8731")
    serve.add_argument("--host", help="default 127.0.0.1")
    serve.set_defaults(handler=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (EdiError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
