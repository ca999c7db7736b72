// Tuner state and the request discipline around it: slider scales, the
// 10 req/s scrub throttle, and last-writer-wins response tokens.

import type {
  BundleInfo,
  EnergyPoint,
  FrameInfo,
  OptimizeResult,
} from "./api";

export type OverlayMode = "latent" | "edges" | "blurry";

/** What the store needs from the service; TunerClient satisfies it. */
export interface TunerApi {
  fetchFrame(frame: number, c: number, t?: number): Promise<Blob>;
  fetchBlurry(frame: number): Promise<Blob>;
  fetchEdges(frame: number, t?: number): Promise<Blob>;
  energy(frame: number, n?: number): Promise<EnergyPoint[]>;
  optimize(frame: number): Promise<OptimizeResult>;
}

export interface Scale {
  steps: number;
  toValue(pos: number): number;
  toPos(value: number): number;
}

function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

/** Range-input positions 0..steps mapped onto [lo, hi] logarithmically, so
 * a threshold spanning two decades scrubs evenly. Both directions clamp:
 * the service rejects out-of-bounds values, the UI must never send one. */
export function logScale(lo: number, hi: number, steps = 1000): Scale {
  const ratio = hi / lo;
  return {
    steps,
    toValue: (pos) => clamp(lo * Math.pow(ratio, pos / steps), lo, hi),
    toPos: (value) =>
      Math.round(clamp(Math.log(value / lo) / Math.log(ratio), 0, 1) * steps),
  };
}

export function linScale(lo: number, hi: number, steps = 1000): Scale {
  const span = hi - lo;
  return {
    steps,
    toValue: (pos) => clamp(lo + (span * pos) / steps, lo, hi),
    toPos: (value) => Math.round(clamp((value - lo) / span, 0, 1) * steps),
  };
}

export interface ThrottleTiming {
  now(): number;
  defer(fn: () => void, ms: number): unknown;
  cancel(handle: unknown): void;
}

const wallClock: ThrottleTiming = {
  now: () => Date.now(),
  defer: (fn, ms) => setTimeout(fn, ms),
  cancel: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
};

/** At most one call per minGapMs. Calls landing inside the gap are held and
 * only the newest survives; it fires when the gap expires. */
export class Throttle {
  private last = Number.NEGATIVE_INFINITY;
  private pending: (() => void) | null = null;
  private handle: unknown = null;

  constructor(
    private minGapMs = 100,
    private timing: ThrottleTiming = wallClock,
  ) {}

  run(fn: () => void): void {
    const wait = this.last + this.minGapMs - this.timing.now();
    if (wait <= 0 && this.handle === null) {
      this.last = this.timing.now();
      fn();
      return;
    }
    this.pending = fn;
    if (this.handle === null) {
      this.handle = this.timing.defer(() => this.flush(), wait);
    }
  }

  private flush(): void {
    this.handle = null;
    const fn = this.pending;
    this.pending = null;
    if (fn) {
      this.last = this.timing.now();
      fn();
    }
  }

  cancel(): void {
    if (this.handle !== null) {
      this.timing.cancel(this.handle);
      this.handle = null;
    }
    this.pending = null;
  }
}

/** Monotone display: a response may be shown only if it belongs to the
 * newest request issued so far. */
export class TokenGate {
  private newest = 0;

  issue(): number {
    return ++this.newest;
  }

  accept(token: number): boolean {
    return token === this.newest;
  }
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

export class TunerStore {
  frame = 0;
  c: number;
  t: number;
  mode: OverlayMode = "latent";
  curvePoints: EnergyPoint[] | null = null;
  optimizeResult: OptimizeResult | null = null;
  optimizing = false;

  onImage: (blob: Blob) => void = () => {};
  onBlurry: (blob: Blob) => void = () => {};
  onCurve: (points: EnergyPoint[], cHat: number | null) => void = () => {};
  onError: (message: string) => void = () => {};
  onState: () => void = () => {};

  private throttle: Throttle;
  private gate = new TokenGate();

  constructor(
    public info: BundleInfo,
    private client: TunerApi,
    timing?: ThrottleTiming,
    minGapMs = 100,
  ) {
    if (info.frames.length === 0) {
      throw new Error("bundle has no frames");
    }
    this.c = info.c_default;
    this.t = info.frames[0].midpoint;
    this.throttle = new Throttle(minGapMs, timing);
  }

  frameInfo(): FrameInfo {
    return this.info.frames[this.frame];
  }

  cScale(): Scale {
    return logScale(this.info.c_lo, this.info.c_hi);
  }

  tScale(): Scale {
    const f = this.frameInfo();
    return linScale(f.t_lo, f.t_hi);
  }

  setFrame(index: number): void {
    const i = clamp(Math.round(index), 0, this.info.frames.length - 1);
    if (i === this.frame) {
      return;
    }
    this.frame = i;
    this.t = this.frameInfo().midpoint;
    this.curvePoints = null;
    this.optimizeResult = null; // the marker belongs to the old frame
    this.onState();
    this.scheduleImage();
    void this.loadBlurry();
    void this.loadCurve();
  }

  setC(value: number): void {
    this.c = clamp(value, this.info.c_lo, this.info.c_hi);
    this.onState();
    this.scheduleImage();
  }

  setT(value: number): void {
    const f = this.frameInfo();
    this.t = clamp(value, f.t_lo, f.t_hi);
    this.onState();
    this.scheduleImage();
  }

  setMode(mode: OverlayMode): void {
    if (mode === this.mode) {
      return;
    }
    this.mode = mode;
    this.onState();
    this.scheduleImage();
  }

  /** Kick the first round of requests after construction. */
  start(): void {
    this.onState();
    this.scheduleImage();
    void this.loadBlurry();
    void this.loadCurve();
  }

  scheduleImage(): void {
    this.throttle.run(() => this.requestImage());
  }

  private requestImage(): void {
    const token = this.gate.issue();
    let load: Promise<Blob>;
    if (this.mode === "blurry") {
      load = this.client.fetchBlurry(this.frame);
    } else if (this.mode === "edges") {
      load = this.client.fetchEdges(this.frame, this.t);
    } else {
      load = this.client.fetchFrame(this.frame, this.c, this.t);
    }
    load.then(
      (blob) => {
        if (this.gate.accept(token)) {
          this.onImage(blob);
        }
      },
      (err) => {
        if (this.gate.accept(token)) {
          this.onError(describe(err));
        }
      },
    );
  }

  async loadBlurry(): Promise<void> {
    const frame = this.frame;
    try {
      const blob = await this.client.fetchBlurry(frame);
      if (frame === this.frame) {
        this.onBlurry(blob);
      }
    } catch (err) {
      this.onError(describe(err));
    }
  }

  async loadCurve(): Promise<void> {
    const frame = this.frame;
    try {
      const points = await this.client.energy(frame, 20);
      if (frame === this.frame) {
        this.curvePoints = points;
        this.onCurve(points, this.optimizeResult?.c_hat ?? null);
      }
    } catch (err) {
      this.onError(describe(err));
    }
  }

  async optimize(): Promise<OptimizeResult | null> {
    if (this.optimizing) {
      return null;
    }
    const frame = this.frame;
    this.optimizing = true;
    this.onState();
    try {
      const result = await this.client.optimize(frame);
      if (frame === this.frame) {
        this.optimizeResult = result;
        this.onCurve(this.curvePoints ?? result.curve, result.c_hat);
      }
      return result;
    } catch (err) {
      this.onError(describe(err));
      return null;
    } finally {
      this.optimizing = false;
      this.onState();
    }
  }
}
