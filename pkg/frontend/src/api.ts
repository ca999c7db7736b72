// Typed client for the tuning service. All reconstruction happens server
// side; this file only shapes URLs and unwraps errors.

export interface FrameInfo {
  index: number;
  exposure_start: number;
  exposure_end: number;
  midpoint: number;
  t_lo: number;
  t_hi: number;
  partial: boolean;
}

export interface BundleInfo {
  width: number;
  height: number;
  n_events: number;
  c_lo: number;
  c_hi: number;
  c_default: number;
  frames: FrameInfo[];
}

export type EnergyPoint = [number, number];

export interface OptimizeResult {
  frame: number;
  c_hat: number;
  flat: boolean;
  n_evaluations: number;
  curve: EnergyPoint[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorMessage(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") {
      return body.detail;
    }
  } catch {
    // not a JSON body, fall through to the status line
  }
  return `${res.status} ${res.statusText}`;
}

export class TunerClient {
  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async get(path: string): Promise<Response> {
    const res = await this.fetchFn(this.base + path);
    if (!res.ok) {
      throw new ApiError(res.status, await errorMessage(res));
    }
    return res;
  }

  async info(): Promise<BundleInfo> {
    return (await this.get("/api/info")).json();
  }

  async fetchFrame(frame: number, c: number, t?: number): Promise<Blob> {
    let q = `/api/frame?frame=${frame}&c=${c}`;
    if (t !== undefined) {
      q += `&t=${t}`;
    }
    return (await this.get(q)).blob();
  }

  async fetchBlurry(frame: number): Promise<Blob> {
    return (await this.get(`/api/blurry?frame=${frame}`)).blob();
  }

  async fetchEdges(frame: number, t?: number): Promise<Blob> {
    let q = `/api/edges?frame=${frame}`;
    if (t !== undefined) {
      q += `&t=${t}`;
    }
    return (await this.get(q)).blob();
  }

  async energy(frame: number, n = 20): Promise<EnergyPoint[]> {
    return (await this.get(`/api/energy?frame=${frame}&n=${n}`)).json();
  }

  async optimize(frame: number): Promise<OptimizeResult> {
    const res = await this.fetchFn(this.base + "/api/optimize", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ frame }),
    });
    if (!res.ok) {
      throw new ApiError(res.status, await errorMessage(res));
    }
    return res.json();
  }
}
