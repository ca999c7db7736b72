// Energy-versus-threshold plot. Geometry is kept separate from canvas
// painting so the data<->pixel mapping is testable without a DOM.

import type { EnergyPoint } from "./api";

export interface CurveLayout {
  left: number;
  top: number;
  width: number;
  height: number;
  logMin: number;
  logMax: number;
  eMin: number;
  eMax: number;
}

function clamp01(x: number): number {
  return Math.min(1, Math.max(0, x));
}

export function layoutCurve(
  points: EnergyPoint[],
  canvasWidth: number,
  canvasHeight: number,
  pad = 28,
): CurveLayout {
  let logMin = Number.POSITIVE_INFINITY;
  let logMax = Number.NEGATIVE_INFINITY;
  let eMin = Number.POSITIVE_INFINITY;
  let eMax = Number.NEGATIVE_INFINITY;
  for (const [c, e] of points) {
    logMin = Math.min(logMin, Math.log(c));
    logMax = Math.max(logMax, Math.log(c));
    eMin = Math.min(eMin, e);
    eMax = Math.max(eMax, e);
  }
  if (!(logMax > logMin)) {
    logMax = logMin + 1;
  }
  if (!(eMax - eMin > 1e-12)) {
    // flat curve (e.g. zero events): keep a visible band around the line
    eMin -= 0.5;
    eMax += 0.5;
  }
  return {
    left: pad,
    top: pad / 2,
    width: canvasWidth - pad - 8,
    height: canvasHeight - pad - pad / 2,
    logMin,
    logMax,
    eMin,
    eMax,
  };
}

export function cToX(layout: CurveLayout, c: number): number {
  const f = (Math.log(c) - layout.logMin) / (layout.logMax - layout.logMin);
  return layout.left + clamp01(f) * layout.width;
}

export function xToC(layout: CurveLayout, x: number): number {
  const f = clamp01((x - layout.left) / layout.width);
  return Math.exp(layout.logMin + f * (layout.logMax - layout.logMin));
}

export function energyToY(layout: CurveLayout, e: number): number {
  const f = (e - layout.eMin) / (layout.eMax - layout.eMin);
  return layout.top + (1 - clamp01(f)) * layout.height;
}

/** Index of the grid value nearest to c; ties resolve to the lower cell. */
export function nearestCell(grid: number[], c: number): number {
  let best = 0;
  let bestDist = Number.POSITIVE_INFINITY;
  for (let i = 0; i < grid.length; i++) {
    const d = Math.abs(grid[i] - c);
    if (d < bestDist) {
      bestDist = d;
      best = i;
    }
  }
  return best;
}

// The painting surface, narrowed to what drawCurve touches so tests can
// hand in a recorder instead of a real 2d context.
export interface CurvePainter {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
}

export interface CurveMarks {
  current: number;
  cHat: number | null;
}

export function drawCurve(
  ctx: CurvePainter,
  canvasWidth: number,
  canvasHeight: number,
  points: EnergyPoint[],
  marks: CurveMarks,
): CurveLayout {
  const layout = layoutCurve(points, canvasWidth, canvasHeight);
  ctx.clearRect(0, 0, canvasWidth, canvasHeight);
  ctx.fillStyle = "#181c20";
  ctx.fillRect(0, 0, canvasWidth, canvasHeight);

  ctx.strokeStyle = "#3a4149";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(layout.left, layout.top);
  ctx.lineTo(layout.left, layout.top + layout.height);
  ctx.lineTo(layout.left + layout.width, layout.top + layout.height);
  ctx.stroke();

  ctx.strokeStyle = "#6fb3e0";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  points.forEach(([c, e], i) => {
    const x = cToX(layout, c);
    const y = energyToY(layout, e);
    if (i === 0) {
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  });
  ctx.stroke();

  // current slider position
  ctx.strokeStyle = "#d8d8d8";
  ctx.lineWidth = 1;
  ctx.beginPath();
  const cx = cToX(layout, marks.current);
  ctx.moveTo(cx, layout.top);
  ctx.lineTo(cx, layout.top + layout.height);
  ctx.stroke();

  if (marks.cHat !== null) {
    ctx.strokeStyle = "#e0a46f";
    ctx.lineWidth = 2;
    ctx.beginPath();
    const mx = cToX(layout, marks.cHat);
    ctx.moveTo(mx, layout.top);
    ctx.lineTo(mx, layout.top + layout.height);
    ctx.stroke();
    ctx.fillStyle = "#e0a46f";
    ctx.font = "11px sans-serif";
    ctx.fillText(`ĉ=${marks.cHat.toFixed(4)}`, mx + 4, layout.top + 11);
  }

  ctx.fillStyle = "#9aa3ab";
  ctx.font = "10px sans-serif";
  const first = points[0][0];
  const last = points[points.length - 1][0];
  ctx.fillText(first.toPrecision(2), layout.left - 8, canvasHeight - 6);
  ctx.fillText(
    last.toPrecision(2),
    layout.left + layout.width - 18,
    canvasHeight - 6,
  );
  return layout;
}
