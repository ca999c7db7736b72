import { TunerClient } from "./api";
import { TunerStore, type OverlayMode } from "./state";
import { drawCurve, xToC, type CurveLayout } from "./curve";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

function showToast(message: string): void {
  const toast = el<HTMLDivElement>("toast");
  toast.textContent = message;
  toast.classList.add("visible");
  window.setTimeout(() => toast.classList.remove("visible"), 4000);
}

// swap an <img> to a new blob, revoking the previous object URL once the
// replacement has actually loaded
function imageSink(img: HTMLImageElement): (blob: Blob) => void {
  let previous: string | null = null;
  return (blob) => {
    const url = URL.createObjectURL(blob);
    const old = previous;
    previous = url;
    img.onload = () => {
      if (old) {
        URL.revokeObjectURL(old);
      }
    };
    img.src = url;
  };
}

async function boot(): Promise<void> {
  const client = new TunerClient();
  let store: TunerStore;
  try {
    store = new TunerStore(await client.info(), client);
  } catch (err) {
    showToast(err instanceof Error ? err.message : String(err));
    return;
  }
  const info = store.info;

  const cSlider = el<HTMLInputElement>("c-slider");
  const tSlider = el<HTMLInputElement>("t-slider");
  const cValue = el<HTMLSpanElement>("c-value");
  const tValue = el<HTMLSpanElement>("t-value");
  const frameSelect = el<HTMLSelectElement>("frame-select");
  const optimizeBtn = el<HTMLButtonElement>("optimize");
  const optimizeOut = el<HTMLSpanElement>("optimize-result");
  const overlay = el<HTMLImageElement>("overlay");
  const blurry = el<HTMLImageElement>("blurry");
  const canvas = el<HTMLCanvasElement>("curve");
  const meta = el<HTMLSpanElement>("meta");

  meta.textContent =
    `${info.width}×${info.height}, ${info.n_events} events, ` +
    `c ∈ [${info.c_lo}, ${info.c_hi}]`;

  for (const frame of info.frames) {
    const opt = document.createElement("option");
    opt.value = String(frame.index);
    opt.textContent =
      `frame ${frame.index}  [${frame.exposure_start.toFixed(4)}, ` +
      `${frame.exposure_end.toFixed(4)}]` + (frame.partial ? " (partial)" : "");
    frameSelect.appendChild(opt);
  }

  const cScale = store.cScale();
  cSlider.min = "0";
  cSlider.max = String(cScale.steps);
  tSlider.min = "0";
  tSlider.max = String(store.tScale().steps);

  const ctx = canvas.getContext("2d");
  let layout: CurveLayout | null = null;

  store.onImage = imageSink(overlay);
  store.onBlurry = imageSink(blurry);
  store.onError = showToast;
  store.onCurve = (points, cHat) => {
    if (ctx) {
      layout = drawCurve(ctx, canvas.width, canvas.height, points, {
        current: store.c,
        cHat,
      });
    }
  };
  store.onState = () => {
    cSlider.value = String(cScale.toPos(store.c));
    tSlider.value = String(store.tScale().toPos(store.t));
    cValue.textContent = store.c.toFixed(4);
    tValue.textContent = store.t.toFixed(6);
    frameSelect.value = String(store.frame);
    optimizeBtn.disabled = store.optimizing;
    const res = store.optimizeResult;
    optimizeOut.textContent = res
      ? `ĉ = ${res.c_hat.toFixed(4)}${res.flat ? " (flat curve)" : ""}`
      : "";
    if (store.curvePoints && ctx) {
      layout = drawCurve(ctx, canvas.width, canvas.height, store.curvePoints, {
        current: store.c,
        cHat: res?.c_hat ?? null,
      });
    }
    for (const mode of ["latent", "edges", "blurry"] as const) {
      const radio = document.querySelector<HTMLInputElement>(
        `input[name=mode][value=${mode}]`,
      );
      if (radio) {
        radio.checked = store.mode === mode;
      }
    }
  };

  cSlider.addEventListener("input", () => {
    store.setC(cScale.toValue(Number(cSlider.value)));
  });
  tSlider.addEventListener("input", () => {
    store.setT(store.tScale().toValue(Number(tSlider.value)));
  });
  frameSelect.addEventListener("change", () => {
    store.setFrame(Number(frameSelect.value));
  });
  document.querySelectorAll<HTMLInputElement>("input[name=mode]").forEach(
    (radio) => {
      radio.addEventListener("change", () => {
        if (radio.checked) {
          store.setMode(radio.value as OverlayMode);
        }
      });
    },
  );
  optimizeBtn.addEventListener("click", () => {
    void store.optimize();
  });
  canvas.addEventListener("click", (ev) => {
    if (!layout) {
      return;
    }
    const rect = canvas.getBoundingClientRect();
    store.setC(xToC(layout, ev.clientX - rect.left));
  });

  store.start();
}

void boot();
