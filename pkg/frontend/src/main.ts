/** DOM wiring: HUD controls around the 3D canvas plus the heatmap panel. */

import { HttpTransport } from "./api";
import { ViewerController } from "./controller";
import { ViewerScene } from "./render";
import type { Axis } from "./protocol";
import { AXES } from "./protocol";
import type { Idiom, ViewerState } from "./state";

const base = (new URLSearchParams(location.search).get("api")) ?? "";
const transport = new HttpTransport(base);
const controller = new ViewerController(transport);

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const scene = new ViewerScene(canvas, {
  onSliceDrag: (axis, index) => controller.dispatch({ type: "drag_slice", axis, index }),
  onStrokePoint: (point, start) =>
    controller.dispatch(start ? { type: "stroke_start", point } : { type: "stroke_point", point }),
  onStrokeEnd: () => controller.dispatch({ type: "stroke_end" }),
});

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

const timeline = el<HTMLInputElement>("timeline");
const frameLabel = el<HTMLSpanElement>("frame-label");
const statusLine = el<HTMLSpanElement>("status");
const retryBtn = el<HTMLButtonElement>("retry");
const heatmapPanel = el<HTMLDivElement>("heatmaps");
const drawToggle = el<HTMLInputElement>("draw-mode");

el<HTMLButtonElement>("play").onclick = () => controller.dispatch({ type: "play" });
el<HTMLButtonElement>("pause").onclick = () => controller.dispatch({ type: "pause" });
el<HTMLInputElement>("fps").onchange = (e) =>
  controller.dispatch({ type: "set_rate", fps: Number((e.target as HTMLInputElement).value) });
el<HTMLButtonElement>("dark-mode").onclick = () =>
  controller.dispatch({ type: "toggle_dark_mode" });
retryBtn.onclick = () => controller.dispatch({ type: "retry_payload" });

for (const idiom of ["particles", "isosurface", "streamlines"] as Idiom[]) {
  el<HTMLButtonElement>(`idiom-${idiom}`).onclick = () =>
    controller.dispatch({ type: "select_idiom", idiom });
}

el<HTMLInputElement>("isovalue").onchange = (e) =>
  controller.dispatch({
    type: "set_iso",
    iso: Number((e.target as HTMLInputElement).value),
    ratio: controller.state.ratio,
  });

timeline.oninput = () => {
  frameLabel.textContent = timeline.value;  // live label while dragging
};
timeline.onchange = () =>  // seek once per released drag
  controller.dispatch({ type: "seek", frame: Number(timeline.value) });

drawToggle.onchange = () => scene.setDrawing(drawToggle.checked);
el<HTMLSelectElement>("draw-axis").onchange = (e) => {
  scene.activeDrawAxis = (e.target as HTMLSelectElement).value as Axis;
};
el<HTMLInputElement>("ann-group").onchange = (e) =>
  controller.dispatch({ type: "set_draft_meta", group: (e.target as HTMLInputElement).value });
el<HTMLInputElement>("ann-color").onchange = (e) => {
  const hex = (e.target as HTMLInputElement).value;
  controller.dispatch({
    type: "set_draft_meta",
    color: [1, 3, 5].map((i) => parseInt(hex.slice(i, i + 2), 16)) as [number, number, number],
  });
};
el<HTMLInputElement>("ann-start").onchange = (e) =>
  controller.dispatch({ type: "set_draft_meta", frameStart: Number((e.target as HTMLInputElement).value) });
el<HTMLInputElement>("ann-end").onchange = (e) =>
  controller.dispatch({ type: "set_draft_meta", frameEnd: Number((e.target as HTMLInputElement).value) });
el<HTMLButtonElement>("ann-save").onclick = () =>
  controller.dispatch({ type: "save_annotation" });

const heatmapUrls: Partial<Record<Axis, string>> = {};

function render(state: ViewerState): void {
  scene.sync(state);
  document.body.classList.toggle("dark", state.darkMode);

  if (state.playback) {
    timeline.max = String(state.playback.frame_count - 1);
    timeline.value = String(state.frame);
    frameLabel.textContent = String(state.frame);
  }

  const payload = state.payloads[`${state.idiom}:${state.frame}`];
  retryBtn.hidden = payload !== "failed";
  statusLine.textContent =
    state.phase !== "ready" ? "connecting..."
    : payload === "pending" ? "loading payload..."
    : payload === "failed" ? "payload failed"
    : state.draft.error ? state.draft.error
    : `${state.session?.name ?? ""} - frame ${state.frame}`;

  for (const axis of AXES) {
    const entry = state.slices[axis];
    const img = el<HTMLImageElement>(`heatmap-${axis}`);
    const label = el<HTMLSpanElement>(`heatmap-${axis}-label`);
    label.textContent = `${axis.toUpperCase()} @ ${entry.pending ?? entry.index}` +
      (entry.stale ? " (stale)" : "");
    if (entry.png) {
      const old = heatmapUrls[axis];
      heatmapUrls[axis] = URL.createObjectURL(
        new Blob([entry.png.slice().buffer as ArrayBuffer], { type: "image/png" }));
      img.src = heatmapUrls[axis]!;
      if (old) URL.revokeObjectURL(old);
    }
    img.classList.toggle("stale", entry.stale);
  }
  heatmapPanel.hidden = !state.session?.modalities.includes("scalar");
}

controller.onChange(render);

function resize(): void {
  scene.setSize(canvas.clientWidth, canvas.clientHeight);
}
window.addEventListener("resize", resize);
resize();

controller.dispatch({ type: "connect" });

// playback ticks pushed by the server; the viewer just mirrors them
const events = new EventSource(base + "/playback/events");
events.onmessage = (e) =>
  controller.dispatch({ type: "playback_state", state: JSON.parse(e.data) });
