/**
 * Viewer state machine.
 *
 * `reduce` is a pure function (state, event) -> {state, effects}: user input
 * and server messages both arrive as events, and everything the viewer wants
 * from the service is returned as effect descriptions for the controller to
 * execute.  Replaying the same event log therefore reproduces the same state
 * and the same request sequence.
 */

import type { AnnotationBody } from "./api";
import type {
  AnnotationJson, Axis, MeshPayload, ParticlePayload, PlaybackState,
  SessionSummary, StreamlinePayload,
} from "./protocol";
import { AXES } from "./protocol";

export type Idiom = "particles" | "isosurface" | "streamlines";

export type Vec3 = [number, number, number];

export interface SlicePanelEntry {
  index: number;
  png: Uint8Array | null;
  stale: boolean;
  pending: number | null;
}

export interface AnnotationDraft {
  group: string;
  color: Vec3;
  frameStart: number;
  frameEnd: number;
  strokes: Vec3[][];
  current: Vec3[] | null;
  error: string | null;
}

export type IdiomPayload =
  | { kind: "isosurface"; mesh: MeshPayload }
  | { kind: "particles"; particles: ParticlePayload }
  | { kind: "streamlines"; streamlines: StreamlinePayload };

export interface ViewerState {
  phase: "idle" | "connecting" | "ready";
  session: SessionSummary | null;
  idiom: Idiom;
  frame: number;
  playback: PlaybackState | null;
  slices: Record<Axis, SlicePanelEntry>;
  payloads: Record<string, IdiomPayload | "pending" | "failed">;
  visible: AnnotationJson[];
  draft: AnnotationDraft;
  darkMode: boolean;
  iso: number;
  ratio: number | null;
  fraction: number;
  resolution: number;
  stride: number;
  maxSteps: number;
  savedIds: number[];
}

export type Event =
  | { type: "connect" }
  | { type: "session_loaded"; summary: SessionSummary }
  | { type: "select_idiom"; idiom: Idiom }
  | { type: "set_iso"; iso: number; ratio: number | null }
  | { type: "play" }
  | { type: "pause" }
  | { type: "seek"; frame: number }
  | { type: "set_rate"; fps: number }
  | { type: "playback_state"; state: PlaybackState }
  | { type: "drag_slice"; axis: Axis; index: number }
  | { type: "slice_image"; frame: number; axis: Axis; index: number; png: Uint8Array }
  | { type: "slice_failed"; frame: number; axis: Axis; index: number }
  | { type: "idiom_payload"; frame: number; payload: IdiomPayload }
  | { type: "idiom_failed"; frame: number; idiom: Idiom }
  | { type: "retry_payload" }
  | { type: "stroke_start"; point: Vec3 }
  | { type: "stroke_point"; point: Vec3 }
  | { type: "stroke_end" }
  | { type: "set_draft_meta"; group?: string; color?: Vec3; frameStart?: number; frameEnd?: number }
  | { type: "save_annotation" }
  | { type: "annotation_saved"; annotation: AnnotationJson }
  | { type: "visible_annotations"; frame: number; annotations: AnnotationJson[] }
  | { type: "toggle_dark_mode" };

export type Effect =
  | { kind: "get_session" }
  | { kind: "playback"; command: "play" | "pause" | "seek" | "set_rate"; frame?: number; fps?: number }
  | { kind: "fetch_slice"; frame: number; axis: Axis; index: number }
  | { kind: "fetch_idiom"; idiom: Idiom; frame: number }
  | { kind: "fetch_visible"; frame: number }
  | { kind: "save_annotation"; body: AnnotationBody };

export interface Step {
  state: ViewerState;
  effects: Effect[];
}

export function initialState(): ViewerState {
  const slice = (): SlicePanelEntry => ({ index: 0, png: null, stale: false, pending: null });
  return {
    phase: "idle",
    session: null,
    idiom: "isosurface",
    frame: 0,
    playback: null,
    slices: { x: slice(), y: slice(), z: slice() },
    payloads: {},
    visible: [],
    draft: emptyDraft(),
    darkMode: false,
    iso: 0.5,
    ratio: null,
    fraction: 1.0,
    resolution: 512,
    stride: 4,
    maxSteps: 500,
    savedIds: [],
  };
}

function emptyDraft(): AnnotationDraft {
  return {
    group: "notes", color: [255, 64, 64], frameStart: 0, frameEnd: 0,
    strokes: [], current: null, error: null,
  };
}

function payloadKey(idiom: Idiom, frame: number): string {
  return `${idiom}:${frame}`;
}

function axisNodeCount(s: SessionSummary, axis: Axis): number {
  const dims = s.scalar?.dims ?? s.vector?.dims ?? [2, 2, 2];
  return dims[axis === "x" ? 0 : axis === "y" ? 1 : 2];
}

function hasModality(state: ViewerState, idiom: Idiom): boolean {
  const mods = state.session?.modalities ?? [];
  return idiom === "isosurface" ? mods.includes("scalar")
    : idiom === "particles" ? mods.includes("particles")
    : mods.includes("vector");
}

/** Fetch effects needed after the displayed frame changed. */
function frameEffects(state: ViewerState): Effect[] {
  const effects: Effect[] = [];
  if (hasModality(state, state.idiom) &&
      state.payloads[payloadKey(state.idiom, state.frame)] === undefined) {
    effects.push({ kind: "fetch_idiom", idiom: state.idiom, frame: state.frame });
  }
  if (state.session?.modalities.includes("scalar")) {
    for (const axis of AXES) {
      effects.push({ kind: "fetch_slice", frame: state.frame, axis, index: state.slices[axis].index });
    }
  }
  effects.push({ kind: "fetch_visible", frame: state.frame });
  return effects;
}

function markPending(state: ViewerState, effects: Effect[]): ViewerState {
  let next = state;
  for (const e of effects) {
    if (e.kind === "fetch_idiom") {
      next = {
        ...next,
        payloads: { ...next.payloads, [payloadKey(e.idiom, e.frame)]: "pending" },
      };
    }
  }
  return next;
}

export function reduce(state: ViewerState, event: Event): Step {
  switch (event.type) {
    case "connect":
      return { state: { ...state, phase: "connecting" }, effects: [{ kind: "get_session" }] };

    case "session_loaded": {
      const s = event.summary;
      const mid = (axis: Axis) => Math.floor(axisNodeCount(s, axis) / 2);
      const next: ViewerState = {
        ...state,
        phase: "ready",
        session: s,
        playback: s.playback,
        frame: s.playback.frame,
        idiom: state.idiom && hasModalityIn(s, state.idiom) ? state.idiom : firstIdiom(s),
        slices: {
          x: { index: mid("x"), png: null, stale: false, pending: null },
          y: { index: mid("y"), png: null, stale: false, pending: null },
          z: { index: mid("z"), png: null, stale: false, pending: null },
        },
        draft: { ...state.draft, frameEnd: Math.min(state.draft.frameEnd, s.frame_count - 1) },
      };
      const effects = frameEffects(next);
      return { state: markPending(next, effects), effects };
    }

    case "select_idiom": {
      if (!hasModality(state, event.idiom)) return { state, effects: [] };
      const next = { ...state, idiom: event.idiom };
      const key = payloadKey(event.idiom, next.frame);
      if (next.payloads[key] === undefined) {
        const effects: Effect[] = [{ kind: "fetch_idiom", idiom: event.idiom, frame: next.frame }];
        return { state: markPending(next, effects), effects };
      }
      return { state: next, effects: [] };
    }

    case "set_iso": {
      // parameter change invalidates every cached isosurface payload
      const payloads = Object.fromEntries(
        Object.entries(state.payloads).filter(([k]) => !k.startsWith("isosurface:")));
      const next = { ...state, iso: event.iso, ratio: event.ratio, payloads };
      if (next.idiom === "isosurface" && hasModality(next, "isosurface")) {
        const effects: Effect[] = [{ kind: "fetch_idiom", idiom: "isosurface", frame: next.frame }];
        return { state: markPending(next, effects), effects };
      }
      return { state: next, effects: [] };
    }

    case "play":
      return { state, effects: [{ kind: "playback", command: "play" }] };
    case "pause":
      return { state, effects: [{ kind: "playback", command: "pause" }] };
    case "seek":
      return { state, effects: [{ kind: "playback", command: "seek", frame: event.frame }] };
    case "set_rate":
      return { state, effects: [{ kind: "playback", command: "set_rate", fps: event.fps }] };

    case "playback_state": {
      const next = { ...state, playback: event.state };
      if (event.state.frame === state.frame) return { state: next, effects: [] };
      const moved = { ...next, frame: event.state.frame };
      const effects = frameEffects(moved);
      return { state: markPending(moved, effects), effects };
    }

    case "drag_slice": {
      if (!state.session?.modalities.includes("scalar")) return { state, effects: [] };
      const count = axisNodeCount(state.session, event.axis);
      const index = Math.min(count - 1, Math.max(0, Math.round(event.index)));
      const entry = state.slices[event.axis];
      if (index === entry.index && entry.pending === null) return { state, effects: [] };
      if (index === entry.pending) return { state, effects: [] };
      const next = {
        ...state,
        slices: { ...state.slices, [event.axis]: { ...entry, pending: index } },
      };
      return {
        state: next,
        effects: [{ kind: "fetch_slice", frame: state.frame, axis: event.axis, index }],
      };
    }

    case "slice_image": {
      if (event.frame !== state.frame) return { state, effects: [] };
      const entry = state.slices[event.axis];
      if (entry.pending !== null && entry.pending !== event.index) {
        return { state, effects: [] };  // a newer drag superseded this reply
      }
      return {
        state: {
          ...state,
          slices: {
            ...state.slices,
            [event.axis]: { index: event.index, png: event.png, stale: false, pending: null },
          },
        },
        effects: [],
      };
    }

    case "slice_failed": {
      if (event.frame !== state.frame) return { state, effects: [] };
      const entry = state.slices[event.axis];
      return {
        state: {
          ...state,
          slices: {
            ...state.slices,
            [event.axis]: { ...entry, stale: true, pending: null },
          },
        },
        effects: [],
      };
    }

    case "idiom_payload": {
      const key = payloadKey(event.payload.kind, event.frame);
      return {
        state: { ...state, payloads: { ...state.payloads, [key]: event.payload } },
        effects: [],
      };
    }

    case "idiom_failed": {
      const key = payloadKey(event.idiom, event.frame);
      return {
        state: { ...state, payloads: { ...state.payloads, [key]: "failed" } },
        effects: [],
      };
    }

    case "retry_payload": {
      const key = payloadKey(state.idiom, state.frame);
      if (state.payloads[key] !== "failed") return { state, effects: [] };
      const effects: Effect[] = [{ kind: "fetch_idiom", idiom: state.idiom, frame: state.frame }];
      return { state: markPending(state, effects), effects };
    }

    case "stroke_start":
      return {
        state: { ...state, draft: { ...state.draft, current: [event.point], error: null } },
        effects: [],
      };

    case "stroke_point": {
      if (!state.draft.current) return { state, effects: [] };
      return {
        state: {
          ...state,
          draft: { ...state.draft, current: [...state.draft.current, event.point] },
        },
        effects: [],
      };
    }

    case "stroke_end": {
      const cur = state.draft.current;
      if (!cur) return { state, effects: [] };
      const strokes = cur.length >= 2 ? [...state.draft.strokes, cur] : state.draft.strokes;
      return {
        state: { ...state, draft: { ...state.draft, strokes, current: null } },
        effects: [],
      };
    }

    case "set_draft_meta": {
      const draft = {
        ...state.draft,
        ...(event.group !== undefined ? { group: event.group } : {}),
        ...(event.color !== undefined ? { color: event.color } : {}),
        ...(event.frameStart !== undefined ? { frameStart: event.frameStart } : {}),
        ...(event.frameEnd !== undefined ? { frameEnd: event.frameEnd } : {}),
        error: null,
      };
      return { state: { ...state, draft }, effects: [] };
    }

    case "save_annotation": {
      const d = state.draft;
      const frames = state.session?.frame_count ?? 0;
      let error: string | null = null;
      if (!d.strokes.length) error = "draw at least one stroke";
      else if (d.frameStart > d.frameEnd) error = "frame range start exceeds end";
      else if (d.frameStart < 0 || d.frameEnd >= frames) error = "frame range outside dataset";
      if (error) {
        return { state: { ...state, draft: { ...d, error } }, effects: [] };
      }
      const body: AnnotationBody = {
        group: d.group,
        color: d.color,
        frame_start: d.frameStart,
        frame_end: d.frameEnd,
        strokes: d.strokes,
      };
      return { state, effects: [{ kind: "save_annotation", body }] };
    }

    case "annotation_saved": {
      const next = {
        ...state,
        draft: emptyDraft(),
        savedIds: [...state.savedIds, event.annotation.id],
      };
      return { state: next, effects: [{ kind: "fetch_visible", frame: next.frame }] };
    }

    case "visible_annotations": {
      if (event.frame !== state.frame) return { state, effects: [] };
      return { state: { ...state, visible: event.annotations }, effects: [] };
    }

    case "toggle_dark_mode":
      return { state: { ...state, darkMode: !state.darkMode }, effects: [] };
  }
}

function hasModalityIn(s: SessionSummary, idiom: Idiom): boolean {
  return idiom === "isosurface" ? s.modalities.includes("scalar")
    : idiom === "particles" ? s.modalities.includes("particles")
    : s.modalities.includes("vector");
}

function firstIdiom(s: SessionSummary): Idiom {
  if (s.modalities.includes("particles")) return "particles";
  if (s.modalities.includes("scalar")) return "isosurface";
  return "streamlines";
}

/** True when an annotation id is currently shown (server-decided). */
export function isAnnotationVisible(state: ViewerState, id: number): boolean {
  return state.visible.some((a) => a.id === id);
}
