/**
 * Scripted-session replay against a fake transport implementing the
 * documented API semantics: asserts the exact request sequence the UI
 * produces and the server-decided annotation visibility.
 */

import { describe, expect, it } from "vitest";
import type { AnnotationBody, PlaybackCommand, Transport } from "../src/api";
import { ViewerController } from "../src/controller";
import type { AnnotationJson, Axis, PlaybackState, SessionSummary } from "../src/protocol";
import { isAnnotationVisible } from "../src/state";

const FRAMES = 8;

function pngBytes(frame: number, axis: Axis, index: number): Uint8Array {
  return new Uint8Array([0x89, 0x50, frame, axis.charCodeAt(0), index]);
}

function emptyMesh(): ArrayBuffer {
  const buf = new ArrayBuffer(12);
  const v = new DataView(buf);
  [..."MSH1"].forEach((c, i) => v.setUint8(i, c.charCodeAt(0)));
  return buf;
}

function emptyTexture(): ArrayBuffer {
  const buf = new ArrayBuffer(8 + 16);
  new DataView(buf).setUint32(0, 1, true);
  return buf;
}

function emptyLines(): ArrayBuffer {
  const buf = new ArrayBuffer(8);
  const v = new DataView(buf);
  [..."LNS1"].forEach((c, i) => v.setUint8(i, c.charCodeAt(0)));
  return buf;
}

class FakeTransport implements Transport {
  readonly log: string[] = [];
  playbackState: PlaybackState = { frame: 0, playing: false, fps: 5, frame_count: FRAMES };
  annotations: AnnotationJson[] = [];
  private nextId = 1;

  async getSession(): Promise<SessionSummary> {
    this.log.push("GET /session");
    return {
      name: "fake", frame_count: FRAMES,
      modalities: ["particles", "scalar", "vector"],
      normalization: "frame",
      playback: this.playbackState,
      scalar: { dims: [8, 8, 8], spacing: [1, 1, 1], origin: [0, 0, 0] },
      vector: { dims: [8, 8, 8], spacing: [1, 1, 1], origin: [0, 0, 0] },
      particles: { counts: Array(FRAMES).fill(1) },
    };
  }

  async playback(cmd: PlaybackCommand): Promise<PlaybackState> {
    this.log.push(`POST /playback ${cmd.command}${cmd.frame !== undefined ? " " + cmd.frame : ""}`);
    if (cmd.command === "play") this.playbackState = { ...this.playbackState, playing: true };
    if (cmd.command === "pause") this.playbackState = { ...this.playbackState, playing: false };
    if (cmd.command === "seek") this.playbackState = { ...this.playbackState, frame: cmd.frame! };
    if (cmd.command === "set_rate") this.playbackState = { ...this.playbackState, fps: cmd.fps! };
    return this.playbackState;
  }

  async getSlice(frame: number, axis: Axis, index: number): Promise<Uint8Array> {
    this.log.push(`GET /frames/${frame}/slice/${axis}/${index}`);
    return pngBytes(frame, axis, index);
  }

  async getMesh(frame: number): Promise<ArrayBuffer> {
    this.log.push(`GET /frames/${frame}/mesh`);
    return emptyMesh();
  }

  async getParticles(frame: number): Promise<ArrayBuffer> {
    this.log.push(`GET /frames/${frame}/particles`);
    return emptyTexture();
  }

  async getStreamlines(frame: number): Promise<ArrayBuffer> {
    this.log.push(`GET /frames/${frame}/streamlines`);
    return emptyLines();
  }

  async getVisibleAnnotations(frame: number): Promise<AnnotationJson[]> {
    this.log.push(`GET /annotations/visible?frame=${frame}`);
    return this.annotations.filter((a) => a.frame_start <= frame && frame <= a.frame_end);
  }

  async createAnnotation(body: AnnotationBody): Promise<AnnotationJson> {
    this.log.push("POST /annotations");
    const ann: AnnotationJson = { id: this.nextId++, ...body };
    this.annotations.push(ann);
    return ann;
  }

  async deleteAnnotation(id: number): Promise<void> {
    this.log.push(`DELETE /annotations/${id}`);
    this.annotations = this.annotations.filter((a) => a.id !== id);
  }
}

describe("scripted session", () => {
  it("replays load, playback, slicing, annotation, and scrubbing", async () => {
    const t = new FakeTransport();
    const c = new ViewerController(t);

    // -- load
    c.dispatch({ type: "connect" });
    await c.idle();
    expect(t.log[0]).toBe("GET /session");
    // initial fan-out: one idiom payload, three mid slices, visibility at frame 0
    expect(t.log.slice(1).sort()).toEqual([
      "GET /annotations/visible?frame=0",
      "GET /frames/0/mesh",
      "GET /frames/0/slice/x/4",
      "GET /frames/0/slice/y/4",
      "GET /frames/0/slice/z/4",
    ]);
    expect(c.state.slices.z.png).toEqual(pngBytes(0, "z", 4));
    t.log.length = 0;

    // -- play, then seek
    c.dispatch({ type: "play" });
    await c.idle();
    expect(t.log).toEqual(["POST /playback play"]);
    t.log.length = 0;

    c.dispatch({ type: "seek", frame: 1 });
    await c.idle();
    expect(t.log[0]).toBe("POST /playback seek 1");
    // server reported frame 1: idiom + slices + visibility follow
    expect(t.log.slice(1).sort()).toEqual([
      "GET /annotations/visible?frame=1",
      "GET /frames/1/mesh",
      "GET /frames/1/slice/x/4",
      "GET /frames/1/slice/y/4",
      "GET /frames/1/slice/z/4",
    ]);
    expect(c.state.frame).toBe(1);
    t.log.length = 0;

    // -- drag each slice handle; jitter coalesces into settled indices
    c.dispatch({ type: "drag_slice", axis: "x", index: 6 });
    c.dispatch({ type: "drag_slice", axis: "y", index: 2 });
    c.dispatch({ type: "drag_slice", axis: "z", index: 7 });
    await c.idle();
    expect(t.log.sort()).toEqual([
      "GET /frames/1/slice/x/6",
      "GET /frames/1/slice/y/2",
      "GET /frames/1/slice/z/7",
    ]);
    expect(c.state.slices.x).toMatchObject({ index: 6, stale: false, pending: null });
    expect(c.state.slices.x.png).toEqual(pngBytes(1, "x", 6));
    expect(c.state.slices.y.png).toEqual(pngBytes(1, "y", 2));
    expect(c.state.slices.z.png).toEqual(pngBytes(1, "z", 7));
    t.log.length = 0;

    // -- draw a stroke and save it over frames [2, 5]
    c.dispatch({ type: "stroke_start", point: [1, 1, 1] });
    c.dispatch({ type: "stroke_point", point: [2, 2, 2] });
    c.dispatch({ type: "stroke_point", point: [3, 2, 2] });
    c.dispatch({ type: "stroke_end" });
    c.dispatch({ type: "set_draft_meta", frameStart: 2, frameEnd: 5, group: "walkthrough" });
    c.dispatch({ type: "save_annotation" });
    await c.idle();
    expect(t.log).toEqual([
      "POST /annotations",
      "GET /annotations/visible?frame=1",  // refresh after the save
    ]);
    const savedId = c.state.savedIds[0];
    expect(savedId).toBe(1);
    // frame 1 is outside [2, 5]: not visible yet
    expect(isAnnotationVisible(c.state, savedId)).toBe(false);
    t.log.length = 0;

    // -- scrub inside the range: the annotation shows
    c.dispatch({ type: "seek", frame: 4 });
    await c.idle();
    expect(isAnnotationVisible(c.state, savedId)).toBe(true);
    expect(c.state.visible[0].strokes).toEqual([[[1, 1, 1], [2, 2, 2], [3, 2, 2]]]);
    t.log.length = 0;

    // -- scrub past the range: the annotation hides
    c.dispatch({ type: "seek", frame: 6 });
    await c.idle();
    expect(c.state.frame).toBe(6);
    expect(isAnnotationVisible(c.state, savedId)).toBe(false);
    expect(c.state.visible).toEqual([]);
  });

  it("coalesces rapid drags on one axis to at most one in-flight request", async () => {
    const t = new FakeTransport();
    const c = new ViewerController(t);
    c.dispatch({ type: "connect" });
    await c.idle();
    t.log.length = 0;

    for (const index of [5, 6, 7, 6, 3]) {
      c.dispatch({ type: "drag_slice", axis: "y", index });
    }
    await c.idle();
    // first request fires immediately; everything else collapses to the
    // latest position once it returns
    expect(t.log[0]).toBe("GET /frames/0/slice/y/5");
    expect(t.log.at(-1)).toBe("GET /frames/0/slice/y/3");
    expect(t.log.length).toBeLessThanOrEqual(3);
    expect(c.state.slices.y.index).toBe(3);
    expect(c.state.slices.y.png).toEqual(pngBytes(0, "y", 3));
  });

  it("a failing slice keeps the old image with a stale badge", async () => {
    const t = new FakeTransport();
    const c = new ViewerController(t);
    c.dispatch({ type: "connect" });
    await c.idle();
    const before = c.state.slices.z.png;
    expect(before).not.toBeNull();

    t.getSlice = async (frame, axis, index) => {
      t.log.push(`GET /frames/${frame}/slice/${axis}/${index}`);
      throw new Error("boom");
    };
    c.dispatch({ type: "drag_slice", axis: "z", index: 1 });
    await c.idle();
    expect(c.state.slices.z.png).toBe(before);
    expect(c.state.slices.z.stale).toBe(true);
  });

  it("a failing idiom payload shows a retryable placeholder", async () => {
    const t = new FakeTransport();
    t.getMesh = async (frame: number) => {
      t.log.push(`GET /frames/${frame}/mesh`);
      throw new Error("boom");
    };
    const c = new ViewerController(t);
    c.dispatch({ type: "connect" });
    await c.idle();
    expect(c.state.payloads["isosurface:0"]).toBe("failed");

    // retry after the backend recovers
    t.getMesh = async (frame: number) => {
      t.log.push(`GET /frames/${frame}/mesh`);
      return emptyMesh();
    };
    c.dispatch({ type: "retry_payload" });
    await c.idle();
    expect(c.state.payloads["isosurface:0"]).not.toBe("failed");
  });
});
