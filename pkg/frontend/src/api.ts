/**
 * Transport over the exploration service API.
 *
 * Every call is logged as "METHOD path" so scripted sessions can assert the
 * exact request sequence the UI produced.  The viewer never computes
 * geometry or heatmaps itself; everything visible comes through here.
 */

import type { AnnotationJson, Axis, PlaybackState, SessionSummary } from "./protocol";

export interface AnnotationBody {
  group: string;
  color: [number, number, number];
  frame_start: number;
  frame_end: number;
  strokes: [number, number, number][][];
}

export interface PlaybackCommand {
  command: "play" | "pause" | "seek" | "set_rate";
  frame?: number;
  fps?: number;
}

export interface IdiomParams {
  iso: number;
  ratio: number | null;
  fraction: number;
  res: number;
  stride: number;
  maxSteps: number;
}

export interface Transport {
  readonly log: string[];
  getSession(): Promise<SessionSummary>;
  playback(cmd: PlaybackCommand): Promise<PlaybackState>;
  getSlice(frame: number, axis: Axis, index: number): Promise<Uint8Array>;
  getMesh(frame: number, iso: number, ratio: number | null): Promise<ArrayBuffer>;
  getParticles(frame: number, fraction: number, res: number): Promise<ArrayBuffer>;
  getStreamlines(frame: number, stride: number, maxSteps: number): Promise<ArrayBuffer>;
  getVisibleAnnotations(frame: number): Promise<AnnotationJson[]>;
  createAnnotation(body: AnnotationBody): Promise<AnnotationJson>;
  deleteAnnotation(id: number): Promise<void>;
}

export class HttpTransport implements Transport {
  readonly log: string[] = [];

  constructor(private base: string) {}

  private note(method: string, path: string): string {
    this.log.push(`${method} ${path}`);
    return this.base + path;
  }

  private async json<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.note(method, path), {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = await resp.json();
    if (!resp.ok) {
      const code = (data as { error?: { code?: string } }).error?.code ?? resp.status;
      throw new Error(`${path}: ${code}`);
    }
    return data as T;
  }

  private async bytes(path: string): Promise<ArrayBuffer> {
    const resp = await fetch(this.note("GET", path));
    if (!resp.ok) throw new Error(`${path}: ${resp.status}`);
    return resp.arrayBuffer();
  }

  getSession(): Promise<SessionSummary> {
    return this.json("GET", "/session");
  }

  playback(cmd: PlaybackCommand): Promise<PlaybackState> {
    return this.json("POST", "/playback", cmd);
  }

  async getSlice(frame: number, axis: Axis, index: number): Promise<Uint8Array> {
    return new Uint8Array(await this.bytes(`/frames/${frame}/slice/${axis}/${index}`));
  }

  getMesh(frame: number, iso: number, ratio: number | null): Promise<ArrayBuffer> {
    const q = ratio === null ? `iso=${iso}` : `iso=${iso}&ratio=${ratio}`;
    return this.bytes(`/frames/${frame}/mesh?${q}`);
  }

  getParticles(frame: number, fraction: number, res: number): Promise<ArrayBuffer> {
    return this.bytes(`/frames/${frame}/particles?fraction=${fraction}&res=${res}`);
  }

  getStreamlines(frame: number, stride: number, maxSteps: number): Promise<ArrayBuffer> {
    return this.bytes(`/frames/${frame}/streamlines?stride=${stride}&max_steps=${maxSteps}`);
  }

  getVisibleAnnotations(frame: number): Promise<AnnotationJson[]> {
    return this.json("GET", `/annotations/visible?frame=${frame}`);
  }

  createAnnotation(body: AnnotationBody): Promise<AnnotationJson> {
    return this.json("POST", "/annotations", body);
  }

  async deleteAnnotation(id: number): Promise<void> {
    await this.json("DELETE", `/annotations/${id}`);
  }
}
