/**
 * Wire types and binary payload decoders for the exploration service.
 *
 * All framings are little-endian:
 *  - mesh:        "MSH1" | u32 nv | u32 nt | f32 pos (nv,3) | f32 normal (nv,3)
 *                 | f32 uv (nv,2) | u32 index (nt,3)
 *  - streamlines: "LNS1" | u32 count | per line: u32 n | f32 (x,y,z,mag) * n
 *  - particles:   u32 resolution | u32 occupancy | four R*R f32 channel planes
 *                 (x, y, z, scalar); texels past the occupancy are NaN
 */

export type Axis = "x" | "y" | "z";
export const AXES: Axis[] = ["x", "y", "z"];

export interface GridInfo {
  dims: [number, number, number];
  spacing: [number, number, number];
  origin: [number, number, number];
}

export interface SessionSummary {
  name: string;
  frame_count: number;
  modalities: string[];
  normalization: string;
  playback: PlaybackState;
  scalar?: GridInfo;
  vector?: GridInfo;
  particles?: { counts: number[] };
}

export interface PlaybackState {
  frame: number;
  playing: boolean;
  fps: number;
  frame_count: number;
}

export interface AnnotationJson {
  id: number;
  group: string;
  color: [number, number, number];
  frame_start: number;
  frame_end: number;
  strokes: [number, number, number][][];
}

export interface MeshPayload {
  vertexCount: number;
  triangleCount: number;
  positions: Float32Array;
  normals: Float32Array;
  uvs: Float32Array;
  indices: Uint32Array;
}

export interface StreamlinePayload {
  /** per line: flat (x, y, z, magnitude) quadruples */
  lines: Float32Array[];
}

export interface ParticlePayload {
  resolution: number;
  occupancy: number;
  /** (occupancy, 3) interleaved positions and per-particle scalar */
  positions: Float32Array;
  scalar: Float32Array;
}

function magic(view: DataView): string {
  return String.fromCharCode(view.getUint8(0), view.getUint8(1), view.getUint8(2), view.getUint8(3));
}

export function decodeMesh(buf: ArrayBuffer): MeshPayload {
  const view = new DataView(buf);
  if (magic(view) !== "MSH1") throw new Error("not a mesh payload");
  const nv = view.getUint32(4, true);
  const nt = view.getUint32(8, true);
  let off = 12;
  const take = (n: number) => {
    const arr = new Float32Array(buf.slice(off, off + 4 * n));
    off += 4 * n;
    return arr;
  };
  const positions = take(nv * 3);
  const normals = take(nv * 3);
  const uvs = take(nv * 2);
  const indices = new Uint32Array(buf.slice(off, off + 4 * nt * 3));
  off += 4 * nt * 3;
  if (off !== buf.byteLength) throw new Error("mesh payload size mismatch");
  return { vertexCount: nv, triangleCount: nt, positions, normals, uvs, indices };
}

export function decodeStreamlines(buf: ArrayBuffer): StreamlinePayload {
  const view = new DataView(buf);
  if (magic(view) !== "LNS1") throw new Error("not a streamline payload");
  const count = view.getUint32(4, true);
  let off = 8;
  const lines: Float32Array[] = [];
  for (let i = 0; i < count; i++) {
    const n = view.getUint32(off, true);
    off += 4;
    lines.push(new Float32Array(buf.slice(off, off + 16 * n)));
    off += 16 * n;
  }
  if (off !== buf.byteLength) throw new Error("streamline payload size mismatch");
  return { lines };
}

export function decodeParticles(buf: ArrayBuffer): ParticlePayload {
  const view = new DataView(buf);
  const resolution = view.getUint32(0, true);
  const occupancy = view.getUint32(4, true);
  const texels = resolution * resolution;
  if (buf.byteLength !== 8 + texels * 16) throw new Error("texture payload size mismatch");
  const plane = (c: number) =>
    new Float32Array(buf.slice(8 + c * texels * 4, 8 + (c + 1) * texels * 4));
  const [xs, ys, zs, ss] = [plane(0), plane(1), plane(2), plane(3)];
  const positions = new Float32Array(occupancy * 3);
  const scalar = new Float32Array(occupancy);
  for (let i = 0; i < occupancy; i++) {
    positions[3 * i] = xs[i];
    positions[3 * i + 1] = ys[i];
    positions[3 * i + 2] = zs[i];
    scalar[i] = ss[i];
  }
  return { resolution, occupancy, positions, scalar };
}
