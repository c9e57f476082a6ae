/** Geometry-building checks that need no WebGL context. */

import * as THREE from "three";
import { describe, expect, it } from "vitest";
import { buildIdiom } from "../src/render";

describe("idiom geometry", () => {
  it("draws exactly occupancy-many particle sprites", () => {
    const obj = buildIdiom({
      kind: "particles",
      particles: {
        resolution: 4, occupancy: 4,
        positions: new Float32Array([0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1]),
        scalar: new Float32Array([0, 1, 2, 3]),
      },
    });
    expect(obj).toBeInstanceOf(THREE.Points);
    const geo = (obj as THREE.Points).geometry;
    expect(geo.getAttribute("position").count).toBe(4);
    expect(geo.getAttribute("color").count).toBe(4);
  });

  it("meshes are double-sided so boundaries read from inside", () => {
    const obj = buildIdiom({
      kind: "isosurface",
      mesh: {
        vertexCount: 3, triangleCount: 1,
        positions: new Float32Array([0, 0, 0, 1, 0, 0, 0, 1, 0]),
        normals: new Float32Array([0, 0, 1, 0, 0, 1, 0, 0, 1]),
        uvs: new Float32Array(6),
        indices: new Uint32Array([0, 1, 2]),
      },
    });
    expect(obj).toBeInstanceOf(THREE.Mesh);
    const mat = (obj as THREE.Mesh).material as THREE.MeshStandardMaterial;
    expect(mat.side).toBe(THREE.DoubleSide);
  });

  it("streamlines become one colored polyline per traced line", () => {
    const obj = buildIdiom({
      kind: "streamlines",
      streamlines: {
        lines: [
          new Float32Array([0, 0, 0, 1, 1, 0, 0, 2, 2, 0, 0, 3]),
          new Float32Array([5, 5, 5, 9, 6, 5, 5, 9]),
        ],
      },
    });
    const lines = (obj as THREE.Group).children;
    expect(lines.length).toBe(2);
    const geo = (lines[0] as THREE.Line).geometry;
    expect(geo.getAttribute("position").count).toBe(3);
    expect(geo.getAttribute("color").count).toBe(3);
  });
});
