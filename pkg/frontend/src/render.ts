/**
 * three.js scene: one idiom at a time (point sprites / colored polylines /
 * two-sided shaded mesh), three draggable slice planes with spherical
 * handles, annotation tubes, and a dark mode that blacks out the room
 * while the idioms stay lit.
 */

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import { colorize } from "./gradient";
import type { Axis, GridInfo } from "./protocol";
import type { IdiomPayload, ViewerState, Vec3 } from "./state";

const LIGHT_BG = new THREE.Color(0x2a2f3a);
const DARK_BG = new THREE.Color(0x000000);

export interface DragCallbacks {
  onSliceDrag(axis: Axis, index: number): void;
  onStrokePoint(point: Vec3, start: boolean): void;
  onStrokeEnd(): void;
}

export class ViewerScene {
  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private controls: OrbitControls;
  private idiomGroup = new THREE.Group();
  private annotationGroup = new THREE.Group();
  private planeGroup = new THREE.Group();
  private roomGrid: THREE.GridHelper;
  private ambient = new THREE.AmbientLight(0xffffff, 0.45);
  private key = new THREE.DirectionalLight(0xffffff, 1.1);
  private handles: Partial<Record<Axis, THREE.Mesh>> = {};
  private grid: GridInfo | null = null;
  private raycaster = new THREE.Raycaster();
  private dragging: Axis | null = null;
  private drawing = false;

  constructor(private canvas: HTMLCanvasElement, private callbacks: DragCallbacks) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(50, 1, 0.01, 5000);
    this.camera.position.set(2, 2, 2);
    this.controls = new OrbitControls(this.camera, canvas);
    this.key.position.set(1, 2, 1.5);
    this.roomGrid = new THREE.GridHelper(4, 20, 0x335577, 0x223344);
    this.scene.add(this.ambient, this.key, this.roomGrid,
                   this.idiomGroup, this.annotationGroup, this.planeGroup);
    this.scene.background = LIGHT_BG;
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", () => this.pointerUp());
    const loop = () => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
      requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
  }

  setSize(w: number, h: number): void {
    this.renderer.setSize(w, h, false);
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
  }

  /** Enable stroke drawing mode: pointer paths project onto the active slice plane. */
  setDrawing(on: boolean): void {
    this.drawing = on;
    this.controls.enabled = !on;
  }

  sync(state: ViewerState): void {
    this.grid = state.session?.scalar ?? state.session?.vector ?? null;
    this.scene.background = state.darkMode ? DARK_BG : LIGHT_BG;
    this.roomGrid.visible = !state.darkMode;
    this.ambient.intensity = state.darkMode ? 0.4 : 0.45;  // idioms stay lit

    if (this.grid) {
      this.fitCameraOnce();
      this.syncPlanes(state);
    }
    this.syncIdiom(state);
    this.syncAnnotations(state);
  }

  private fitted = false;

  private fitCameraOnce(): void {
    if (this.fitted || !this.grid) return;
    this.fitted = true;
    const [cx, cy, cz] = this.gridCenter();
    const ext = this.gridExtent();
    this.controls.target.set(cx, cy, cz);
    this.camera.position.set(cx + ext, cy + ext * 0.8, cz + ext);
    this.camera.far = ext * 50;
    this.camera.updateProjectionMatrix();
    (this.roomGrid as THREE.GridHelper).scale.setScalar(ext);
    this.roomGrid.position.set(cx, cy - ext * 0.6, cz);
  }

  private gridCenter(): Vec3 {
    const g = this.grid!;
    return [0, 1, 2].map((a) =>
      g.origin[a] + (g.dims[a] - 1) * g.spacing[a] / 2) as Vec3;
  }

  private gridExtent(): number {
    const g = this.grid!;
    return Math.max(...[0, 1, 2].map((a) => (g.dims[a] - 1) * g.spacing[a]));
  }

  private syncIdiom(state: ViewerState): void {
    this.idiomGroup.clear();
    const payload = state.payloads[`${state.idiom}:${state.frame}`];
    if (!payload || payload === "pending" || payload === "failed") {
      return;  // placeholder: the HUD shows status/retry, scene stays stable
    }
    this.idiomGroup.add(buildIdiom(payload));
  }

  private syncAnnotations(state: ViewerState): void {
    this.annotationGroup.clear();
    for (const ann of state.visible) {
      const color = new THREE.Color(
        ann.color[0] / 255, ann.color[1] / 255, ann.color[2] / 255);
      for (const stroke of ann.strokes) {
        this.annotationGroup.add(strokeTube(stroke, color, this.strokeRadius()));
      }
    }
    const d = state.draft;
    const draftColor = new THREE.Color(
      d.color[0] / 255, d.color[1] / 255, d.color[2] / 255);
    for (const stroke of [...d.strokes, ...(d.current ? [d.current] : [])]) {
      if (stroke.length >= 2) {
        this.annotationGroup.add(strokeTube(stroke, draftColor, this.strokeRadius()));
      }
    }
  }

  private strokeRadius(): number {
    return this.grid ? this.gridExtent() * 0.004 : 0.01;
  }

  private syncPlanes(state: ViewerState): void {
    if (!state.session?.scalar) return;
    this.planeGroup.clear();
    this.handles = {};
    const g = state.session.scalar;
    const center = this.gridCenter();
    for (const axis of ["x", "y", "z"] as Axis[]) {
      const a = axis === "x" ? 0 : axis === "y" ? 1 : 2;
      const entry = state.slices[axis];
      const pos = g.origin[a] + (entry.pending ?? entry.index) * g.spacing[a];

      const others = [0, 1, 2].filter((i) => i !== a);
      const w = (g.dims[others[0]] - 1) * g.spacing[others[0]];
      const h = (g.dims[others[1]] - 1) * g.spacing[others[1]];
      const plane = new THREE.Mesh(
        new THREE.PlaneGeometry(w, h),
        new THREE.MeshBasicMaterial({
          color: axis === "x" ? 0xff5544 : axis === "y" ? 0x44cc66 : 0x4488ff,
          transparent: true, opacity: entry.stale ? 0.08 : 0.16,
          side: THREE.DoubleSide, depthWrite: false,
        }));
      const p: Vec3 = [...center];
      p[a] = pos;
      plane.position.set(...p);
      if (axis === "x") plane.rotation.y = Math.PI / 2;
      if (axis === "y") plane.rotation.x = Math.PI / 2;
      this.planeGroup.add(plane);

      const handle = new THREE.Mesh(
        new THREE.SphereGeometry(this.gridExtent() * 0.02),
        new THREE.MeshStandardMaterial({
          color: (plane.material as THREE.MeshBasicMaterial).color }));
      const hp: Vec3 = [...center];
      hp[a] = pos;
      hp[others[0]] = g.origin[others[0]] - this.gridExtent() * 0.06;
      handle.position.set(...hp);
      handle.userData.axis = axis;
      this.handles[axis] = handle;
      this.planeGroup.add(handle);
    }
  }

  private pointerNdc(e: PointerEvent): THREE.Vector2 {
    const r = this.canvas.getBoundingClientRect();
    return new THREE.Vector2(
      ((e.clientX - r.left) / r.width) * 2 - 1,
      -((e.clientY - r.top) / r.height) * 2 + 1);
  }

  private pointerDown(e: PointerEvent): void {
    this.raycaster.setFromCamera(this.pointerNdc(e), this.camera);
    if (this.drawing) {
      const p = this.drawingPlanePoint();
      if (p) this.callbacks.onStrokePoint(p, true);
      return;
    }
    const handles = Object.values(this.handles).filter(Boolean) as THREE.Mesh[];
    const hit = this.raycaster.intersectObjects(handles)[0];
    if (hit) {
      this.dragging = hit.object.userData.axis as Axis;
      this.controls.enabled = false;
    }
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.dragging && !this.drawing) return;
    this.raycaster.setFromCamera(this.pointerNdc(e), this.camera);
    if (this.drawing) {
      if (e.buttons) {
        const p = this.drawingPlanePoint();
        if (p) this.callbacks.onStrokePoint(p, false);
      }
      return;
    }
    if (this.dragging && this.grid) {
      const a = this.dragging === "x" ? 0 : this.dragging === "y" ? 1 : 2;
      // drag along the axis: intersect with a camera-facing plane through the axis line
      const axisDir = new THREE.Vector3();
      axisDir.setComponent(a, 1);
      const camDir = this.camera.getWorldDirection(new THREE.Vector3());
      const normal = camDir.clone().sub(axisDir.clone().multiplyScalar(camDir.dot(axisDir)));
      if (normal.lengthSq() < 1e-9) return;
      const center = new THREE.Vector3(...this.gridCenter());
      const plane = new THREE.Plane().setFromNormalAndCoplanarPoint(normal.normalize(), center);
      const hit = new THREE.Vector3();
      if (this.raycaster.ray.intersectPlane(plane, hit)) {
        const g = this.grid;
        const index = (hit.getComponent(a) - g.origin[a]) / g.spacing[a];
        this.callbacks.onSliceDrag(this.dragging, index);
      }
    }
  }

  private pointerUp(): void {
    if (this.drawing) this.callbacks.onStrokeEnd();
    this.dragging = null;
    if (!this.drawing) this.controls.enabled = true;
  }

  /** Current pointer ray intersected with the active (z by default) slice plane. */
  activeDrawAxis: Axis = "z";

  private drawingPlanePoint(): Vec3 | null {
    if (!this.grid) return null;
    const a = this.activeDrawAxis === "x" ? 0 : this.activeDrawAxis === "y" ? 1 : 2;
    const handle = this.handles[this.activeDrawAxis];
    const coord = handle ? handle.position.getComponent(a) : this.gridCenter()[a];
    const normal = new THREE.Vector3();
    normal.setComponent(a, 1);
    const point = new THREE.Vector3();
    point.setComponent(a, coord);
    const plane = new THREE.Plane().setFromNormalAndCoplanarPoint(normal, point);
    const hit = new THREE.Vector3();
    if (!this.raycaster.ray.intersectPlane(plane, hit)) return null;
    return [hit.x, hit.y, hit.z];
  }
}

export function buildIdiom(payload: IdiomPayload): THREE.Object3D {
  if (payload.kind === "isosurface") {
    const m = payload.mesh;
    const geo = new THREE.BufferGeometry();
    geo.setAttribute("position", new THREE.BufferAttribute(m.positions, 3));
    geo.setAttribute("normal", new THREE.BufferAttribute(m.normals, 3));
    geo.setAttribute("uv", new THREE.BufferAttribute(m.uvs, 2));
    geo.setIndex(new THREE.BufferAttribute(m.indices, 1));
    // boundary surfaces are inspected from inside too: shade both sides
    const mat = new THREE.MeshStandardMaterial({
      color: 0x46b1e1, side: THREE.DoubleSide, flatShading: false,
      metalness: 0.05, roughness: 0.65,
    });
    return new THREE.Mesh(geo, mat);
  }

  if (payload.kind === "particles") {
    const p = payload.particles;
    const geo = new THREE.BufferGeometry();
    geo.setAttribute("position", new THREE.BufferAttribute(p.positions, 3));
    let vmin = Infinity, vmax = -Infinity;
    for (const v of p.scalar) {
      vmin = Math.min(vmin, v);
      vmax = Math.max(vmax, v);
    }
    geo.setAttribute("color", new THREE.BufferAttribute(colorize(p.scalar, vmin, vmax), 3));
    const mat = new THREE.PointsMaterial({ size: 2.5, vertexColors: true, sizeAttenuation: false });
    return new THREE.Points(geo, mat);
  }

  const group = new THREE.Group();
  let vmin = Infinity, vmax = -Infinity;
  for (const line of payload.streamlines.lines) {
    for (let i = 3; i < line.length; i += 4) {
      vmin = Math.min(vmin, line[i]);
      vmax = Math.max(vmax, line[i]);
    }
  }
  for (const line of payload.streamlines.lines) {
    const n = line.length / 4;
    if (n < 2) continue;
    const pos = new Float32Array(n * 3);
    const mag = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      pos[3 * i] = line[4 * i];
      pos[3 * i + 1] = line[4 * i + 1];
      pos[3 * i + 2] = line[4 * i + 2];
      mag[i] = line[4 * i + 3];
    }
    const geo = new THREE.BufferGeometry();
    geo.setAttribute("position", new THREE.BufferAttribute(pos, 3));
    geo.setAttribute("color", new THREE.BufferAttribute(colorize(mag, vmin, vmax), 3));
    group.add(new THREE.Line(geo, new THREE.LineBasicMaterial({ vertexColors: true })));
  }
  return group;
}

function strokeTube(points: ArrayLike<number>[] | Vec3[], color: THREE.Color,
                    radius: number): THREE.Mesh {
  const curve = new THREE.CatmullRomCurve3(
    Array.from(points, (p) => new THREE.Vector3(p[0], p[1], p[2])));
  const geo = new THREE.TubeGeometry(curve, Math.max(8, points.length * 2), radius, 6, false);
  return new THREE.Mesh(geo, new THREE.MeshStandardMaterial({ color }));
}
