/**
 * Binds the pure state machine to a transport.
 *
 * Effects execute asynchronously; their responses come back as events.
 * Slice fetches coalesce per (frame, axis): while one is in flight, newer
 * indices replace the queued one, so a drag settles into at most one
 * request per in-flight slot - never a request per pointer move.
 */

import type { Transport } from "./api";
import { decodeMesh, decodeParticles, decodeStreamlines } from "./protocol";
import type { Axis } from "./protocol";
import { Effect, Event, Step, ViewerState, initialState, reduce } from "./state";

export class ViewerController {
  state: ViewerState = initialState();
  private listeners: ((s: ViewerState) => void)[] = [];
  private sliceInFlight = new Map<string, boolean>();
  private sliceQueued = new Map<string, number>();
  private tasks: Promise<void>[] = [];

  constructor(private transport: Transport) {}

  onChange(fn: (s: ViewerState) => void): void {
    this.listeners.push(fn);
  }

  dispatch(event: Event): void {
    const step: Step = reduce(this.state, event);
    this.state = step.state;
    for (const fn of this.listeners) fn(this.state);
    for (const effect of step.effects) this.run(effect);
  }

  /** Resolves when every in-flight request (and its follow-ups) settled. */
  async idle(): Promise<void> {
    while (this.tasks.length) {
      const batch = this.tasks;
      this.tasks = [];
      await Promise.all(batch);
    }
  }

  private track(p: Promise<void>): void {
    this.tasks.push(p.catch(() => undefined));
  }

  private run(effect: Effect): void {
    switch (effect.kind) {
      case "get_session":
        this.track(this.transport.getSession().then((summary) =>
          this.dispatch({ type: "session_loaded", summary })));
        break;

      case "playback":
        this.track(this.transport
          .playback({ command: effect.command, frame: effect.frame, fps: effect.fps })
          .then((state) => this.dispatch({ type: "playback_state", state })));
        break;

      case "fetch_slice":
        this.queueSlice(effect.frame, effect.axis, effect.index);
        break;

      case "fetch_idiom": {
        const { idiom, frame } = effect;
        const fail = () => this.dispatch({ type: "idiom_failed", frame, idiom });
        if (idiom === "isosurface") {
          this.track(this.transport.getMesh(frame, this.state.iso, this.state.ratio)
            .then((buf) => this.dispatch({
              type: "idiom_payload", frame,
              payload: { kind: "isosurface", mesh: decodeMesh(buf) },
            }), fail));
        } else if (idiom === "particles") {
          this.track(this.transport
            .getParticles(frame, this.state.fraction, this.state.resolution)
            .then((buf) => this.dispatch({
              type: "idiom_payload", frame,
              payload: { kind: "particles", particles: decodeParticles(buf) },
            }), fail));
        } else {
          this.track(this.transport
            .getStreamlines(frame, this.state.stride, this.state.maxSteps)
            .then((buf) => this.dispatch({
              type: "idiom_payload", frame,
              payload: { kind: "streamlines", streamlines: decodeStreamlines(buf) },
            }), fail));
        }
        break;
      }

      case "fetch_visible":
        this.track(this.transport.getVisibleAnnotations(effect.frame)
          .then((annotations) => this.dispatch(
            { type: "visible_annotations", frame: effect.frame, annotations })));
        break;

      case "save_annotation":
        this.track(this.transport.createAnnotation(effect.body)
          .then((annotation) => this.dispatch({ type: "annotation_saved", annotation })));
        break;
    }
  }

  private queueSlice(frame: number, axis: Axis, index: number): void {
    const slot = `${frame}:${axis}`;
    if (this.sliceInFlight.get(slot)) {
      this.sliceQueued.set(slot, index);  // latest drag position wins
      return;
    }
    this.sliceInFlight.set(slot, true);
    this.track(this.transport.getSlice(frame, axis, index)
      .then(
        (png) => this.dispatch({ type: "slice_image", frame, axis, index, png }),
        () => this.dispatch({ type: "slice_failed", frame, axis, index }))
      .finally(() => {
        this.sliceInFlight.set(slot, false);
        const queued = this.sliceQueued.get(slot);
        this.sliceQueued.delete(slot);
        if (queued !== undefined && queued !== index) {
          this.queueSlice(frame, axis, queued);
        }
      }));
  }
}
