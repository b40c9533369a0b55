/**
 * Viewer state machine, kept pure so transitions are unit-testable.
 *
 * Explore mode issues read-only renders and never grows the scene;
 * in-flight exploration coalesces (latest requested pose wins). Commit
 * posts exactly one step and is disabled while one is in flight,
 * mirroring the server's 409 contract. Gaussian-count history is
 * append-only.
 */

import { CameraState, samePose } from "./pose.js";
import { StepResponse, StepTiming } from "./api.js";

export type Mode = "explore" | "commit";

export interface ViewerState {
  sessionId: string | null;
  pose: CameraState;
  mode: Mode;
  prompt: string;
  stepInFlight: boolean;
  renderInFlight: boolean;
  pendingRenderPose: CameraState | null;
  gaussianHistory: number[];
  stepCount: number;
  lastTiming: StepTiming | null;
  lastReference: { geometry: number; appearance: number; total: number } | null;
}

export function initialViewerState(pose: CameraState): ViewerState {
  return {
    sessionId: null,
    pose,
    mode: "explore",
    prompt: "",
    stepInFlight: false,
    renderInFlight: false,
    pendingRenderPose: null,
    gaussianHistory: [],
    stepCount: 0,
    lastTiming: null,
    lastReference: null,
  };
}

export function attachSession(state: ViewerState, sessionId: string,
                              gaussianCount: number, stepCount: number): ViewerState {
  return {
    ...state,
    sessionId,
    gaussianHistory: [...state.gaussianHistory, gaussianCount],
    stepCount,
  };
}

/**
 * Ask for an exploratory render. Returns the pose to fetch now, or null
 * if one is already in flight (the request is remembered and coalesced).
 */
export function requestExplore(state: ViewerState,
                               pose: CameraState): { state: ViewerState; fire: CameraState | null } {
  if (state.renderInFlight) {
    return { state: { ...state, pendingRenderPose: pose }, fire: null };
  }
  return { state: { ...state, renderInFlight: true }, fire: pose };
}

/** A render finished; fire the latest coalesced pose if it still differs. */
export function exploreDone(state: ViewerState,
                            shownPose: CameraState): { state: ViewerState; fire: CameraState | null } {
  const pending = state.pendingRenderPose;
  if (pending !== null && !samePose(pending, shownPose)) {
    return {
      state: { ...state, pendingRenderPose: null, renderInFlight: true },
      fire: pending,
    };
  }
  return {
    state: { ...state, pendingRenderPose: null, renderInFlight: false },
    fire: null,
  };
}

/** Start a commit unless one is already in flight. */
export function beginCommit(state: ViewerState): ViewerState | null {
  if (state.stepInFlight || state.sessionId === null) return null;
  return { ...state, stepInFlight: true, mode: "commit" };
}

export function commitDone(state: ViewerState, result: StepResponse): ViewerState {
  return {
    ...state,
    stepInFlight: false,
    mode: "explore",
    gaussianHistory: [...state.gaussianHistory, result.gaussian_count],
    stepCount: result.step_count,
    lastTiming: result.timing,
    lastReference: result.reference_gpu_seconds,
  };
}

export function commitFailed(state: ViewerState): ViewerState {
  return { ...state, stepInFlight: false, mode: "explore" };
}

/** Stage rows for the timing bar: measured milliseconds per stage. */
export function timingRows(timing: StepTiming): { label: string; ms: number }[] {
  return [
    { label: "render", ms: timing.render_ms },
    { label: "inpaint", ms: timing.inpaint_ms },
    { label: "depth", ms: timing.depth_ms },
    { label: "stepsplat", ms: timing.stepsplat_ms },
    { label: "fuse", ms: timing.fuse_ms },
  ];
}
