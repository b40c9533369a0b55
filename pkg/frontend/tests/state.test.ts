import { describe, expect, it } from "vitest";

import { extractPart, StepResponse } from "../src/api.js";
import { CameraState } from "../src/pose.js";
import {
  attachSession,
  beginCommit,
  commitDone,
  commitFailed,
  exploreDone,
  initialViewerState,
  requestExplore,
  timingRows,
} from "../src/state.js";

const origin: CameraState = { x: 0, y: 0, z: 0, yawDeg: 0, pitchDeg: 0 };
const turned: CameraState = { ...origin, yawDeg: 45 };
const turnedMore: CameraState = { ...origin, yawDeg: 90 };

const stepResult: StepResponse = {
  frame_url: "/session/abc/frame/1.png",
  timing: { render_ms: 100, inpaint_ms: 10, depth_ms: 50,
            stepsplat_ms: 30, fuse_ms: 5, total_ms: 197 },
  aggregate: { geometry_ms: 85, appearance_ms: 10, total_ms: 197 },
  reference_gpu_seconds: { geometry: 0.5, appearance: 0.22, total: 0.72 },
  gaussian_count: 5000,
  step_count: 2,
};

function connected() {
  return attachSession(initialViewerState(origin), "abc", 4096, 1);
}

describe("explore coalescing", () => {
  it("fires immediately when idle", () => {
    const { state, fire } = requestExplore(connected(), turned);
    expect(fire).toEqual(turned);
    expect(state.renderInFlight).toBe(true);
  });

  it("remembers only the latest pose while busy", () => {
    let { state } = requestExplore(connected(), turned);
    ({ state } = requestExplore(state, turnedMore));
    const again = requestExplore(state, origin);
    expect(again.fire).toBeNull();
    expect(again.state.pendingRenderPose).toEqual(origin);
  });

  it("fires the coalesced pose once the current render lands", () => {
    let { state } = requestExplore(connected(), turned);
    ({ state } = requestExplore(state, turnedMore));
    const done = exploreDone(state, turned);
    expect(done.fire).toEqual(turnedMore);
    expect(done.state.renderInFlight).toBe(true);
    const settled = exploreDone(done.state, turnedMore);
    expect(settled.fire).toBeNull();
    expect(settled.state.renderInFlight).toBe(false);
  });

  it("explore never touches scene counters", () => {
    const before = connected();
    const { state } = requestExplore(before, turned);
    expect(state.gaussianHistory).toEqual(before.gaussianHistory);
    expect(state.stepCount).toBe(before.stepCount);
  });
});

describe("commit flow", () => {
  it("requires a session", () => {
    expect(beginCommit(initialViewerState(origin))).toBeNull();
  });

  it("is disabled while a step is in flight (mirrors the 409 contract)", () => {
    const started = beginCommit(connected())!;
    expect(started.stepInFlight).toBe(true);
    expect(beginCommit(started)).toBeNull();
  });

  it("appends history and bumps the step count exactly once", () => {
    const started = beginCommit(connected())!;
    const after = commitDone(started, stepResult);
    expect(after.gaussianHistory).toEqual([4096, 5000]);
    expect(after.stepCount).toBe(2);
    expect(after.stepInFlight).toBe(false);
    expect(after.lastTiming).toEqual(stepResult.timing);
  });

  it("history is append-only across commits", () => {
    let state = connected();
    state = commitDone(beginCommit(state)!, stepResult);
    const snapshot = [...state.gaussianHistory];
    state = commitDone(beginCommit(state)!,
                       { ...stepResult, gaussian_count: 6200, step_count: 3 });
    expect(state.gaussianHistory.slice(0, snapshot.length)).toEqual(snapshot);
    expect(state.gaussianHistory).toHaveLength(snapshot.length + 1);
  });

  it("a failed commit re-enables committing", () => {
    const started = beginCommit(connected())!;
    const after = commitFailed(started);
    expect(after.stepInFlight).toBe(false);
    expect(beginCommit(after)).not.toBeNull();
  });
});

describe("timing bar rows", () => {
  it("exposes the five stages that sum to about the total", () => {
    const rows = timingRows(stepResult.timing);
    expect(rows.map((r) => r.label)).toEqual(
      ["render", "inpaint", "depth", "stepsplat", "fuse"]);
    const sum = rows.reduce((acc, r) => acc + r.ms, 0);
    expect(Math.abs(sum - stepResult.timing.total_ms)).toBeLessThan(5);
  });
});

describe("multipart parsing", () => {
  it("extracts the PNG part from a multipart/mixed body", () => {
    const boundary = "splatforge-frame";
    const png = new Uint8Array([0x89, 0x50, 0x4e, 0x47, 0x01, 0x02]);
    const pfm = new TextEncoder().encode("Pf\n1 1\n-1.0\n\x00\x00\x00\x00");
    const chunks: number[] = [];
    const push = (s: string | Uint8Array) => {
      const bytes = typeof s === "string" ? new TextEncoder().encode(s) : s;
      bytes.forEach((b) => chunks.push(b));
    };
    push(`--${boundary}\r\nContent-Type: image/png\r\n\r\n`);
    push(png);
    push(`\r\n--${boundary}\r\nContent-Type: application/x-portable-floatmap\r\n\r\n`);
    push(pfm);
    push(`\r\n--${boundary}--\r\n`);
    const body = new Uint8Array(chunks);

    const gotPng = extractPart(body, boundary, "image/png");
    expect(Array.from(gotPng)).toEqual(Array.from(png));
    const gotPfm = extractPart(body, boundary, "application/x-portable-floatmap");
    expect(Array.from(gotPfm)).toEqual(Array.from(pfm));
    expect(() => extractPart(body, boundary, "video/mp4")).toThrow();
  });
});
