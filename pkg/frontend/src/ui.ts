/** DOM wiring: input capture, frame display, timing bar, sparkline. */

import { ApiClient, StepTiming } from "./api.js";
import { applyInput, CameraState, MoveInput } from "./pose.js";
import {
  beginCommit,
  commitDone,
  commitFailed,
  exploreDone,
  requestExplore,
  timingRows,
  ViewerState,
} from "./state.js";

const MOVE_STEP = 0.1;        // scene units per key press
const LOOK_SENSITIVITY = 0.3; // degrees per pixel of drag

export interface Elements {
  frame: HTMLImageElement;
  status: HTMLElement;
  timing: HTMLElement;
  sparkline: HTMLCanvasElement;
  prompt: HTMLInputElement;
  commit: HTMLButtonElement;
  exportLink: HTMLAnchorElement;
}

export class ViewerApp {
  constructor(private api: ApiClient, private elements: Elements,
              public state: ViewerState) {}

  handleKey(key: string): void {
    const input: MoveInput = { forward: 0, strafe: 0, dYawDeg: 0, dPitchDeg: 0 };
    switch (key.toLowerCase()) {
      case "w": input.forward = 1; break;
      case "s": input.forward = -1; break;
      case "a": input.strafe = -1; break;
      case "d": input.strafe = 1; break;
      default: return;
    }
    this.state = { ...this.state, pose: applyInput(this.state.pose, input, MOVE_STEP) };
    this.explore();
  }

  handleDrag(dxPx: number, dyPx: number): void {
    const input: MoveInput = {
      forward: 0, strafe: 0,
      dYawDeg: dxPx * LOOK_SENSITIVITY,
      dPitchDeg: -dyPx * LOOK_SENSITIVITY,
    };
    this.state = { ...this.state, pose: applyInput(this.state.pose, input, 0) };
    this.explore();
  }

  explore(): void {
    if (this.state.sessionId === null) return;
    const { state, fire } = requestExplore(this.state, this.state.pose);
    this.state = state;
    if (fire !== null) void this.fetchRender(fire);
  }

  private async fetchRender(pose: CameraState): Promise<void> {
    try {
      const url = await this.api.render(this.state.sessionId!, pose);
      this.elements.frame.src = url;
    } catch (err) {
      this.setStatus(`render failed: ${err}`);
    }
    const { state, fire } = exploreDone(this.state, pose);
    this.state = state;
    if (fire !== null) void this.fetchRender(fire);
  }

  async commit(): Promise<void> {
    const started = beginCommit(this.state);
    if (started === null) return;
    this.state = started;
    this.syncControls();
    this.setStatus("committing step…");
    try {
      const result = await this.api.step(
        this.state.sessionId!, this.state.pose, this.state.prompt);
      this.state = commitDone(this.state, result);
      this.elements.frame.src = this.api.frameUrl(result.frame_url);
      this.renderTimingBar(result.timing);
      this.renderSparkline();
      this.setStatus(
        `step ${result.step_count - 1}: ${result.gaussian_count} gaussians, ` +
        `${result.timing.total_ms.toFixed(0)} ms`);
    } catch (err) {
      this.state = commitFailed(this.state);
      this.setStatus(`step failed: ${err}`);
    }
    this.syncControls();
  }

  setPrompt(text: string): void {
    this.state = { ...this.state, prompt: text };
  }

  setStatus(text: string): void {
    this.elements.status.textContent = text;
  }

  syncControls(): void {
    this.elements.commit.disabled = this.state.stepInFlight;
  }

  renderTimingBar(timing: StepTiming): void {
    const rows = timingRows(timing);
    const total = timing.total_ms;
    const ref = this.state.lastReference;
    const bars = rows.map((row) => {
      const pct = total > 0 ? (100 * row.ms) / total : 0;
      return `<div class="stage"><span class="label">${row.label}</span>` +
        `<span class="bar" style="width:${pct.toFixed(1)}%"></span>` +
        `<span class="ms">${row.ms.toFixed(0)} ms</span></div>`;
    }).join("");
    const refLine = ref === null ? "" :
      `<div class="ref">measured total ${(total / 1000).toFixed(2)} s · ` +
      `reference GPU system: geometry ${ref.geometry.toFixed(2)} s, ` +
      `appearance ${ref.appearance.toFixed(2)} s, total ${ref.total.toFixed(2)} s</div>`;
    this.elements.timing.innerHTML = bars + refLine;
  }

  renderSparkline(): void {
    const canvas = this.elements.sparkline;
    const ctx = canvas.getContext("2d");
    if (ctx === null) return;
    const history = this.state.gaussianHistory;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (history.length < 1) return;
    const max = Math.max(...history);
    ctx.strokeStyle = "#4caf83";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    history.forEach((value, i) => {
      const x = history.length === 1 ? 0 : (i / (history.length - 1)) * (canvas.width - 2) + 1;
      const y = canvas.height - 2 - (value / max) * (canvas.height - 4);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    if (this.state.sessionId !== null) {
      this.elements.exportLink.href = this.api.exportUrl(this.state.sessionId);
    }
  }
}
