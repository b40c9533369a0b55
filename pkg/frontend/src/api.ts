/** Typed client for the engine's HTTP session API. */

import { CameraState, poseQueryString, poseToArray12 } from "./pose.js";

export interface StepTiming {
  render_ms: number;
  inpaint_ms: number;
  depth_ms: number;
  stepsplat_ms: number;
  fuse_ms: number;
  total_ms: number;
}

export interface StepResponse {
  frame_url: string;
  timing: StepTiming;
  aggregate: { geometry_ms: number; appearance_ms: number; total_ms: number };
  reference_gpu_seconds: { geometry: number; appearance: number; total: number };
  gaussian_count: number;
  step_count: number;
}

export interface SessionMetadata {
  id: string;
  step_count: number;
  prompts: string[];
  gaussian_count: number;
  intrinsics: { width: number; height: number };
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async metadata(sessionId: string): Promise<SessionMetadata> {
    const resp = await fetch(this.url(`/session/${sessionId}`));
    if (!resp.ok) throw new Error(`metadata: HTTP ${resp.status}`);
    return resp.json();
  }

  async step(sessionId: string, pose: CameraState, prompt: string): Promise<StepResponse> {
    const resp = await fetch(this.url(`/session/${sessionId}/step`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ pose: poseToArray12(pose), prompt }),
    });
    if (!resp.ok) {
      const body = await resp.json().catch(() => ({ detail: `HTTP ${resp.status}` }));
      throw new Error(body.detail ?? `step: HTTP ${resp.status}`);
    }
    return resp.json();
  }

  /** Fetch an exploratory render; returns the PNG part as an object URL. */
  async render(sessionId: string, pose: CameraState): Promise<string> {
    const resp = await fetch(
      this.url(`/session/${sessionId}/render?pose=${poseQueryString(pose)}`));
    if (!resp.ok) throw new Error(`render: HTTP ${resp.status}`);
    const contentType = resp.headers.get("content-type") ?? "";
    const boundary = contentType.split("boundary=")[1];
    const bytes = new Uint8Array(await resp.arrayBuffer());
    const png = extractPart(bytes, boundary, "image/png");
    const copy = new Uint8Array(png.length);  // fresh ArrayBuffer for Blob typing
    copy.set(png);
    return URL.createObjectURL(new Blob([copy.buffer], { type: "image/png" }));
  }

  frameUrl(path: string): string {
    return this.url(path);
  }

  exportUrl(sessionId: string): string {
    return this.url(`/session/${sessionId}/export.ply`);
  }
}

/** Pull one part's body out of a multipart/mixed payload. */
export function extractPart(bytes: Uint8Array, boundary: string,
                            contentType: string): Uint8Array {
  const text = new TextDecoder("latin1").decode(bytes);
  const marker = `--${boundary}`;
  let cursor = 0;
  while (true) {
    const start = text.indexOf(marker, cursor);
    if (start < 0) break;
    const headerEnd = text.indexOf("\r\n\r\n", start);
    if (headerEnd < 0) break;
    const next = text.indexOf(marker, headerEnd);
    const headers = text.slice(start, headerEnd);
    if (headers.includes(contentType)) {
      const bodyStart = headerEnd + 4;
      const bodyEnd = (next < 0 ? text.length : next) - 2; // trailing \r\n
      return bytes.slice(bodyStart, bodyEnd);
    }
    if (next < 0) break;
    cursor = next;
  }
  throw new Error(`multipart: no ${contentType} part found`);
}
