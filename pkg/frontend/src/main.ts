/** Entry point: wire the DOM, attach to a session, start the loop. */

import { ApiClient } from "./api.js";
import { ViewerApp, Elements } from "./ui.js";
import { attachSession, initialViewerState } from "./state.js";

function element<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

function boot(): void {
  const elements: Elements = {
    frame: element<HTMLImageElement>("frame"),
    status: element<HTMLElement>("status"),
    timing: element<HTMLElement>("timing"),
    sparkline: element<HTMLCanvasElement>("sparkline"),
    prompt: element<HTMLInputElement>("prompt"),
    commit: element<HTMLButtonElement>("commit"),
    exportLink: element<HTMLAnchorElement>("export"),
  };
  const baseUrl = element<HTMLInputElement>("base-url");
  const sessionInput = element<HTMLInputElement>("session-id");
  const connect = element<HTMLButtonElement>("connect");

  const start = { x: 0, y: 0, z: 0, yawDeg: 0, pitchDeg: 0 };
  let app = new ViewerApp(new ApiClient(baseUrl.value), elements,
                          initialViewerState(start));

  connect.addEventListener("click", async () => {
    const api = new ApiClient(baseUrl.value);
    app = new ViewerApp(api, elements, initialViewerState(start));
    try {
      const meta = await api.metadata(sessionInput.value.trim());
      app.state = attachSession(app.state, meta.id, meta.gaussian_count, meta.step_count);
      app.setStatus(
        `connected: ${meta.gaussian_count} gaussians, step ${meta.step_count}`);
      app.renderSparkline();
      app.explore();
    } catch (err) {
      app.setStatus(`connect failed: ${err}`);
    }
  });

  window.addEventListener("keydown", (ev) => {
    if (document.activeElement === elements.prompt
        || document.activeElement === baseUrl
        || document.activeElement === sessionInput) return;
    app.handleKey(ev.key);
  });

  let dragging = false;
  let last = { x: 0, y: 0 };
  elements.frame.addEventListener("mousedown", (ev) => {
    dragging = true;
    last = { x: ev.clientX, y: ev.clientY };
  });
  window.addEventListener("mouseup", () => { dragging = false; });
  window.addEventListener("mousemove", (ev) => {
    if (!dragging) return;
    app.handleDrag(ev.clientX - last.x, ev.clientY - last.y);
    last = { x: ev.clientX, y: ev.clientY };
  });

  elements.prompt.addEventListener("input", () => app.setPrompt(elements.prompt.value));
  elements.commit.addEventListener("click", () => void app.commit());
}

boot();
