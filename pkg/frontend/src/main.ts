// Browser entry point: canvas + keyboard wiring around the session client.

import { SessionClient, configFromQuery } from "./client.js";
import { SceneRenderer } from "./render.js";
import { DEFAULT_SETTINGS } from "./viewmodel.js";

function start(): void {
  const config = configFromQuery(window.location.search, DEFAULT_SETTINGS);
  const canvas = document.getElementById("board") as HTMLCanvasElement;
  const status = document.getElementById("status") as HTMLElement;
  const ctx = canvas.getContext("2d")!;
  const renderer = new SceneRenderer();
  const client = new SessionClient(config);
  client.connect();

  window.addEventListener("keydown", (ev) => {
    if (ev.repeat) {
      ev.preventDefault();
      return;
    }
    const handled = ["ArrowLeft", "ArrowRight", "ArrowUp", "ArrowDown",
                     "PageUp", "PageDown", "q", "e", " ", "r"];
    if (handled.includes(ev.key)) {
      ev.preventDefault();
      client.handleKey(ev.key);
    }
  });

  // drag on the canvas = pose delta (pixels scaled to board millimetres)
  const mmPerPx = 160 / canvas.width;
  let dragging = false;
  canvas.addEventListener("mousedown", () => { dragging = true; });
  window.addEventListener("mouseup", () => { dragging = false; });
  canvas.addEventListener("mousemove", (ev) => {
    if (!dragging || client.vm.status !== "connected") return;
    client.mapper.drag(ev.movementX * mmPerPx, ev.movementY * mmPerPx);
  });

  const frame = () => {
    client.pump();
    renderer.draw(ctx, client.vm);
    status.textContent =
      `${client.vm.status}  ${client.vm.statusLine}  ` +
      (client.vm.lastError ? `error: ${client.vm.lastError}` : "");
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

window.addEventListener("DOMContentLoaded", start);
