// Renderer behaviour against a recording 2D-context fake: the banner tracks
// the freshly applied state, the board furniture is drawn, and nothing is
// rendered from anywhere but the view model.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseServerLine } from "../src/protocol.js";
import { PHASE_LABELS, SceneRenderer } from "../src/render.js";
import { ViewModel } from "../src/viewmodel.js";

const here = dirname(fileURLToPath(import.meta.url));
const transcript = readFileSync(join(here, "fixtures", "transcript.jsonl"), "utf-8")
  .split("\n")
  .filter((line) => line.trim().length > 0);

class FakeCtx {
  fillStyle: string = "";
  strokeStyle: string = "";
  lineWidth = 1;
  font = "";
  calls: Array<[string, ...unknown[]]> = [];
  texts: string[] = [];
  fillRect(...args: number[]) { this.calls.push(["fillRect", ...args]); }
  strokeRect(...args: number[]) { this.calls.push(["strokeRect", ...args]); }
  beginPath() { this.calls.push(["beginPath"]); }
  arc(...args: number[]) { this.calls.push(["arc", ...args]); }
  moveTo(...args: number[]) { this.calls.push(["moveTo", ...args]); }
  lineTo(...args: number[]) { this.calls.push(["lineTo", ...args]); }
  stroke() { this.calls.push(["stroke"]); }
  fill() { this.calls.push(["fill"]); }
  fillText(text: string, x: number, y: number) {
    this.texts.push(text);
    this.calls.push(["fillText", text, x, y]);
  }
  save() { this.calls.push(["save"]); }
  restore() { this.calls.push(["restore"]); }
  translate(...args: number[]) { this.calls.push(["translate", ...args]); }
  rotate(...args: number[]) { this.calls.push(["rotate", ...args]); }
}

describe("scene renderer", () => {
  it("draws slot labels and the reset region", () => {
    const vm = new ViewModel();
    const ctx = new FakeCtx();
    new SceneRenderer().draw(ctx, vm);
    for (const label of ["1", "2", "3", "A"]) {
      expect(ctx.texts).toContain(label);
    }
  });

  it("banner reflects each state message as soon as it is applied", () => {
    const vm = new ViewModel();
    const renderer = new SceneRenderer();
    let statesChecked = 0;
    for (const line of transcript) {
      const msg = parseServerLine(line);
      vm.apply(msg);
      if (msg.type !== "state") continue;
      const ctx = new FakeCtx();
      renderer.draw(ctx, vm);
      const banner = ctx.texts.find((t) => t.includes("leg"));
      expect(banner).toBeDefined();
      expect(banner).toContain(PHASE_LABELS[msg.phase]);
      statesChecked += 1;
    }
    expect(statesChecked).toBeGreaterThan(5);
  });

  it("renders the gripper glyph at the state pose only", () => {
    const vm = new ViewModel();
    for (const line of transcript) {
      const msg = parseServerLine(line);
      vm.apply(msg);
      if (msg.type === "state") break;
    }
    const ctx = new FakeCtx();
    new SceneRenderer().draw(ctx, vm);
    const translates = ctx.calls.filter(([name]) => name === "translate");
    expect(translates.length).toBeGreaterThan(0);
  });

  it("shows the handover pulse while the cue is active", () => {
    const vm = new ViewModel();
    for (const line of transcript) {
      const msg = parseServerLine(line);
      vm.apply(msg);
      if (vm.handoverCue > 0 && vm.state) break;
    }
    expect(vm.handoverCue).toBeGreaterThan(0);
    const ctx = new FakeCtx();
    new SceneRenderer().draw(ctx, vm);
    expect(ctx.texts).toContain("MANUAL CONTROL");
  });

  it("renders a disconnected banner without any state", () => {
    const vm = new ViewModel();
    vm.connectionClosed();
    const ctx = new FakeCtx();
    new SceneRenderer().draw(ctx, vm);
    expect(ctx.texts.some((t) => t.includes("DISCONNECTED"))).toBe(true);
  });
});
