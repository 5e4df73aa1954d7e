// Conformance against a recorded server transcript: every line must parse
// against the schema, and the view model must reflect each state message
// the moment it is applied (no extrapolation, no lag).

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseServerLine, StateSchema } from "../src/protocol.js";
import { ViewModel } from "../src/viewmodel.js";

const here = dirname(fileURLToPath(import.meta.url));
const transcript = readFileSync(join(here, "fixtures", "transcript.jsonl"), "utf-8")
  .split("\n")
  .filter((line) => line.trim().length > 0);

describe("recorded server transcript", () => {
  it("parses every line against the protocol schema", () => {
    expect(transcript.length).toBeGreaterThan(10);
    for (const line of transcript) {
      expect(() => parseServerLine(line)).not.toThrow();
    }
  });

  it("contains at least one phase change and a handover event", () => {
    const phases = new Set<string>();
    let handovers = 0;
    for (const line of transcript) {
      const msg = parseServerLine(line);
      if (msg.type === "state") phases.add(msg.phase);
      if (msg.type === "event" && msg.name === "handover") handovers += 1;
    }
    expect(phases.size).toBeGreaterThan(1);
    expect(handovers).toBeGreaterThan(0);
  });

  it("renders phase changes within one message", () => {
    const vm = new ViewModel();
    for (const line of transcript) {
      const msg = parseServerLine(line);
      vm.apply(msg);
      if (msg.type === "state") {
        // the banner source must equal the freshly applied state's phase
        expect(vm.phase).toBe(msg.phase);
        expect(vm.state).toBe(msg);
      }
    }
  });

  it("shows the handover cue after the handover event", () => {
    const vm = new ViewModel();
    let sawCue = false;
    for (const line of transcript) {
      vm.apply(parseServerLine(line));
      if (vm.handoverCue > 0) sawCue = true;
    }
    expect(sawCue).toBe(true);
  });

  it("echoes applied input sequence numbers in later states", () => {
    let maxSeq = 0;
    for (const line of transcript) {
      const msg = parseServerLine(line);
      if (msg.type === "state") maxSeq = Math.max(maxSeq, msg.seq);
    }
    expect(maxSeq).toBeGreaterThan(0);
  });

  it("keeps held pegs visually attached to the gripper", () => {
    // server authority: when held, the peg position in the state message is
    // the gripper position; the renderer draws from those same fields
    let heldStates = 0;
    for (const line of transcript) {
      const msg = parseServerLine(line);
      if (msg.type === "state" && msg.held) {
        heldStates += 1;
        const peg = msg.pegs[msg.target];
        expect(peg.x).toBeCloseTo(msg.gripper.x, 9);
        expect(peg.y).toBeCloseTo(msg.gripper.y, 9);
      }
    }
    expect(heldStates).toBeGreaterThan(0);
  });

  it("validates state messages with the dedicated schema too", () => {
    for (const line of transcript) {
      const raw = JSON.parse(line);
      if (raw.type === "state") {
        expect(() => StateSchema.parse(raw)).not.toThrow();
      }
    }
  });
});
