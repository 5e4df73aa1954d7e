// Top-down board rendering from the latest state message.
//
// Drawn against a minimal structural slice of CanvasRenderingContext2D so
// tests can substitute a recording context.

import { StateMessage } from "./protocol.js";
import { ViewModel } from "./viewmodel.js";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  rotate(angle: number): void;
}

export interface BoardGeometry {
  xMin: number; xMax: number; yMin: number; yMax: number;
  slots: { id: number; x: number; y: number }[];
  regionA: { xMin: number; xMax: number; yMin: number; yMax: number };
}

// Mirrors the server's default workspace; purely cosmetic on this side.
export const DEFAULT_BOARD: BoardGeometry = {
  xMin: 0, xMax: 160, yMin: 0, yMax: 120,
  slots: [
    { id: 1, x: 40, y: 90 },
    { id: 2, x: 80, y: 90 },
    { id: 3, x: 120, y: 90 },
  ],
  regionA: { xMin: 60, xMax: 100, yMin: 10, yMax: 30 },
};

const PHASE_COLORS: Record<string, string> = {
  auto_coarse: "#2d7ff9",
  manual_precision: "#f9a825",
  resetting: "#9e9e9e",
  trial_complete: "#43a047",
  disconnected: "#b71c1c",
};

export const PHASE_LABELS: Record<string, string> = {
  auto_coarse: "AUTONOMOUS COARSE",
  manual_precision: "MANUAL PRECISION",
  resetting: "RESETTING",
  trial_complete: "TRIAL COMPLETE",
  disconnected: "DISCONNECTED",
};

export class SceneRenderer {
  constructor(
    private readonly board: BoardGeometry = DEFAULT_BOARD,
    private readonly widthPx = 640,
    private readonly heightPx = 480,
    private readonly bannerPx = 36,
  ) {}

  private sx(x: number): number {
    const b = this.board;
    return ((x - b.xMin) / (b.xMax - b.xMin)) * this.widthPx;
  }

  private sy(y: number): number {
    const b = this.board;
    return this.bannerPx +
      ((b.yMax - y) / (b.yMax - b.yMin)) * (this.heightPx - this.bannerPx);
  }

  private mm(len: number): number {
    return (len / (this.board.xMax - this.board.xMin)) * this.widthPx;
  }

  draw(ctx: Ctx2D, vm: ViewModel): void {
    const phase = vm.phase;
    // banner
    ctx.fillStyle = PHASE_COLORS[phase] ?? "#616161";
    ctx.fillRect(0, 0, this.widthPx, this.bannerPx);
    ctx.fillStyle = "#ffffff";
    ctx.font = "16px monospace";
    const label = PHASE_LABELS[phase] ?? phase;
    ctx.fillText(`${label}   leg ${vm.legProgress}`, 10, 24);

    // board background
    ctx.fillStyle = "#10202b";
    ctx.fillRect(0, this.bannerPx, this.widthPx, this.heightPx - this.bannerPx);

    // region A
    const a = this.board.regionA;
    ctx.strokeStyle = "#4caf50";
    ctx.lineWidth = 1;
    ctx.strokeRect(this.sx(a.xMin), this.sy(a.yMax),
                   this.mm(a.xMax - a.xMin), this.mm(a.yMax - a.yMin));
    ctx.fillStyle = "#4caf50";
    ctx.fillText("A", this.sx(a.xMin) + 4, this.sy(a.yMax) + 14);

    // slots
    for (const slot of this.board.slots) {
      ctx.strokeStyle = "#90a4ae";
      ctx.beginPath();
      ctx.arc(this.sx(slot.x), this.sy(slot.y), this.mm(5), 0, Math.PI * 2);
      ctx.stroke();
      ctx.fillStyle = "#90a4ae";
      ctx.fillText(String(slot.id), this.sx(slot.x) - 4, this.sy(slot.y) - 10);
    }

    const state = vm.state;
    if (!state) return;

    for (let i = 0; i < state.pegs.length; i++) {
      this.drawPeg(ctx, state, i);
    }
    this.drawGripper(ctx, state);

    if (vm.handoverCue > 0) {
      // visual pulse at the gripper: take over now
      ctx.strokeStyle = "#ffee58";
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.arc(this.sx(state.gripper.x), this.sy(state.gripper.y),
              this.mm(12 + (vm.handoverCue % 5)), 0, Math.PI * 2);
      ctx.stroke();
      ctx.fillStyle = "#ffee58";
      ctx.fillText("MANUAL CONTROL", this.sx(state.gripper.x) + 14,
                   this.sy(state.gripper.y) - 14);
    }
  }

  private drawPeg(ctx: Ctx2D, state: StateMessage, index: number): void {
    const peg = state.pegs[index];
    const held = state.held && index === state.target;
    // a held peg rides the gripper; the server already moves it, so this is
    // just the colour cue
    ctx.save();
    ctx.translate(this.sx(peg.x), this.sy(peg.y));
    ctx.rotate(-peg.orientation);
    const half = this.mm(peg.side / 2);
    ctx.fillStyle = index === state.target ? (held ? "#ffb74d" : "#ff7043")
                                           : "#8d6e63";
    ctx.fillRect(-half, -half, 2 * half, 2 * half);
    ctx.restore();
  }

  private drawGripper(ctx: Ctx2D, state: StateMessage): void {
    const g = state.gripper;
    ctx.save();
    ctx.translate(this.sx(g.x), this.sy(g.y));
    ctx.rotate(-g.roll);
    const len = this.mm(6);
    const gap = this.mm(state.jaws_closed ? 8 : 11);
    ctx.strokeStyle = "#e0e0e0";
    ctx.lineWidth = 3;
    for (const side of [-1, 1]) {
      ctx.beginPath();
      ctx.moveTo(-len / 2, (side * gap) / 2);
      ctx.lineTo(len / 2, (side * gap) / 2);
      ctx.stroke();
    }
    ctx.restore();
  }
}
