// Keyboard-to-input mapping with a hard rate cap.
//
// Key map (documented in the README):
//   ArrowLeft/Right  -x / +x        ArrowUp/Down  +y / -y
//   PageUp/PageDown  +z / -z        q / e         roll +/-
//   Space            clutch toggle   r            resume
//
// Emission never exceeds the server tick rate: presses inside one tick
// interval coalesce into a single message whose deltas accumulate.

import { encodeInput, InputMessage } from "./protocol.js";
import { Settings } from "./viewmodel.js";

interface PendingInput {
  dx: number;
  dy: number;
  dz: number;
  droll: number;
  clutch?: boolean;
  resume?: boolean;
}

export type SendFn = (line: string) => void;
export type NowFn = () => number;

export class InputMapper {
  private seq = 0;
  private pending: PendingInput | null = null;
  private lastSent = -Infinity;
  sent: InputMessage[] = [];

  constructor(
    private readonly settings: Settings,
    private readonly send: SendFn,
    private readonly now: NowFn = () => performance.now(),
    private clutchState: () => boolean = () => false,
  ) {}

  attachClutchSource(fn: () => boolean): void {
    this.clutchState = fn;
  }

  get tickMs(): number {
    return 1000 / this.settings.tickRateHz;
  }

  keydown(key: string): void {
    const mm = this.settings.mmPerKey;
    const rad = this.settings.radPerKey;
    const p: PendingInput = this.pending ?? { dx: 0, dy: 0, dz: 0, droll: 0 };
    switch (key) {
      case "ArrowLeft": p.dx -= mm; break;
      case "ArrowRight": p.dx += mm; break;
      case "ArrowUp": p.dy += mm; break;
      case "ArrowDown": p.dy -= mm; break;
      case "PageUp": p.dz += mm; break;
      case "PageDown": p.dz -= mm; break;
      case "q": p.droll += rad; break;
      case "e": p.droll -= rad; break;
      case " ": p.clutch = !this.clutchState(); break;
      case "r": p.resume = true; break;
      default: return;
    }
    this.pending = p;
    this.flush();
  }

  // Mouse drag: screen-space deltas in workspace millimetres (the caller
  // converts pixels using its board scale; screen y grows downward).
  drag(dxMm: number, dyMm: number): void {
    if (dxMm === 0 && dyMm === 0) return;
    const p: PendingInput = this.pending ?? { dx: 0, dy: 0, dz: 0, droll: 0 };
    p.dx += dxMm;
    p.dy -= dyMm;
    this.pending = p;
    this.flush();
  }

  // Emits the pending message if a full tick interval has passed; otherwise
  // the deltas keep accumulating until `poll` is called by a timer.
  flush(): void {
    if (!this.pending) return;
    const t = this.now();
    if (t - this.lastSent < this.tickMs) return;
    const p = this.pending;
    this.pending = null;
    this.lastSent = t;
    this.seq += 1;
    const msg: InputMessage = {
      type: "input",
      seq: this.seq,
      dx: p.dx,
      dy: p.dy,
      dz: p.dz,
      droll: p.droll,
      t_ms: t,
    };
    if (p.clutch !== undefined) msg.clutch = p.clutch;
    if (p.resume) msg.resume = true;
    this.sent.push(msg);
    this.send(encodeInput(msg));
  }

  poll(): void {
    this.flush();
  }
}
