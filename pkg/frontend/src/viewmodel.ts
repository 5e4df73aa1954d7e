// Client-side session state. Renders strictly from received messages: the
// view model never extrapolates or mutates simulation state locally.

import { EventMessage, ServerMessage, StateMessage } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "closed" | "error";

export interface Settings {
  mmPerKey: number;     // translation per key press
  radPerKey: number;    // roll per key press
  tickRateHz: number;   // server tick rate; also the input rate cap
}

export const DEFAULT_SETTINGS: Settings = {
  mmPerKey: 1.0,
  radPerKey: 0.02,
  tickRateHz: 30,
};

// How long the handover cue stays visible, in received state messages.
const CUE_STATES = 20;

export class ViewModel {
  state: StateMessage | null = null;
  status: ConnectionStatus = "connecting";
  statusLine = "";
  lastError = "";
  clutchClosed = false; // local toggle intent; jaw truth comes from state
  handoverCue = 0;      // countdown in state messages
  recentEvents: EventMessage[] = [];

  get phase(): string {
    return this.state ? this.state.phase : "disconnected";
  }

  get legProgress(): string {
    if (!this.state) return "-";
    const done = this.state.completed_legs ?? this.state.leg;
    return `${done} of ${this.state.legs_total}`;
  }

  apply(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        this.status = "connected";
        this.statusLine = `protocol v${msg.version}`;
        break;
      case "state":
        this.state = msg;
        if (this.handoverCue > 0) this.handoverCue -= 1;
        // keep the local clutch intent honest against server truth
        this.clutchClosed = msg.jaws_closed;
        break;
      case "event":
        this.recentEvents.push(msg);
        if (this.recentEvents.length > 50) this.recentEvents.shift();
        if (msg.name === "handover") this.handoverCue = CUE_STATES;
        break;
      case "error":
        this.lastError = msg.message;
        this.status = "error";
        break;
    }
  }

  connectionClosed(): void {
    this.status = "closed";
  }
}
