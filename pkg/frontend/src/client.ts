// WebSocket session client: connects, handshakes, feeds the view model.

import { helloLine, parseServerLine } from "./protocol.js";
import { InputMapper } from "./input.js";
import { Settings, ViewModel } from "./viewmodel.js";

export interface SessionConfig {
  host: string;
  port: number;
  settings: Settings;
}

export function configFromQuery(query: string, defaults: Settings): SessionConfig {
  const params = new URLSearchParams(query);
  return {
    host: params.get("host") ?? "127.0.0.1",
    port: Number(params.get("port") ?? "7777"),
    settings: {
      mmPerKey: Number(params.get("mm") ?? defaults.mmPerKey),
      radPerKey: Number(params.get("rad") ?? defaults.radPerKey),
      tickRateHz: Number(params.get("tick") ?? defaults.tickRateHz),
    },
  };
}

export class SessionClient {
  readonly vm = new ViewModel();
  readonly mapper: InputMapper;
  private socket: WebSocket | null = null;

  constructor(private readonly config: SessionConfig) {
    this.mapper = new InputMapper(
      config.settings,
      (line) => this.socket?.send(line),
      () => performance.now(),
      () => this.vm.clutchClosed,
    );
  }

  connect(): void {
    const url = `ws://${this.config.host}:${this.config.port}`;
    const socket = new WebSocket(url);
    this.socket = socket;
    socket.onopen = () => socket.send(helloLine());
    socket.onmessage = (ev) => {
      try {
        this.vm.apply(parseServerLine(String(ev.data)));
      } catch (err) {
        this.vm.lastError = String(err);
      }
    };
    socket.onclose = () => this.vm.connectionClosed();
    socket.onerror = () => {
      this.vm.status = "error";
    };
  }

  handleKey(key: string): void {
    if (this.vm.status !== "connected") return;
    this.mapper.keydown(key);
  }

  pump(): void {
    this.mapper.poll();
  }
}
