// Session client: socket lifecycle, command gating, and the view model the
// DOM layer renders from. Framework-free so it runs headless under tests
// with an injected WebSocket implementation.

import {
  CommandFrame,
  EpisodeEndFrame,
  Mode,
  NoticeFrame,
  SnapshotFrame,
  ServerFrame,
  makeCommand,
  parseServerFrame,
} from "./protocol.js";

export interface HistoryRow {
  index: number;
  direction: -1 | 1;
  radius: "big" | "small";
  acknowledged: "accepted" | "overwritten";
  atSimTime: number;
}

export interface SeriesPoint {
  t: number;
  value: number;
}

export interface UiSessionView {
  connection: "connecting" | "open" | "closed" | "retrying";
  snapshot: SnapshotFrame | null;
  history: HistoryRow[];
  errorNorm: SeriesPoint[];
  errorAxes: [SeriesPoint[], SeriesPoint[], SeriesPoint[]];
  droppedFrames: number;
  stickyRadius: "big" | "small";
  summary: Record<string, unknown> | null;
  notices: string[];
}

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => WebSocketLike;

export interface SessionClientOptions {
  url: string;
  socketFactory: SocketFactory;
  retryDelayMs?: number;
  maxSeriesPoints?: number;
  onChange?: (view: UiSessionView) => void;
}

export class SessionClient {
  readonly view: UiSessionView;
  private opts: Required<Omit<SessionClientOptions, "onChange">> & {
    onChange?: (view: UiSessionView) => void;
  };
  private socket: WebSocketLike | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(options: SessionClientOptions) {
    this.opts = {
      retryDelayMs: 1000,
      maxSeriesPoints: 2000,
      ...options,
    };
    this.view = {
      connection: "connecting",
      snapshot: null,
      history: [],
      errorNorm: [],
      errorAxes: [[], [], []],
      droppedFrames: 0,
      stickyRadius: "big",
      summary: null,
      notices: [],
    };
  }

  connect(): void {
    this.stopped = false;
    this.view.connection = "connecting";
    this.emit();
    const sock = this.opts.socketFactory(this.opts.url);
    this.socket = sock;
    sock.onopen = () => {
      this.view.connection = "open";
      this.emit();
    };
    sock.onmessage = (ev) => this.handleMessage(String(ev.data));
    sock.onerror = () => undefined;
    sock.onclose = () => {
      this.socket = null;
      if (this.stopped) {
        this.view.connection = "closed";
        this.emit();
        return;
      }
      this.view.connection = "retrying";
      this.emit();
      this.retryTimer = setTimeout(() => this.connect(), this.opts.retryDelayMs);
    };
  }

  close(): void {
    this.stopped = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.socket?.close();
    this.view.connection = "closed";
    this.emit();
  }

  /** Commands are only sendable while the robot awaits one. */
  canSend(): boolean {
    return (
      this.view.connection === "open" &&
      this.view.snapshot !== null &&
      this.view.snapshot.mode === "awaiting_command"
    );
  }

  setRadius(radius: "big" | "small"): void {
    this.view.stickyRadius = radius;
    this.emit();
  }

  sendCommand(direction: -1 | 1, radiusOverride?: "big" | "small"): boolean {
    if (!this.canSend() || this.socket === null) return false;
    const radius = radiusOverride ?? this.view.stickyRadius;
    const cmd = makeCommand(direction, radius);
    this.socket.send(JSON.stringify(cmd));
    return true;
  }

  /** Keyboard map: arrows for direction, 1/2 for the sticky radius. */
  handleKey(key: string): boolean {
    if (key === "1") {
      this.setRadius("big");
      return true;
    }
    if (key === "2") {
      this.setRadius("small");
      return true;
    }
    if (key === "ArrowUp") return this.sendCommand(1);
    if (key === "ArrowDown") return this.sendCommand(-1);
    return false;
  }

  private handleMessage(raw: string): void {
    const frame = parseServerFrame(raw);
    if (frame === null) {
      this.view.droppedFrames += 1;
      this.emit();
      return;
    }
    switch (frame.type) {
      case "snapshot":
        this.applySnapshot(frame);
        break;
      case "notice":
        this.applyNotice(frame);
        break;
      case "error":
        this.view.notices.push(`service error: ${frame.text}`);
        break;
      case "episode_end":
        this.view.summary = (frame as EpisodeEndFrame).summary;
        break;
    }
    this.emit();
  }

  private applySnapshot(snap: SnapshotFrame): void {
    this.view.snapshot = snap;
    const norm = Math.hypot(snap.e[0], snap.e[1], snap.e[2]);
    this.pushPoint(this.view.errorNorm, { t: snap.sim_time, value: norm });
    for (let axis = 0; axis < 3; axis++) {
      this.pushPoint(this.view.errorAxes[axis], {
        t: snap.sim_time,
        value: snap.e[axis],
      });
    }
  }

  private applyNotice(notice: NoticeFrame): void {
    if (
      (notice.kind === "command_accepted" ||
        notice.kind === "command_overwritten") &&
      notice.command
    ) {
      if (notice.kind === "command_overwritten" && this.view.history.length) {
        // the previous pending command never executed
        this.view.history[this.view.history.length - 1].acknowledged =
          "overwritten";
      }
      this.view.history.push({
        index: this.view.history.length + 1,
        direction: notice.command.direction,
        radius: notice.command.radius_choice,
        acknowledged: "accepted",
        atSimTime: this.view.snapshot?.sim_time ?? 0,
      });
    } else {
      this.view.notices.push(notice.text || notice.kind);
    }
  }

  private pushPoint(series: SeriesPoint[], p: SeriesPoint): void {
    series.push(p);
    if (series.length > this.opts.maxSeriesPoints) {
      series.splice(0, series.length - this.opts.maxSeriesPoints);
    }
  }

  private emit(): void {
    this.opts.onChange?.(this.view);
  }
}
