// Frame types and validation for the session-service wire protocol.
// Only frames that pass validation reach the UI; anything else is counted
// and dropped.

export const PROTOCOL_VERSION = 1;

export type Vec3 = [number, number, number];

export type Mode = "awaiting_command" | "executing" | "finished";

export interface SnapshotFrame {
  v: number;
  type: "snapshot";
  session_id: string;
  seq: number;
  sim_time: number;
  x: Vec3;
  x_g: Vec3;
  e: Vec3;
  subgoal: Vec3;
  epsilon: number;
  n_osc: number;
  mode: Mode;
}

export interface CommandFrame {
  v: number;
  type: "command";
  direction: -1 | 1;
  radius_choice: "big" | "small";
  client_ts?: number | null;
}

export interface NoticeFrame {
  v: number;
  type: "notice";
  kind: "command_accepted" | "command_overwritten" | "info";
  text: string;
  command?: CommandFrame | null;
}

export interface ErrorFrame {
  v: number;
  type: "error";
  text: string;
}

export interface EpisodeEndFrame {
  v: number;
  type: "episode_end";
  session_id: string;
  summary: Record<string, unknown>;
}

export type ServerFrame = SnapshotFrame | NoticeFrame | ErrorFrame | EpisodeEndFrame;

const MODES: Mode[] = ["awaiting_command", "executing", "finished"];

function isVec3(value: unknown): value is Vec3 {
  return (
    Array.isArray(value) &&
    value.length === 3 &&
    value.every((c) => typeof c === "number" && Number.isFinite(c))
  );
}

function isFiniteNumber(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

/** Parse raw socket text into a validated server frame, or null. */
export function parseServerFrame(raw: string): ServerFrame | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const frame = obj as Record<string, unknown>;
  if (frame.v !== PROTOCOL_VERSION) return null;
  switch (frame.type) {
    case "snapshot":
      if (
        typeof frame.session_id === "string" &&
        isFiniteNumber(frame.seq) &&
        isFiniteNumber(frame.sim_time) &&
        isVec3(frame.x) &&
        isVec3(frame.x_g) &&
        isVec3(frame.e) &&
        isVec3(frame.subgoal) &&
        isFiniteNumber(frame.epsilon) &&
        isFiniteNumber(frame.n_osc) &&
        MODES.includes(frame.mode as Mode)
      ) {
        return frame as unknown as SnapshotFrame;
      }
      return null;
    case "notice":
      if (
        ["command_accepted", "command_overwritten", "info"].includes(
          frame.kind as string,
        ) &&
        typeof frame.text === "string"
      ) {
        return frame as unknown as NoticeFrame;
      }
      return null;
    case "error":
      return typeof frame.text === "string"
        ? (frame as unknown as ErrorFrame)
        : null;
    case "episode_end":
      if (
        typeof frame.session_id === "string" &&
        typeof frame.summary === "object" &&
        frame.summary !== null
      ) {
        return frame as unknown as EpisodeEndFrame;
      }
      return null;
    default:
      return null;
  }
}

export function makeCommand(
  direction: -1 | 1,
  radius: "big" | "small",
  now: number = Date.now() / 1000,
): CommandFrame {
  return {
    v: PROTOCOL_VERSION,
    type: "command",
    direction,
    radius_choice: radius,
    client_ts: now,
  };
}
