/**
 * Wire protocol: newline-delimited JSON, one message per line.
 *
 *   -> {"cmd":"spec"}
 *   <- {"obs_dim":N,"action":"discrete"|"continuous","act_dim":M,
 *       "low":[...],"high":[...],"max_steps":T,"name":S}
 *   -> {"cmd":"reset","seed":K}    <- {"obs":[...]}
 *   -> {"cmd":"step","action":A}   <- {"obs":[...],"reward":R,"done":B}
 *   -> {"cmd":"close"}             <- {"ok":true}
 *
 * Any malformed request line is fatal for the session; errors are reported
 * as a single {"error": "..."} line before the session ends.
 */

export type ActionKind = "discrete" | "continuous";

export interface SpecReply {
  obs_dim: number;
  action: ActionKind;
  act_dim: number;
  low: number[];
  high: number[];
  max_steps: number;
  name: string;
}

export interface ResetReply {
  obs: number[];
}

export interface StepReply {
  obs: number[];
  reward: number;
  done: boolean;
}

export interface ErrorReply {
  error: string;
}

export type Reply = SpecReply | ResetReply | StepReply | ErrorReply | { ok: true };

/** Serialise one reply as a single protocol line (no interior newlines). */
export function encodeLine(reply: Reply): string {
  return JSON.stringify(reply) + "\n";
}

export interface Request {
  cmd: string;
  seed?: number;
  action?: number | number[];
}

export class ProtocolViolation extends Error {}

/** Parse and structurally validate one request line. */
export function decodeRequest(line: string): Request {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    throw new ProtocolViolation(`malformed request line: ${line.slice(0, 120)}`);
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new ProtocolViolation("request must be a JSON object");
  }
  const cmd = (parsed as Record<string, unknown>).cmd;
  if (typeof cmd !== "string") {
    throw new ProtocolViolation("request is missing a string 'cmd' field");
  }
  return parsed as unknown as Request;
}
