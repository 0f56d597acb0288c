/**
 * One protocol session over one environment: transport-agnostic message
 * handling, so the same logic serves stdio pipes, TCP sockets and tests.
 */

import { EnvBackend } from "./environments.js";
import { Reply, decodeRequest, encodeLine, ProtocolViolation } from "./protocol.js";

export interface SessionResult {
  /** Exactly one protocol line, newline-terminated. */
  line: string;
  /** True when the session must end (close request or fatal error). */
  ended: boolean;
  /** Process exit code once ended. */
  exitCode: number;
}

export class BridgeSession {
  private episodeDone = true;
  private everReset = false;

  constructor(private readonly env: EnvBackend) {}

  /** Handle one raw request line and produce the reply line. */
  handleLine(rawLine: string): SessionResult {
    let reply: Reply;
    try {
      const request = decodeRequest(rawLine);
      switch (request.cmd) {
        case "spec":
          reply = this.env.spec();
          break;
        case "reset": {
          const seed = typeof request.seed === "number" ? request.seed : 0;
          reply = { obs: this.env.reset(seed) };
          this.episodeDone = false;
          this.everReset = true;
          break;
        }
        case "step": {
          if (!this.everReset) {
            throw new ProtocolViolation("step before the first reset");
          }
          if (this.episodeDone) {
            throw new ProtocolViolation("step after episode end without reset");
          }
          if (request.action === undefined) {
            throw new ProtocolViolation("step request is missing 'action'");
          }
          const result = this.env.step(request.action);
          this.episodeDone = result.done;
          reply = result;
          break;
        }
        case "close":
          return { line: encodeLine({ ok: true }), ended: true, exitCode: 0 };
        default:
          throw new ProtocolViolation(`unknown command '${request.cmd}'`);
      }
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      return { line: encodeLine({ error: message }), ended: true, exitCode: 1 };
    }
    return { line: encodeLine(reply), ended: false, exitCode: 0 };
  }
}
