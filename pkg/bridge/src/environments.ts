/**
 * Environment backends the bridge can serve.
 *
 * Real simulator integrations register an EnvBackend factory under their
 * environment id.  The package ships deterministic stub backends (prefix
 * `stub:`) that reproduce the observation/action shapes of the benchmark
 * tasks without any simulator: enough to exercise the full protocol and to
 * smoke-test a client end to end.
 */

import { ActionKind, SpecReply } from "./protocol.js";

export interface EnvBackend {
  spec(): SpecReply;
  reset(seed: number): number[];
  step(action: number | number[]): { obs: number[]; reward: number; done: boolean };
}

export interface TaskDescriptor {
  name: string;
  obsDim: number;
  actDim: number;
  kind: ActionKind;
  maxSteps: number;
  low: number;
  high: number;
}

/** Benchmark task shapes (observation/action dimensions per task). */
export const TASK_SHAPES: TaskDescriptor[] = [
  { name: "CartPole-v1", obsDim: 4, actDim: 2, kind: "discrete", maxSteps: 500, low: -1, high: 1 },
  { name: "HalfCheetah-v2", obsDim: 17, actDim: 6, kind: "continuous", maxSteps: 1000, low: -1, high: 1 },
  { name: "Swimmer-v2", obsDim: 8, actDim: 2, kind: "continuous", maxSteps: 1000, low: -1, high: 1 },
  { name: "HumanoidStandup-v2", obsDim: 376, actDim: 17, kind: "continuous", maxSteps: 1000, low: -0.4, high: 0.4 },
];

/** Deterministic seeded fraction in [0, 1): 32-bit mix of the seed. */
function seedFraction(seed: number): number {
  let x = (seed >>> 0) + 0x6d2b79f5;
  x = Math.imul(x ^ (x >>> 15), x | 1);
  x ^= x + Math.imul(x ^ (x >>> 7), x | 61);
  return ((x ^ (x >>> 14)) >>> 0) / 4294967296;
}

/**
 * Stub dynamics: observation echoes the last applied action component,
 * carries a seed-derived constant (so seed pass-through is observable) and
 * a normalised step counter.  Reward is +1 per step, episodes end at
 * max_steps.  Deliberately trivial; replaces no simulator physics.
 */
export class StubEnv implements EnvBackend {
  private t = 0;
  private seedValue = 0;
  private done = true;

  constructor(private readonly task: TaskDescriptor) {}

  spec(): SpecReply {
    return {
      obs_dim: this.task.obsDim,
      action: this.task.kind,
      act_dim: this.task.actDim,
      low: new Array(this.task.actDim).fill(this.task.low),
      high: new Array(this.task.actDim).fill(this.task.high),
      max_steps: this.task.maxSteps,
      name: `stub:${this.task.name}`,
    };
  }

  reset(seed: number): number[] {
    this.t = 0;
    this.seedValue = seedFraction(seed);
    this.done = false;
    return this.observe(0);
  }

  step(action: number | number[]): { obs: number[]; reward: number; done: boolean } {
    if (this.done) {
      throw new Error("step after episode end; reset first");
    }
    const echo = this.applyAction(action);
    this.t += 1;
    this.done = this.t >= this.task.maxSteps;
    return { obs: this.observe(echo), reward: 1.0, done: this.done };
  }

  private applyAction(action: number | number[]): number {
    if (this.task.kind === "discrete") {
      if (typeof action !== "number" || !Number.isInteger(action)) {
        throw new Error(`discrete action must be an integer, got ${JSON.stringify(action)}`);
      }
      if (action < 0 || action >= this.task.actDim) {
        throw new Error(`discrete action ${action} out of range [0, ${this.task.actDim})`);
      }
      return action;
    }
    if (!Array.isArray(action) || action.length !== this.task.actDim) {
      throw new Error(
        `continuous action must be a list of length ${this.task.actDim}, got ${JSON.stringify(action)}`,
      );
    }
    // defense in depth: clamp into the advertised bounds before applying
    const clipped = action.map((a) =>
      Math.min(this.task.high, Math.max(this.task.low, a)),
    );
    return clipped[0];
  }

  private observe(echo: number): number[] {
    const obs = new Array<number>(this.task.obsDim).fill(0);
    obs[0] = echo;
    if (this.task.obsDim > 1) obs[1] = this.seedValue;
    if (this.task.obsDim > 2) obs[2] = this.t / this.task.maxSteps;
    return obs;
  }
}

export type BackendFactory = () => EnvBackend;

const registry = new Map<string, BackendFactory>();

for (const task of TASK_SHAPES) {
  registry.set(`stub:${task.name}`, () => new StubEnv(task));
}

/** Hook for native simulator adapters. */
export function registerBackend(id: string, factory: BackendFactory): void {
  registry.set(id, factory);
}

export function resolveEnvironment(id: string): EnvBackend {
  const factory = registry.get(id);
  if (factory !== undefined) {
    return factory();
  }
  const stubId = `stub:${id}`;
  const hint = registry.has(stubId)
    ? `; no simulator adapter is registered, use '${stubId}' for protocol testing`
    : "";
  throw new Error(`unknown environment id '${id}'${hint}`);
}

export function knownEnvironments(): string[] {
  return [...registry.keys()].sort();
}
