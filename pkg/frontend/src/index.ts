/**
 * TypeScript binding for the quadsim simulation core.
 *
 * Each handle owns a Python subprocess speaking a JSON-lines protocol; the
 * core's single-owner rule is enforced here by allowing one in-flight call
 * per handle. Observation values cross the boundary as 17-significant-digit
 * strings (the same formatter the core's CSV logs use) and are exposed both
 * raw and parsed.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import type { Readable, Writable } from "node:stream";
import { createInterface, type Interface } from "node:readline";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

/** Must match the core package's version; checked at make(). */
export const VERSION = "0.1.0";

const BRIDGE_PATH = join(
  dirname(fileURLToPath(import.meta.url)),
  "..",
  "bridge",
  "quadsim_bridge.py",
);

export interface Spaces {
  nDrones: number;
  actionMode: string;
  obsShape: [number, number];
  actionShape: [number, number];
  actionLow: (number | null)[];
  actionHigh: (number | null)[];
  task: string;
}

export interface StepResult {
  /** Parsed observation rows, ascending drone index, 20 values each. */
  obs: number[][];
  /** The exact serialized observation strings (17 significant digits). */
  obsRaw: string[][];
  /** Unnormalized true state rows, same layout as obs. */
  states: number[][];
  statesRaw: string[][];
  commandedRpms: number[][];
  commandedRpmsRaw: string[][];
  rewards: Map<number, number>;
  rewardsRaw: Map<number, string>;
  done: boolean;
  actionClipped: boolean;
  simTime: number;
}

export interface MakeOptions {
  /** Scenario file path or built-in scenario name. */
  scenario?: string;
  /** Inline scenario text (key = value lines), overrides `scenario`. */
  configText?: string;
  /** Python interpreter to launch the bridge with. */
  pythonPath?: string;
}

interface BridgeResponse {
  id: number;
  ok: boolean;
  result?: Record<string, unknown>;
  error?: string;
}

function parseRows(rows: string[][]): number[][] {
  return rows.map((r) => r.map(Number));
}

export class EnvHandle {
  private proc: ChildProcessByStdio<Writable, Readable, null>;
  private lines: Interface;
  private nextId = 0;
  private pending: Map<
    number,
    { resolve: (r: Record<string, unknown>) => void; reject: (e: Error) => void }
  > = new Map();
  private inFlight = false;
  private closed = false;
  private cachedSpaces: Spaces | null = null;
  /** Core package version reported by the bridge. */
  coreVersion = "";

  private constructor(pythonPath: string) {
    this.proc = spawn(pythonPath, [BRIDGE_PATH], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    this.lines = createInterface({ input: this.proc.stdout });
    this.lines.on("line", (line) => {
      const resp = JSON.parse(line) as BridgeResponse;
      const waiter = this.pending.get(resp.id);
      if (!waiter) return;
      this.pending.delete(resp.id);
      if (resp.ok) waiter.resolve(resp.result ?? {});
      else waiter.reject(new Error(resp.error ?? "bridge error"));
    });
    this.proc.on("exit", () => {
      for (const [, waiter] of this.pending) {
        waiter.reject(new Error("bridge process exited"));
      }
      this.pending.clear();
    });
  }

  static async make(opts: MakeOptions): Promise<EnvHandle> {
    const handle = new EnvHandle(opts.pythonPath ?? "python3");
    const req: Record<string, unknown> = { op: "make" };
    if (opts.configText !== undefined) req.config_text = opts.configText;
    else if (opts.scenario !== undefined) req.scenario = opts.scenario;
    else throw new Error("make needs scenario or configText");
    let result: Record<string, unknown>;
    try {
      result = await handle.call(req);
    } catch (err) {
      handle.kill();
      throw err;
    }
    handle.coreVersion = result.version as string;
    if (handle.coreVersion !== VERSION) {
      handle.kill();
      throw new Error(
        `version mismatch: binding ${VERSION}, core ${handle.coreVersion}`,
      );
    }
    handle.cachedSpaces = toSpaces(result.spaces as Record<string, unknown>);
    return handle;
  }

  spaces(): Spaces {
    this.assertOpen();
    if (!this.cachedSpaces) throw new Error("spaces not available");
    return this.cachedSpaces;
  }

  async reset(): Promise<{ obs: number[][]; obsRaw: string[][] }> {
    this.assertOpen();
    const result = await this.call({ op: "reset" });
    const obsRaw = result.obs as string[][];
    return { obs: parseRows(obsRaw), obsRaw };
  }

  async step(actions: number[][]): Promise<StepResult> {
    this.assertOpen();
    const { actionShape } = this.spaces();
    if (actions.length !== actionShape[0]) {
      throw new Error(
        `action array has ${actions.length} rows, expected ${actionShape[0]}`,
      );
    }
    for (const row of actions) {
      if (row.length !== actionShape[1]) {
        throw new Error(
          `action row has width ${row.length}, expected ${actionShape[1]}`,
        );
      }
      for (const v of row) {
        if (!Number.isFinite(v)) throw new Error("non-finite action value");
      }
    }
    const result = await this.call({ op: "step", actions });
    const obsRaw = result.obs as string[][];
    const statesRaw = result.states as string[][];
    const cmdRaw = result.commanded_rpms as string[][];
    const rewardsRaw = new Map<number, string>();
    const rewards = new Map<number, number>();
    for (const [k, v] of Object.entries(
      result.rewards as Record<string, string>,
    )) {
      rewardsRaw.set(Number(k), v);
      rewards.set(Number(k), Number(v));
    }
    return {
      obs: parseRows(obsRaw),
      obsRaw,
      states: parseRows(statesRaw),
      statesRaw,
      commandedRpms: parseRows(cmdRaw),
      commandedRpmsRaw: cmdRaw,
      rewards,
      rewardsRaw,
      done: result.done as boolean,
      actionClipped: result.action_clipped as boolean,
      simTime: Number(result.sim_time as string),
    };
  }

  async close(): Promise<void> {
    if (this.closed) return;
    this.closed = true;
    try {
      await this.call({ op: "close" }, true);
    } finally {
      this.kill();
    }
  }

  private assertOpen(): void {
    if (this.closed) throw new Error("handle is closed");
  }

  private call(
    req: Record<string, unknown>,
    allowClosed = false,
  ): Promise<Record<string, unknown>> {
    if (this.closed && !allowClosed) {
      return Promise.reject(new Error("handle is closed"));
    }
    if (this.inFlight) {
      return Promise.reject(
        new Error("handle is single-owner: a call is already in flight"),
      );
    }
    this.inFlight = true;
    const id = this.nextId++;
    return new Promise<Record<string, unknown>>((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.proc.stdin.write(JSON.stringify({ id, ...req }) + "\n");
    }).finally(() => {
      this.inFlight = false;
    });
  }

  private kill(): void {
    this.closed = true;
    this.lines.close();
    this.proc.kill();
  }
}

function toSpaces(raw: Record<string, unknown>): Spaces {
  return {
    nDrones: raw.n_drones as number,
    actionMode: raw.action_mode as string,
    obsShape: raw.obs_shape as [number, number],
    actionShape: raw.action_shape as [number, number],
    actionLow: raw.action_low as (number | null)[],
    actionHigh: raw.action_high as (number | null)[],
    task: raw.task as string,
  };
}

/** Construct an environment handle; see MakeOptions. */
export function make(opts: MakeOptions): Promise<EnvHandle> {
  return EnvHandle.make(opts);
}
