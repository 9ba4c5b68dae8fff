/** Dashboard state container.
 *
 * One poll loop drives the status panel; control actions (threshold,
 * blocklist, model) are serialized per endpoint so responses apply in
 * request order. Timers and the API client are injectable for tests.
 *
 * Invariants kept here:
 *  - at most one /ddos/result request in flight;
 *  - rendered values come from the most recent successful response;
 *  - stale flag raised after STALE_AFTER consecutive poll failures;
 *  - rapid threshold changes coalesce to last-write;
 *  - a rejected mutation rolls state back to the last confirmed value.
 */

import {
  ApiError,
  type BlocklistEntry,
  type ConfigPatch,
  type DdosStatus,
  type EffectiveConfig,
  type ModelMetadata,
} from "./api.js";

export const STALE_AFTER = 3;
export const DEFAULT_POLL_MS = 1000;

export interface Api {
  getResult(): Promise<DdosStatus>;
  getConfig(): Promise<EffectiveConfig>;
  putConfig(patch: ConfigPatch): Promise<EffectiveConfig>;
  getModel(): Promise<ModelMetadata>;
  putModel(path: string): Promise<ModelMetadata>;
  getBlocklist(): Promise<BlocklistEntry[]>;
  addBlocklistSource(source: string): Promise<BlocklistEntry>;
  removeBlocklistSource(source: string): Promise<{ source: string; removed: boolean }>;
}

export interface DashboardState {
  status: DdosStatus | null;
  config: EffectiveConfig | null;
  blocklist: BlocklistEntry[];
  model: ModelMetadata | null;
  stale: boolean;
  missedPolls: number;
  lastError: string | null;
  pollIntervalMs: number;
}

export interface StoreOptions {
  api: Api;
  pollIntervalMs?: number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (id: unknown) => void;
  onChange?: (state: DashboardState) => void;
}

function errorMessage(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  return String(err);
}

export class Store {
  readonly state: DashboardState;

  private readonly api: Api;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly clearTimer: (id: unknown) => void;
  private readonly onChange: (state: DashboardState) => void;

  private timerId: unknown = null;
  private pollInFlight = false;

  // last server-confirmed threshold, the rollback target
  private confirmedThreshold: number | null = null;
  private pendingThreshold: number | null = null;
  private thresholdInFlight = false;

  // mutations on these endpoints run strictly one after another
  private blocklistQueue: Promise<void> = Promise.resolve();
  private modelQueue: Promise<void> = Promise.resolve();

  constructor(opts: StoreOptions) {
    this.api = opts.api;
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = opts.clearTimer ?? ((id) => clearTimeout(id as Parameters<typeof clearTimeout>[0]));
    this.onChange = opts.onChange ?? (() => {});
    this.state = {
      status: null,
      config: null,
      blocklist: [],
      model: null,
      stale: false,
      missedPolls: 0,
      lastError: null,
      pollIntervalMs: opts.pollIntervalMs ?? DEFAULT_POLL_MS,
    };
  }

  private notify(): void {
    this.onChange(this.state);
  }

  /** Initial load: config, model metadata, and blocklist in one sweep. */
  async refreshAll(): Promise<void> {
    const [config, model, blocklist] = await Promise.allSettled([
      this.api.getConfig(),
      this.api.getModel(),
      this.api.getBlocklist(),
    ]);
    if (config.status === "fulfilled") {
      this.state.config = config.value;
      this.confirmedThreshold = config.value.threshold;
    }
    if (model.status === "fulfilled") this.state.model = model.value;
    if (blocklist.status === "fulfilled") this.state.blocklist = blocklist.value;
    const failed = [config, model, blocklist].find((r) => r.status === "rejected");
    if (failed) this.state.lastError = errorMessage((failed as PromiseRejectedResult).reason);
    this.notify();
  }

  /** One poll of /ddos/result; skipped if the previous one is still out. */
  async pollOnce(): Promise<void> {
    if (this.pollInFlight) return;
    this.pollInFlight = true;
    try {
      const status = await this.api.getResult();
      this.state.status = status;
      this.state.missedPolls = 0;
      this.state.stale = false;
    } catch (err) {
      this.state.missedPolls += 1;
      if (this.state.missedPolls >= STALE_AFTER) this.state.stale = true;
      this.state.lastError = errorMessage(err);
    } finally {
      this.pollInFlight = false;
    }
    this.notify();
  }

  start(): void {
    if (this.timerId !== null) return;
    const tick = () => {
      this.timerId = this.setTimer(tick, this.state.pollIntervalMs);
      void this.pollOnce();
    };
    this.timerId = this.setTimer(tick, this.state.pollIntervalMs);
    void this.pollOnce();
  }

  stop(): void {
    if (this.timerId === null) return;
    this.clearTimer(this.timerId);
    this.timerId = null;
  }

  /** Optimistic threshold update; concurrent calls coalesce to the last value. */
  setThreshold(value: number): Promise<void> {
    if (!(value >= 0 && value <= 1)) {
      this.state.lastError = "threshold must lie in [0, 1]";
      this.notify();
      return Promise.resolve();
    }
    if (this.state.config) this.state.config.threshold = value;
    this.pendingThreshold = value;
    this.notify();
    if (this.thresholdInFlight) return Promise.resolve();
    this.thresholdInFlight = true;
    return this.drainThreshold();
  }

  private async drainThreshold(): Promise<void> {
    try {
      while (this.pendingThreshold !== null) {
        const want = this.pendingThreshold;
        this.pendingThreshold = null;
        try {
          const config = await this.api.putConfig({ threshold: want });
          this.confirmedThreshold = config.threshold;
          // a newer optimistic value may already be on screen
          if (this.pendingThreshold === null) this.state.config = config;
        } catch (err) {
          if (this.pendingThreshold === null && this.state.config && this.confirmedThreshold !== null) {
            this.state.config.threshold = this.confirmedThreshold;
          }
          this.state.lastError = errorMessage(err);
        }
        this.notify();
      }
    } finally {
      this.thresholdInFlight = false;
    }
  }

  /** Queue a blocklist mutation; the table re-reads GET /blocklist after. */
  private enqueueBlocklist(action: () => Promise<void>): Promise<void> {
    const run = this.blocklistQueue.then(action, action);
    this.blocklistQueue = run;
    return run;
  }

  addSource(source: string): Promise<void> {
    return this.enqueueBlocklist(async () => {
      try {
        await this.api.addBlocklistSource(source);
        this.state.blocklist = await this.api.getBlocklist();
      } catch (err) {
        this.state.lastError = errorMessage(err);
      }
      this.notify();
    });
  }

  removeSource(source: string): Promise<void> {
    return this.enqueueBlocklist(async () => {
      try {
        await this.api.removeBlocklistSource(source);
        this.state.blocklist = await this.api.getBlocklist();
      } catch (err) {
        this.state.lastError = errorMessage(err);
      }
      this.notify();
    });
  }

  /** Swap the served model; on failure the old metadata stays on screen. */
  switchModel(path: string): Promise<void> {
    const run = this.modelQueue.then(
      () => this.doSwitchModel(path),
      () => this.doSwitchModel(path),
    );
    this.modelQueue = run;
    return run;
  }

  private async doSwitchModel(path: string): Promise<void> {
    try {
      this.state.model = await this.api.putModel(path);
      // stored accuracy shown in the status panel belongs to the new model
      await this.pollOnce();
    } catch (err) {
      this.state.lastError = errorMessage(err);
    }
    this.notify();
  }

  clearError(): void {
    this.state.lastError = null;
    this.notify();
  }
}
