/** Typed client for the detection service's JSON endpoints.
 *
 * Field names and shapes mirror the server's wire contract exactly; the
 * dashboard renders these values as fetched and never derives metrics of
 * its own. Mutations go through /config, /model, and /blocklist only.
 */

export interface TimelinePoint {
  t: number;
  count: number;
  blocked: number;
}

export interface DdosStatus {
  ddos: boolean;
  accuracy: number;
  calculation_time_s: number;
  window: Record<string, number>;
  timeline: TimelinePoint[];
}

export interface EffectiveConfig {
  threshold: number;
  window_seconds: number;
  listen: string;
  blocklist_path: string;
  model_path: string | null;
}

export interface ConfigPatch {
  threshold?: number;
  window_seconds?: number;
}

/** GET /model returns {loaded: false} until a model file is loaded. */
export interface ModelMetadata {
  loaded: boolean;
  kind?: string;
  seed?: number;
  model_id?: string;
  fit_seconds?: number;
  converged?: boolean;
  stored_accuracy?: number | null;
  stored_eval_seconds?: number | null;
  input_features?: string[];
  pca_components?: number | null;
  path?: string;
}

export interface BlocklistEntry {
  source: string;
  added_at: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `network failure: ${String(err)}`);
    }
    if (resp.status === 204) return undefined as T;
    let payload: unknown;
    try {
      payload = await resp.json();
    } catch {
      throw new ApiError(resp.status, `non-JSON response (status ${resp.status})`);
    }
    if (!resp.ok) {
      const msg =
        payload && typeof payload === "object" && "error" in payload
          ? String((payload as { error: unknown }).error)
          : `status ${resp.status}`;
      throw new ApiError(resp.status, msg);
    }
    return payload as T;
  }

  getResult(): Promise<DdosStatus> {
    return this.request("GET", "/ddos/result");
  }

  getConfig(): Promise<EffectiveConfig> {
    return this.request("GET", "/config");
  }

  putConfig(patch: ConfigPatch): Promise<EffectiveConfig> {
    return this.request("PUT", "/config", patch);
  }

  getModel(): Promise<ModelMetadata> {
    return this.request("GET", "/model");
  }

  putModel(path: string): Promise<ModelMetadata> {
    return this.request("PUT", "/model", { path });
  }

  async getBlocklist(): Promise<BlocklistEntry[]> {
    const payload = await this.request<{ sources: BlocklistEntry[] }>("GET", "/blocklist");
    return payload.sources;
  }

  addBlocklistSource(source: string): Promise<BlocklistEntry> {
    return this.request("PUT", `/blocklist/${encodeURIComponent(source)}`);
  }

  removeBlocklistSource(source: string): Promise<{ source: string; removed: boolean }> {
    return this.request("DELETE", `/blocklist/${encodeURIComponent(source)}`);
  }
}
