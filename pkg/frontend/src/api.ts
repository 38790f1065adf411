/**
 * Typed client for the /v1 API. All calls are asynchronous; list requests
 * accept an AbortSignal so stale in-flight requests can be cancelled when
 * filters change.
 */

import type {
  AlertFeed,
  AttestationDraft,
  EcosystemSummary,
  HistoryResponse,
  ProjectDetail,
  ProjectPage,
  RegistryDocument,
  Watchlist,
  WatchlistDraft,
} from "./types.js";
import type { ViewState } from "./state.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Map a ViewState onto the /v1/projects query parameters. */
export function projectsQuery(state: ViewState): string {
  const params = new URLSearchParams();
  if (state.language) params.set("language", state.language);
  if (state.license) params.set("license", state.license);
  if (state.minCriticality !== undefined) params.set("min_criticality", String(state.minCriticality));
  if (state.criticalOnly) params.set("critical_only", "true");
  if (state.text) params.set("q", state.text);
  params.set("sort", state.sort);
  params.set("offset", String(state.offset));
  params.set("limit", String(state.limit));
  return params.toString();
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    options: { body?: unknown; token?: string; signal?: AbortSignal } = {},
  ): Promise<T> {
    const headers: Record<string, string> = { Accept: "application/json" };
    if (options.body !== undefined) headers["Content-Type"] = "application/json";
    if (options.token) headers["Authorization"] = `Bearer ${options.token}`;
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method,
        headers,
        body: options.body !== undefined ? JSON.stringify(options.body) : undefined,
        signal: options.signal,
      });
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") throw err;
      throw new ApiError(0, "network_error", String(err));
    }
    if (response.status === 204) return undefined as T;
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      payload = null;
    }
    if (!response.ok) {
      const body = (payload ?? {}) as { code?: string; message?: string };
      throw new ApiError(response.status, body.code ?? "http_error", body.message ?? response.statusText);
    }
    return payload as T;
  }

  listProjects(state: ViewState, signal?: AbortSignal): Promise<ProjectPage> {
    return this.request("GET", `/v1/projects?${projectsQuery(state)}`, { signal });
  }

  projectDetail(id: string): Promise<ProjectDetail> {
    return this.request("GET", `/v1/projects/${id}`);
  }

  history(id: string, metric: string): Promise<HistoryResponse> {
    const params = new URLSearchParams({ metric });
    return this.request("GET", `/v1/projects/${id}/history?${params.toString()}`);
  }

  metricDefinitions(): Promise<RegistryDocument> {
    return this.request("GET", "/v1/metrics/definitions");
  }

  ecosystemSummary(): Promise<EcosystemSummary> {
    return this.request("GET", "/v1/ecosystem/summary");
  }

  watchlists(): Promise<{ items: Watchlist[] }> {
    return this.request("GET", "/v1/watchlists");
  }

  createWatchlist(draft: WatchlistDraft, token: string): Promise<Watchlist> {
    return this.request("POST", "/v1/watchlists", { body: draft, token });
  }

  deleteWatchlist(id: string, token: string): Promise<void> {
    return this.request("DELETE", `/v1/watchlists/${id}`, { token });
  }

  alerts(limit = 50): Promise<AlertFeed> {
    return this.request("GET", `/v1/alerts?limit=${limit}`);
  }

  submitAttestation(project: string, draft: AttestationDraft, token: string): Promise<unknown> {
    return this.request("POST", `/v1/projects/${project}/attestations`, { body: draft, token });
  }
}
