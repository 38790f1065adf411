/**
 * Orchestration between the API client and the renderers, kept DOM-free so
 * tests can drive it with a stubbed fetch. Every load returns the HTML for
 * the main panel; API failures become a visible error banner, never a blank
 * page. In-flight explorer requests are aborted when filters change.
 */

import { ApiClient, ApiError } from "./api.js";
import type { ViewState } from "./state.js";
import {
  renderDetail,
  renderEcosystem,
  renderErrorBanner,
  renderExplorer,
  renderWatchlists,
} from "./render.js";

export class DashboardController {
  private inflight: AbortController | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly now: () => Date = () => new Date(),
  ) {}

  /** Render the main panel for the given view state. */
  async load(state: ViewState): Promise<string> {
    try {
      switch (state.view) {
        case "explorer":
          return await this.loadExplorer(state);
        case "detail":
          return await this.loadDetail(state);
        case "ecosystem":
          return renderEcosystem(await this.client.ecosystemSummary());
        case "watchlists":
          return await this.loadWatchlists();
      }
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") {
        return ""; // superseded by a newer request; caller ignores empty output
      }
      const message = err instanceof ApiError ? `${err.status || ""} ${err.message}`.trim() : String(err);
      return renderErrorBanner(message);
    }
  }

  private async loadExplorer(state: ViewState): Promise<string> {
    this.inflight?.abort();
    this.inflight = typeof AbortController === "undefined" ? null : new AbortController();
    const page = await this.client.listProjects(state, this.inflight?.signal);
    return renderExplorer(page);
  }

  private async loadDetail(state: ViewState): Promise<string> {
    if (!state.project) {
      return renderErrorBanner("no project selected");
    }
    const detail = await this.client.projectDetail(state.project);
    const registry = await this.client.metricDefinitions();
    const metricIds = registry.metrics.filter((m) => m.kind === "quantitative").map((m) => m.id);
    const qualitative = registry.metrics.filter((m) => m.kind === "qualitative").map((m) => m.id);
    const metric = state.metric && metricIds.includes(state.metric) ? state.metric : "commits_90d";
    let history = null;
    try {
      history = await this.client.history(state.project, metric);
    } catch {
      history = null; // chart is optional; the detail page must still render
    }
    return renderDetail(detail, history, metricIds, qualitative, this.now());
  }

  private async loadWatchlists(): Promise<string> {
    const lists = await this.client.watchlists();
    const feed = await this.client.alerts();
    return renderWatchlists(lists.items, feed.items);
  }
}
