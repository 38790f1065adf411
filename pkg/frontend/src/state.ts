/**
 * ViewState <-> URL query string. Deep links reproduce the view: every field
 * serializes into the query string and parsing it back yields an equal state.
 */

export type ViewName = "explorer" | "detail" | "watchlists" | "ecosystem";
export type SortOrder = "criticality_desc" | "name_asc";

export interface ViewState {
  view: ViewName;
  language?: string;
  license?: string;
  minCriticality?: number;
  criticalOnly: boolean;
  text?: string;
  sort: SortOrder;
  offset: number;
  limit: number;
  project?: string;
  metric?: string;
}

export const DEFAULT_STATE: ViewState = {
  view: "explorer",
  criticalOnly: false,
  sort: "criticality_desc",
  offset: 0,
  limit: 50,
};

const VIEWS: ViewName[] = ["explorer", "detail", "watchlists", "ecosystem"];
const SORTS: SortOrder[] = ["criticality_desc", "name_asc"];

/** Serialize omitting defaults, with a fixed parameter order for stable URLs. */
export function serializeViewState(state: ViewState): string {
  const params = new URLSearchParams();
  if (state.view !== DEFAULT_STATE.view) params.set("view", state.view);
  if (state.project) params.set("project", state.project);
  if (state.metric) params.set("metric", state.metric);
  if (state.language) params.set("language", state.language);
  if (state.license) params.set("license", state.license);
  if (state.minCriticality !== undefined) params.set("min_criticality", String(state.minCriticality));
  if (state.criticalOnly) params.set("critical_only", "true");
  if (state.text) params.set("q", state.text);
  if (state.sort !== DEFAULT_STATE.sort) params.set("sort", state.sort);
  if (state.offset !== DEFAULT_STATE.offset) params.set("offset", String(state.offset));
  if (state.limit !== DEFAULT_STATE.limit) params.set("limit", String(state.limit));
  return params.toString();
}

export function parseViewState(query: string): ViewState {
  const params = new URLSearchParams(query.startsWith("?") ? query.slice(1) : query);
  const state: ViewState = { ...DEFAULT_STATE };
  const view = params.get("view");
  if (view && (VIEWS as string[]).includes(view)) state.view = view as ViewName;
  const project = params.get("project");
  if (project) state.project = project;
  const metric = params.get("metric");
  if (metric) state.metric = metric;
  const language = params.get("language");
  if (language) state.language = language;
  const license = params.get("license");
  if (license) state.license = license;
  const min = params.get("min_criticality");
  if (min !== null && min !== "" && !Number.isNaN(Number(min))) state.minCriticality = Number(min);
  state.criticalOnly = params.get("critical_only") === "true";
  const text = params.get("q");
  if (text) state.text = text;
  const sort = params.get("sort");
  if (sort && (SORTS as string[]).includes(sort)) state.sort = sort as SortOrder;
  const offset = params.get("offset");
  if (offset !== null && /^\d+$/.test(offset)) state.offset = Number(offset);
  const limit = params.get("limit");
  if (limit !== null && /^\d+$/.test(limit)) state.limit = Number(limit);
  return state;
}
