/** Shared test scaffolding: a scripted fetch and sentinel API payloads. */

import type { FetchLike } from "../src/api.js";
import type { EcosystemSummary, ProjectDetail, ProjectPage, RegistryDocument } from "../src/types.js";

export interface FetchCall {
  url: string;
  init?: RequestInit;
}

/** Routes requests by path prefix to canned JSON responses and logs calls. */
export function stubFetch(
  routes: Record<string, { status?: number; body: unknown } | ((url: string) => { status?: number; body: unknown })>,
): { fetchFn: FetchLike; calls: FetchCall[] } {
  const calls: FetchCall[] = [];
  const byLength = Object.entries(routes).sort((a, b) => b[0].length - a[0].length);
  const fetchFn: FetchLike = async (url, init) => {
    calls.push({ url, init });
    const path = url.split("?")[0];
    for (const [prefix, handler] of byLength) {
      if (path.startsWith(prefix)) {
        const result = typeof handler === "function" ? handler(url) : handler;
        return new Response(JSON.stringify(result.body), {
          status: result.status ?? 200,
          headers: { "Content-Type": "application/json" },
        });
      }
    }
    return new Response(JSON.stringify({ status: 404, code: "not_found", message: url }), {
      status: 404,
    });
  };
  return { fetchFn, calls };
}

export function sentinelPage(): ProjectPage {
  return {
    total: 2,
    offset: 0,
    limit: 50,
    sort: "criticality_desc",
    items: [
      {
        record: {
          ref: { platform: "github", owner: "demo", name: "alpha", canonical_id: "github:demo/alpha" },
          description: "sentinel description 111",
          primary_language: "Rust",
          license: "Apache-2.0",
          homepage: null,
          created_at: "2019-05-14T12:00:00Z",
          fetched_at: "2024-02-28T06:00:00Z",
          topics: [],
        },
        snapshot: {
          project: "github:demo/alpha",
          computed_at: "2024-03-01T00:00:00Z",
          category_scores: { security: 0.857146, activity: 0.673476, relevance: 0.637821 },
          criticality: 0.908387,
          is_critical: true,
          input_digest: "digest-alpha",
        },
      },
      {
        record: {
          ref: { platform: "gitlab", owner: "demo", name: "charlie", canonical_id: "gitlab:demo/charlie" },
          description: "sentinel description 222",
          primary_language: "Python",
          license: "BSD-3-Clause",
          homepage: null,
          created_at: "2020-03-18T10:00:00Z",
          fetched_at: "2024-02-28T06:10:00Z",
          topics: [],
        },
        snapshot: {
          project: "gitlab:demo/charlie",
          computed_at: "2024-03-01T00:00:00Z",
          category_scores: { security: 0.80729, activity: 0.479343 },
          criticality: 0.390498,
          is_critical: false,
          input_digest: "digest-charlie",
        },
      },
    ],
  };
}

export function sentinelDetail(critical: boolean): ProjectDetail {
  const page = sentinelPage();
  const row = page.items[critical ? 0 : 1];
  return {
    record: row.record,
    snapshot: row.snapshot,
    dependency_report: {
      project: row.record.ref.canonical_id,
      direct_deps: 2,
      transitive_deps: 2,
      direct_dependents: 2,
      transitive_dependents: 3,
      vulnerable_deps: 0,
    },
    open_vulnerabilities: [
      {
        vuln_id: "OSV-2024-0035",
        package: "alpha",
        affected_range: "introduced:1.0.0",
        severity: "medium",
        severity_score: 5.3,
        published_at: "2024-01-20T00:00:00Z",
        fixed_at: null,
        fixed_version: null,
      },
    ],
  };
}

export function sentinelRegistry(): RegistryDocument {
  const metric = (id: string, kind: string) => ({
    id,
    display_name: id,
    kind,
    focus: "activity",
    unit: "count",
    direction: "higher_is_better",
    normalization: { method: "saturating_log", cap: 1000 },
    default_weight: 1.0,
  });
  return {
    registry_version: 1,
    metrics: [
      metric("commits_90d", "quantitative"),
      metric("contributors", "quantitative"),
      metric("funding", "qualitative"),
    ],
  };
}

export function sentinelSummary(): EcosystemSummary {
  return {
    project_count: 2,
    critical_count: 1,
    criticality_histogram: [0, 0, 0, 1, 0, 0, 0, 0, 0, 1],
    category_means: { security: 0.832218, activity: 0.57641, relevance: 0.637821 },
  };
}
