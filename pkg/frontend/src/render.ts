/**
 * Pure view rendering: API payloads in, HTML strings out. No fetching, no
 * state, and no score arithmetic — every number on screen is an API field
 * rendered verbatim (bar widths are styling only).
 */

import type {
  Alert,
  EcosystemSummary,
  HistoryResponse,
  ProjectDetail,
  ProjectPage,
  Watchlist,
} from "./types.js";

export function esc(text: unknown): string {
  return String(text)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Color bands mirror the default critical threshold: <0.3, 0.3-0.8, >=0.8. */
export function criticalityBand(criticality: number): "low" | "medium" | "high" {
  if (criticality < 0.3) return "low";
  if (criticality < 0.8) return "medium";
  return "high";
}

export function renderCriticalityBadge(criticality: number): string {
  const band = criticalityBand(criticality);
  return `<span class="badge badge-${band}" data-criticality="${esc(criticality)}">${esc(criticality)}</span>`;
}

function renderScoreBar(focus: string, value: number | undefined): string {
  if (value === undefined) {
    return `<div class="score score-absent" data-focus="${esc(focus)}">` +
      `<span class="score-label">${esc(focus)}</span><span class="score-value">&ndash;</span></div>`;
  }
  const width = Math.round(value * 100);
  return (
    `<div class="score" data-focus="${esc(focus)}">` +
    `<span class="score-label">${esc(focus)}</span>` +
    `<span class="score-track"><span class="score-fill" style="width:${width}%"></span></span>` +
    `<span class="score-value">${esc(value)}</span></div>`
  );
}

const SCORE_FOCUSES = ["security", "activity", "relevance"];

export function renderErrorBanner(message: string): string {
  return `<div class="error-banner" role="alert">API error: ${esc(message)}</div>`;
}

export function renderEmptyState(message: string): string {
  return `<div class="empty-state">${esc(message)}</div>`;
}

export function renderExplorer(page: ProjectPage): string {
  if (page.items.length === 0) {
    return renderEmptyState("No projects match the current filters.");
  }
  const rows = page.items
    .map((item) => {
      const ref = item.record.ref;
      const snap = item.snapshot;
      const scores = SCORE_FOCUSES.map((focus) =>
        renderScoreBar(focus, snap?.category_scores[focus]),
      ).join("");
      return (
        `<tr class="project-row" data-project="${esc(ref.canonical_id)}">` +
        `<td class="cell-name"><a href="?view=detail&amp;project=${encodeURIComponent(ref.canonical_id)}" ` +
        `data-project-link="${esc(ref.canonical_id)}">${esc(ref.name)}</a>` +
        `<span class="cell-meta">${esc(ref.canonical_id)}</span></td>` +
        `<td class="cell-language">${esc(item.record.primary_language ?? "-")}</td>` +
        `<td class="cell-criticality">${snap ? renderCriticalityBadge(snap.criticality) : "&ndash;"}</td>` +
        `<td class="cell-scores">${scores}</td>` +
        `<td class="cell-critical">${snap?.is_critical ? '<span class="flag-critical">critical</span>' : ""}</td>` +
        `</tr>`
      );
    })
    .join("\n");
  return (
    `<table class="project-table"><thead><tr>` +
    `<th>Project</th><th>Language</th><th>Criticality</th><th>Scores</th><th></th>` +
    `</tr></thead><tbody>\n${rows}\n</tbody></table>` +
    `<div class="page-info">Showing ${page.items.length} of ${page.total} projects</div>`
  );
}

function ageDays(publishedAt: string, now: Date): number {
  const published = new Date(publishedAt).getTime();
  return Math.floor((now.getTime() - published) / 86_400_000);
}

function renderHistory(history: HistoryResponse | null): string {
  if (!history) return "";
  if (history.observations.length === 0) {
    return renderEmptyState(`No history for ${history.metric}.`);
  }
  const values = history.observations.map((obs) =>
    obs.value.number ?? obs.value.ordinal ?? 0,
  );
  const max = Math.max(...values, 1);
  const bars = history.observations
    .map((obs, i) => {
      const value = obs.value.number ?? obs.value.ordinal ?? obs.value.text ?? "";
      const height = Math.max(2, Math.round((values[i] / max) * 100));
      return (
        `<div class="history-bar" style="height:${height}%" ` +
        `title="${esc(obs.observed_at)}: ${esc(value)}" data-observed="${esc(obs.observed_at)}" ` +
        `data-value="${esc(value)}"></div>`
      );
    })
    .join("");
  return `<div class="history-chart" data-metric="${esc(history.metric)}">${bars}</div>`;
}

export function renderAttestationForm(project: string, metricIds: string[]): string {
  const options = metricIds.map((id) => `<option value="${esc(id)}">${esc(id)}</option>`).join("");
  return (
    `<form class="attestation-form" data-project="${esc(project)}">` +
    `<h3>Submit attestation</h3>` +
    `<select name="metric_id">${options}</select>` +
    `<input name="assessor" placeholder="assessor" required>` +
    `<input name="value" type="number" min="0" max="4" step="1" value="0" required>` +
    `<input name="evidence_uri" placeholder="evidence URI (optional)">` +
    `<input name="token" type="password" placeholder="write token" required>` +
    `<button type="submit">Submit</button>` +
    `</form>`
  );
}

export function renderDetail(
  detail: ProjectDetail,
  history: HistoryResponse | null,
  metricIds: string[],
  qualitativeMetricIds: string[],
  now: Date,
): string {
  const record = detail.record;
  const snap = detail.snapshot;
  const deps = detail.dependency_report;
  const header =
    `<header class="detail-header"><h2>${esc(record.ref.canonical_id)}</h2>` +
    `<p>${esc(record.description ?? "")}</p>` +
    `<dl class="detail-meta">` +
    `<dt>Language</dt><dd>${esc(record.primary_language ?? "-")}</dd>` +
    `<dt>License</dt><dd>${esc(record.license ?? "-")}</dd>` +
    `<dt>Created</dt><dd>${esc(record.created_at)}</dd>` +
    `</dl></header>`;

  const snapshotPanel = snap
    ? `<section class="panel panel-snapshot"><h3>Latest snapshot</h3>` +
      `<div class="snapshot-criticality">criticality ${renderCriticalityBadge(snap.criticality)}` +
      `${snap.is_critical ? ' <span class="flag-critical">critical</span>' : ""}</div>` +
      SCORE_FOCUSES.map((f) => renderScoreBar(f, snap.category_scores[f])).join("") +
      `<p class="snapshot-meta">computed at ${esc(snap.computed_at)}</p></section>`
    : renderEmptyState("No snapshot yet; run a scoring pass.");

  const depsPanel =
    `<section class="panel panel-deps"><h3>Dependencies</h3><ul>` +
    `<li>direct: <span data-dep="direct_deps">${esc(deps.direct_deps)}</span></li>` +
    `<li>transitive: <span data-dep="transitive_deps">${esc(deps.transitive_deps)}</span></li>` +
    `<li>dependents (transitive): <span data-dep="transitive_dependents">${esc(deps.transitive_dependents)}</span></li>` +
    `<li>vulnerable: <span data-dep="vulnerable_deps">${esc(deps.vulnerable_deps)}</span></li>` +
    `</ul></section>`;

  const vulnRows = detail.open_vulnerabilities
    .map(
      (v) =>
        `<tr><td>${esc(v.vuln_id)}</td><td class="sev sev-${esc(v.severity)}">${esc(v.severity)}</td>` +
        `<td>${esc(v.severity_score)}</td><td>${ageDays(v.published_at, now)}d</td></tr>`,
    )
    .join("");
  const vulnPanel = detail.open_vulnerabilities.length
    ? `<section class="panel panel-vulns"><h3>Open vulnerabilities</h3>` +
      `<table><thead><tr><th>ID</th><th>Severity</th><th>Score</th><th>Age</th></tr></thead>` +
      `<tbody>${vulnRows}</tbody></table></section>`
    : `<section class="panel panel-vulns"><h3>Open vulnerabilities</h3>` +
      renderEmptyState("No open vulnerabilities.") + `</section>`;

  const metricOptions = metricIds
    .map(
      (id) =>
        `<option value="${esc(id)}"${history && history.metric === id ? " selected" : ""}>${esc(id)}</option>`,
    )
    .join("");
  const historyPanel =
    `<section class="panel panel-history"><h3>Metric history</h3>` +
    `<select class="metric-select" data-project="${esc(record.ref.canonical_id)}">${metricOptions}</select>` +
    renderHistory(history) +
    `</section>`;

  // The attestation gate mirrors the API: critical projects only.
  const attestationPanel = snap?.is_critical
    ? renderAttestationForm(record.ref.canonical_id, qualitativeMetricIds)
    : "";

  return header + snapshotPanel + depsPanel + vulnPanel + historyPanel + attestationPanel;
}

export function renderEcosystem(summary: EcosystemSummary): string {
  if (summary.project_count === 0) {
    return renderEmptyState("No projects in the store yet.");
  }
  const maxCount = Math.max(...summary.criticality_histogram, 1);
  const bars = summary.criticality_histogram
    .map((count, bin) => {
      const lo = (bin / 10).toFixed(1);
      const hi = ((bin + 1) / 10).toFixed(1);
      const height = Math.max(2, Math.round((count / maxCount) * 100));
      return (
        `<div class="hist-bar${count > 0 ? " hist-nonempty" : ""}" style="height:${height}%" ` +
        `title="[${lo}, ${hi}): ${count} projects" data-bin="${bin}" data-count="${count}"></div>`
      );
    })
    .join("");
  const means = Object.entries(summary.category_means)
    .map(
      ([focus, mean]) =>
        `<li>${esc(focus)}: <span data-mean="${esc(focus)}">${mean === null ? "&ndash;" : esc(mean)}</span></li>`,
    )
    .join("");
  return (
    `<section class="panel panel-ecosystem">` +
    `<h2>Ecosystem overview</h2>` +
    `<p><span data-count="projects">${summary.project_count}</span> projects, ` +
    `<span data-count="critical">${summary.critical_count}</span> critical</p>` +
    `<div class="histogram">${bars}</div>` +
    `<ul class="category-means">${means}</ul></section>`
  );
}

export function renderWatchlists(lists: Watchlist[], alerts: Alert[]): string {
  const cards = lists.length
    ? lists
        .map(
          (w) =>
            `<div class="watchlist-card" data-watchlist="${esc(w.id)}">` +
            `<strong>${esc(w.subscriber)}</strong> <code>${esc(w.id)}</code>` +
            `<div>projects: ${w.projects.map(esc).join(", ")}</div>` +
            `<div>rules: ${w.rules.map(esc).join(", ")}</div>` +
            `<button class="delete-watchlist" data-id="${esc(w.id)}">Delete</button></div>`,
        )
        .join("")
    : renderEmptyState("No watchlists yet.");
  const feed = alerts.length
    ? alerts
        .map(
          (a) =>
            `<li class="alert alert-${esc(a.delivery_state)}" data-alert="${esc(a.id)}">` +
            `<span class="alert-rule">${esc(a.rule)}</span> ${esc(a.project)} ` +
            `<time>${esc(a.triggered_at)}</time></li>`,
        )
        .join("")
    : renderEmptyState("No alerts yet.");
  return (
    `<section class="panel panel-watchlists"><h2>Watchlists</h2>${cards}` +
    `<form class="watchlist-form"><h3>New watchlist</h3>` +
    `<input name="subscriber" placeholder="subscriber" required>` +
    `<input name="projects" placeholder="project ids, comma separated" required>` +
    `<input name="rules" placeholder="rules, comma separated" ` +
    `value="NEW_HIGH_VULN,BECAME_CRITICAL,ACTIVITY_DROP">` +
    `<input name="token" type="password" placeholder="write token" required>` +
    `<button type="submit">Create</button></form></section>` +
    `<section class="panel panel-alerts"><h2>Alert feed</h2><ul class="alert-feed">${feed}</ul></section>`
  );
}
