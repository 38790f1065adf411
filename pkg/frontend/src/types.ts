/**
 * Payload shapes of the /v1 API. The dashboard renders these verbatim and
 * never derives health numbers of its own.
 */

export interface ProjectRef {
  platform: string;
  owner: string;
  name: string;
  canonical_id: string;
}

export interface ProjectRecord {
  ref: ProjectRef;
  description: string | null;
  primary_language: string | null;
  license: string | null;
  homepage: string | null;
  created_at: string;
  fetched_at: string;
  topics: string[];
}

export interface HealthSnapshot {
  project: string;
  computed_at: string;
  category_scores: Record<string, number>;
  criticality: number;
  is_critical: boolean;
  input_digest: string;
}

export interface ProjectRow {
  record: ProjectRecord;
  snapshot: HealthSnapshot | null;
}

export interface ProjectPage {
  total: number;
  offset: number;
  limit: number;
  sort: string;
  items: ProjectRow[];
}

export interface DependencyReport {
  project: string;
  direct_deps: number;
  transitive_deps: number;
  direct_dependents: number;
  transitive_dependents: number;
  vulnerable_deps: number;
}

export interface VulnerabilityRecord {
  vuln_id: string;
  package: string;
  affected_range: string;
  severity: string;
  severity_score: number;
  published_at: string;
  fixed_at: string | null;
  fixed_version: string | null;
}

export interface ProjectDetail {
  record: ProjectRecord;
  snapshot: HealthSnapshot | null;
  dependency_report: DependencyReport;
  open_vulnerabilities: VulnerabilityRecord[];
}

export interface ObservationValue {
  number?: number;
  ordinal?: number;
  text?: string;
}

export interface MetricObservation {
  metric_id: string;
  project: string;
  value: ObservationValue;
  observed_at: string;
  source: string;
}

export interface HistoryResponse {
  project: string;
  metric: string;
  from: string;
  to: string;
  observations: MetricObservation[];
}

export interface MetricDefinition {
  id: string;
  display_name: string;
  kind: string;
  focus: string;
  unit: string;
  direction: string;
  normalization: { method: string; cap: number };
  default_weight: number;
}

export interface RegistryDocument {
  registry_version: number;
  metrics: MetricDefinition[];
}

export interface EcosystemSummary {
  project_count: number;
  critical_count: number;
  criticality_histogram: number[];
  category_means: Record<string, number | null>;
}

export interface Watchlist {
  id: string;
  subscriber: string;
  projects: string[];
  rules: string[];
  delivery: { webhook?: string; log_sink?: boolean };
}

export interface WatchlistDraft {
  subscriber: string;
  projects: string[];
  rules: string[];
  delivery: { webhook?: string; log_sink?: boolean };
}

export interface Alert {
  id: string;
  subscription_id: string;
  project: string;
  rule: string;
  triggered_at: string;
  payload: Record<string, unknown>;
  delivery_state: string;
}

export interface AlertFeed {
  items: Alert[];
}

export interface AttestationDraft {
  metric_id: string;
  assessor: string;
  value: number;
  evidence_uri?: string;
  asserted_at?: string;
}
