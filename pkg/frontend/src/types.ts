// Wire types for the review service. These mirror the JSON the service
// emits; optional fields are ones the service may omit or null out.

export interface StudyRecord {
  id: string;
  title: string;
  abstract: string | null;
  year: number | null;
  venue: string | null;
  authors: string[];
  interventions: string[];
  outcomes: string[];
  population: string[];
  source_tag: string;
  raw: Record<string, unknown>;
}

export interface PicosAssessment {
  sentence_labels: string[];
  elements: Record<string, boolean>;
  compliant: boolean;
  confidence: number;
  evidence: Record<string, number[]>;
  rubric_mode: string;
  theta: number;
}

export interface DesignLabel {
  path: string[];
  verdicts: Record<string, string>;
  setting: string | null;
  rationale: string;
  provider: string;
}

export interface DesignHistoryRow {
  provider: string;
  leaf: string;
  ts: string;
}

export interface Decision {
  action: "accepted" | "overridden";
  override: OverridePayload | null;
  reviewer: string;
  ts: string;
}

export interface OverridePayload {
  design?: string;
  setting?: string;
  elements?: Record<string, boolean>;
  note?: string;
}

export interface ScreeningView {
  record_id: string;
  assessment: PicosAssessment;
  design: DesignLabel;
  design_history: DesignHistoryRow[];
  decision: Decision | null;
  topic: number | null;
}

export interface RecordsPage {
  total: number;
  records: StudyRecord[];
}

export interface TopicRow {
  id: number;
  label: string;
  size: number;
  terms: [string, number][];
}

export interface TopicsView {
  fitted: boolean;
  pending_refit?: boolean;
  topics: TopicRow[];
}

export interface AlertRow {
  topic_id: number;
  label: string;
  member_count: number;
  recent_count: number;
  mean_similarity: number;
  rule: string;
}

// Rows follow `topics`, columns follow `years`. `shares` has the same
// shape; non-empty columns sum to 1.
export interface TrendsPayload {
  topics: number[];
  years: number[];
  counts: number[][];
  undated: Record<string, number>;
  shares: number[][];
  labels: Record<string, string>;
  alerts: AlertRow[];
}

export interface Citation {
  record_id: string;
  chunk_id: string;
  span: string;
}

export interface QueryResponse {
  answer: string;
  citations: Citation[];
  insufficient: boolean;
  route: string;
  attempts: number;
}

export interface AuditEntry {
  seq: number;
  ts: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface AuditView {
  entries: AuditEntry[];
}

export interface IngestReport {
  ingested: number;
  duplicates: number;
  rejects: { location: string; reason: string; source: string }[];
}

export interface ChangeReport extends IngestReport {
  newly_compliant: string[];
  topic_deltas: Record<string, number>;
  new_alerts: AlertRow[];
  refit_triggered: boolean;
  outlier_fraction: number;
  timestamp: string;
}

export interface FitSummary {
  records: number;
  topics: number;
  outliers: number;
  seed: number;
}

export interface MetricsView {
  records: number;
  chunks: number;
  index_size: number;
  topics: number;
  fitted: boolean;
  outlier_fraction: number | null;
  pending_refit: boolean;
  compliant: number;
  non_compliant: number;
  decisions: Record<string, number>;
  audit_entries: number;
}

export interface DecisionResult {
  record_id: string;
  decision: Decision;
}
