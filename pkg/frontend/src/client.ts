import type {
  AuditView,
  ChangeReport,
  DecisionResult,
  FitSummary,
  IngestReport,
  MetricsView,
  OverridePayload,
  QueryResponse,
  RecordsPage,
  ScreeningView,
  StudyRecord,
  TopicsView,
  TrendsPayload,
} from "./types";

/** Error raised for any non-2xx reply. `kind` is the server's error type
 *  (e.g. "DecisionConflict"), when the body carries one. */
export class ApiError extends Error {
  status: number;
  kind: string;

  constructor(status: number, kind: string, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.kind = kind;
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string }
) => Promise<{ status: number; text(): Promise<string> }>;

/**
 * Thin client for the review service HTTP API. All state lives on the
 * server; this only shuttles JSON.
 */
export class ReviewClient {
  readonly baseUrl: string;
  private fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? (fetch as unknown as FetchLike);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: { method: string; headers?: Record<string, string>; body?: string } = {
      method,
    };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    const text = await resp.text();
    let parsed: unknown = null;
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = null;
      }
    }
    if (resp.status < 200 || resp.status >= 300) {
      const err = (parsed as { error?: { type?: string; message?: string } })?.error;
      throw new ApiError(
        resp.status,
        err?.type ?? "UnknownError",
        err?.message ?? `${method} ${path} failed with ${resp.status}`
      );
    }
    return parsed as T;
  }

  health(): Promise<{ status: string; modules: Record<string, unknown> }> {
    return this.request("GET", "/health");
  }

  ingest(records: Partial<StudyRecord>[]): Promise<IngestReport> {
    return this.request("POST", "/ingest", { records });
  }

  update(records: Partial<StudyRecord>[]): Promise<ChangeReport> {
    return this.request("POST", "/update", { records });
  }

  fit(opts: { seed?: number; n_topics?: number } = {}): Promise<FitSummary> {
    return this.request("POST", "/fit", opts);
  }

  records(limit = 50, offset = 0): Promise<RecordsPage> {
    return this.request("GET", `/records?limit=${limit}&offset=${offset}`);
  }

  screening(recordId: string): Promise<ScreeningView> {
    return this.request("GET", `/screening/${encodeURIComponent(recordId)}`);
  }

  submitDecision(
    recordId: string,
    action: "accepted" | "overridden",
    opts: { override?: OverridePayload; reviewer?: string } = {}
  ): Promise<DecisionResult> {
    return this.request("POST", `/screening/${encodeURIComponent(recordId)}/decision`, {
      action,
      override: opts.override,
      reviewer: opts.reviewer,
    });
  }

  topics(): Promise<TopicsView> {
    return this.request("GET", "/topics");
  }

  trends(window?: { start: number; end: number }): Promise<TrendsPayload> {
    const qs = window ? `?start=${window.start}&end=${window.end}` : "";
    return this.request("GET", `/topics/trends${qs}`);
  }

  topicTerms(topicId: number, n = 10): Promise<{ topic: number; label: string; terms: [string, number][] }> {
    return this.request("GET", `/topics/${topicId}/terms?n=${n}`);
  }

  query(question: string, k?: number): Promise<QueryResponse> {
    return this.request("POST", "/query", k === undefined ? { question } : { question, k });
  }

  metrics(): Promise<MetricsView> {
    return this.request("GET", "/metrics");
  }

  audit(opts: { limit?: number; kind?: string } = {}): Promise<AuditView> {
    const params = new URLSearchParams();
    if (opts.limit !== undefined) params.set("limit", String(opts.limit));
    if (opts.kind !== undefined) params.set("kind", opts.kind);
    const qs = params.toString();
    return this.request("GET", qs ? `/audit?${qs}` : "/audit");
  }
}
