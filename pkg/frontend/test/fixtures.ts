import type {
  AuditEntry,
  Citation,
  Decision,
  OverridePayload,
  ScreeningView,
  StudyRecord,
  TrendsPayload,
} from "../src/types";
import type { FetchLike } from "../src/client";

// ---------------------------------------------------------------------------
// trends fixtures

/**
 * Three topics over 2015..2024 with topic 1 surging through 2018-2022.
 * Every count inside that window on topic 1 beats everything else on the
 * grid, so the brightest heatmap cells must land there.
 */
export function plantedPeakPayload(): TrendsPayload {
  const years = [2015, 2016, 2017, 2018, 2019, 2020, 2021, 2022, 2023, 2024];
  const counts = [
    [3, 4, 2, 5, 4, 3, 4, 5, 3, 2], // topic 0: flat background
    [2, 3, 4, 14, 18, 22, 19, 15, 5, 4], // topic 1: the peak
    [1, 2, 2, 3, 2, 1, 2, 3, 2, 1], // topic 2: sparse
  ];
  return finishPayload([0, 1, 2], years, counts, {
    "0": "0_outcom_trial_regist_registr",
    "1": "1_pain_exercis_therapi_chronic",
    "2": "2_vaccin_immun_dose_antibodi",
  });
}

export function singleTopicPayload(): TrendsPayload {
  const years = [2019, 2020, 2021];
  return finishPayload([0], years, [[2, 5, 3]], { "0": "0_sleep_insomnia_cbt_trial" });
}

export function emptyPayload(): TrendsPayload {
  return finishPayload([], [], [], {});
}

function finishPayload(
  topics: number[],
  years: number[],
  counts: number[][],
  labels: Record<string, string>
): TrendsPayload {
  const totals = years.map((_, c) => counts.reduce((s, row) => s + (row[c] ?? 0), 0));
  const shares = counts.map((row) =>
    row.map((v, c) => (totals[c] ? v / totals[c] : 0))
  );
  return { topics, years, counts, undated: {}, shares, labels, alerts: [] };
}

export function columnSums(payload: TrendsPayload): number[] {
  return payload.years.map((_, c) =>
    payload.counts.reduce((s, row) => s + (row[c] ?? 0), 0)
  );
}

// ---------------------------------------------------------------------------
// in-memory stand-in for the review service

const DESIGN_PATHS: Record<string, string[]> = {
  rct: ["root", "interventional", "randomized", "rct"],
  cohort: ["root", "observational", "cohort"],
  case_control: ["root", "observational", "case_control"],
  systematic_review: ["root", "synthesis", "systematic_review"],
};

export interface FakeRecordSpec {
  id: string;
  title: string;
  year?: number;
  design?: string;
  compliant?: boolean;
}

/**
 * Implements just enough of the HTTP surface for the panel classes:
 * records, screening views, decisions with conflict-on-second, the audit
 * trail, query, and the dashboard reads. Speaks the same JSON bodies.
 */
export class FakeService {
  records: StudyRecord[] = [];
  views = new Map<string, ScreeningView>();
  decisions = new Map<string, Decision>();
  auditLog: AuditEntry[] = [];
  nextQuery: { answer: string; citations: Citation[]; insufficient: boolean } = {
    answer: "No question asked yet.",
    citations: [],
    insufficient: true,
  };
  failNextQuery: string | null = null;
  fitted = false;
  trendsPayload: TrendsPayload = emptyPayload();

  constructor(specs: FakeRecordSpec[] = []) {
    for (const spec of specs) this.addRecord(spec);
  }

  addRecord(spec: FakeRecordSpec): void {
    const record: StudyRecord = {
      id: spec.id,
      title: spec.title,
      abstract: null,
      year: spec.year ?? null,
      venue: "Fake Journal",
      authors: [],
      interventions: [],
      outcomes: [],
      population: [],
      source_tag: "fake",
      raw: {},
    };
    this.records.push(record);
    const design = spec.design ?? "rct";
    this.views.set(spec.id, {
      record_id: spec.id,
      assessment: {
        sentence_labels: [],
        elements: { P: true, I: true, C: spec.compliant !== false, O: true, S: true },
        compliant: spec.compliant !== false,
        confidence: 0.9,
        evidence: {},
        rubric_mode: "all_five",
        theta: 0.5,
      },
      design: {
        path: DESIGN_PATHS[design] ?? ["root", design],
        verdicts: {},
        setting: null,
        rationale: "matched design cue",
        provider: "rules",
      },
      design_history: [],
      decision: null,
      topic: 0,
    });
  }

  auditByKind(kind: string): AuditEntry[] {
    return this.auditLog.filter((e) => e.kind === kind);
  }

  private reply(status: number, body: unknown) {
    return Promise.resolve({
      status,
      text: () => Promise.resolve(JSON.stringify(body)),
    });
  }

  private error(status: number, type: string, message: string) {
    return this.reply(status, { error: { type, message } });
  }

  fetch: FetchLike = (url, init) => {
    const u = new URL(url);
    const path = u.pathname;
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body) : {};

    if (path === "/records") {
      return this.reply(200, { total: this.records.length, records: this.records });
    }
    const screeningMatch = path.match(/^\/screening\/([^/]+)$/);
    if (screeningMatch && method === "GET") {
      const id = decodeURIComponent(screeningMatch[1]);
      const view = this.views.get(id);
      if (!view) return this.error(404, "UnknownEntity", `record '${id}' not found`);
      return this.reply(200, view);
    }
    const decisionMatch = path.match(/^\/screening\/([^/]+)\/decision$/);
    if (decisionMatch && method === "POST") {
      return this.handleDecision(decodeURIComponent(decisionMatch[1]), body);
    }
    if (path === "/audit") {
      const kind = u.searchParams.get("kind");
      const entries = kind ? this.auditByKind(kind) : this.auditLog;
      return this.reply(200, { entries });
    }
    if (path === "/query" && method === "POST") {
      if (this.failNextQuery) {
        const type = this.failNextQuery;
        this.failNextQuery = null;
        return this.error(502, type, "answer provider unreachable");
      }
      return this.reply(200, { ...this.nextQuery, route: "vector", attempts: 1 });
    }
    if (path === "/metrics") {
      return this.reply(200, {
        records: this.records.length,
        chunks: 0,
        index_size: 0,
        topics: 0,
        fitted: this.fitted,
        outlier_fraction: null,
        pending_refit: false,
        compliant: this.records.length,
        non_compliant: 0,
        decisions: this.decisionCounts(),
        audit_entries: this.auditLog.length,
      });
    }
    if (path === "/topics") {
      return this.reply(200, { fitted: this.fitted, topics: [] });
    }
    if (path === "/topics/trends") {
      return this.reply(200, this.trendsPayload);
    }
    return this.error(404, "UnknownEntity", `no route ${method} ${path}`);
  };

  private decisionCounts(): Record<string, number> {
    const counts: Record<string, number> = { accepted: 0, overridden: 0 };
    for (const d of this.decisions.values()) counts[d.action] += 1;
    return counts;
  }

  private handleDecision(id: string, body: Record<string, unknown>) {
    const view = this.views.get(id);
    if (!view) return this.error(404, "UnknownEntity", `record '${id}' not found`);
    const action = body.action as string;
    if (action !== "accepted" && action !== "overridden") {
      return this.error(422, "ValueError", "action must be 'accepted' or 'overridden'");
    }
    const override = (body.override ?? null) as OverridePayload | null;
    if (action === "overridden" && (!override || !Object.keys(override).length)) {
      return this.error(422, "ValueError", "overridden decisions need an override payload");
    }
    if (this.decisions.has(id)) {
      return this.error(409, "DecisionConflict", `record '${id}' already has a decision`);
    }
    const reviewer = String(body.reviewer ?? "reviewer");
    const decision: Decision = {
      action,
      override,
      reviewer,
      ts: new Date().toISOString(),
    };
    this.decisions.set(id, decision);
    view.decision = decision;
    if (action === "overridden" && override?.design) {
      view.design = {
        path: DESIGN_PATHS[override.design] ?? ["root", override.design],
        verdicts: {},
        setting: override.setting ?? view.design.setting,
        rationale: `reviewer override by ${reviewer}`,
        provider: "reviewer",
      };
      view.design_history.push({
        provider: "reviewer",
        leaf: override.design,
        ts: decision.ts,
      });
    }
    this.auditLog.push({
      seq: this.auditLog.length,
      ts: Date.now() / 1000,
      kind: "decision",
      payload: { record_id: id, action, override, reviewer },
    });
    return this.reply(200, { record_id: id, decision });
  }
}
