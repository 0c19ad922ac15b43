import { ApiError, ReviewClient } from "./client";
import type { OverridePayload, ScreeningView, StudyRecord } from "./types";

export type ItemState = "pending" | "accepted" | "overridden";

export interface QueueItem {
  record: StudyRecord;
  view: ScreeningView;
}

export interface SubmitOutcome {
  ok: boolean;
  /** Set when the server reported the item was already decided. The view
   *  has been refreshed from the server so the stored decision is shown. */
  conflict: boolean;
  item: QueueItem;
}

export function itemState(item: QueueItem): ItemState {
  return item.view.decision?.action ?? "pending";
}

/**
 * Reviewer work queue over /records + /screening. Decisions go straight
 * to the service; the queue never buffers them, so a crash loses nothing
 * and the audit trail stays exactly one record per action (the server
 * writes it). Conflicts follow refresh-and-retry: the losing submit pulls
 * the stored decision and the queue moves on.
 */
export class ScreeningQueue {
  private client: ReviewClient;
  private items: QueueItem[] = [];
  private cursor = 0;
  lastConflict: QueueItem | null = null;

  constructor(client: ReviewClient) {
    this.client = client;
  }

  async load(limit = 200): Promise<void> {
    const page = await this.client.records(limit, 0);
    const items: QueueItem[] = [];
    for (const record of page.records) {
      const view = await this.client.screening(record.id);
      items.push({ record, view });
    }
    this.items = items;
    this.cursor = 0;
    this.advanceToPending();
  }

  all(): QueueItem[] {
    return this.items.slice();
  }

  size(): number {
    return this.items.length;
  }

  pendingCount(): number {
    return this.items.filter((i) => itemState(i) === "pending").length;
  }

  decidedCount(): number {
    return this.items.length - this.pendingCount();
  }

  position(): number {
    return this.cursor;
  }

  current(): QueueItem | null {
    this.advanceToPending();
    return this.cursor < this.items.length ? this.items[this.cursor] : null;
  }

  private advanceToPending(): void {
    while (
      this.cursor < this.items.length &&
      itemState(this.items[this.cursor]) !== "pending"
    ) {
      this.cursor++;
    }
  }

  async accept(reviewer = "reviewer"): Promise<SubmitOutcome> {
    return this.submit("accepted", undefined, reviewer);
  }

  async override(payload: OverridePayload, reviewer = "reviewer"): Promise<SubmitOutcome> {
    if (!payload || Object.keys(payload).length === 0) {
      throw new Error("override needs a payload");
    }
    return this.submit("overridden", payload, reviewer);
  }

  private async submit(
    action: "accepted" | "overridden",
    override: OverridePayload | undefined,
    reviewer: string
  ): Promise<SubmitOutcome> {
    const item = this.current();
    if (!item) {
      throw new Error("queue is empty");
    }
    try {
      await this.client.submitDecision(item.record.id, action, { override, reviewer });
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        await this.refresh(item);
        this.lastConflict = item;
        this.advanceToPending();
        return { ok: false, conflict: true, item };
      }
      throw err;
    }
    // Re-read rather than patching locally: an override also moves the
    // design label and history, and the server's view is the record.
    await this.refresh(item);
    this.lastConflict = null;
    this.advanceToPending();
    return { ok: true, conflict: false, item };
  }

  async refresh(item: QueueItem): Promise<void> {
    item.view = await this.client.screening(item.record.id);
  }
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function elementBadges(item: QueueItem): string {
  const order = ["P", "I", "C", "O", "S"];
  return order
    .map((el) => {
      const present = item.view.assessment.elements[el];
      const cls = present ? "badge present" : "badge missing";
      return `<span class="${cls}" data-element="${el}">${el}</span>`;
    })
    .join("");
}

export function renderQueueItem(item: QueueItem | null): string {
  if (!item) {
    return `<div class="queue-card empty-state">Screening queue is empty. All records are decided.</div>`;
  }
  const { record, view } = item;
  const state = itemState(item);
  const design = view.design;
  const provenance =
    design.provider === "reviewer"
      ? `<span class="provenance reviewer">reviewer override</span>`
      : `<span class="provenance machine">machine</span>`;
  const decided = view.decision
    ? `<p class="decision">Decision: <b>${view.decision.action}</b> by ${esc(view.decision.reviewer)}</p>`
    : "";
  const compliant = view.assessment.compliant ? "compliant" : "not compliant";
  return (
    `<div class="queue-card" data-record="${esc(record.id)}" data-state="${state}">` +
    `<h3>${esc(record.title)}</h3>` +
    `<p class="meta">${record.year ?? "n.d."} · ${esc(record.venue ?? "")}` +
    (view.topic !== null ? ` · topic ${view.topic}` : "") +
    `</p>` +
    `<div class="picos">${elementBadges(item)} <span class="verdict">${compliant}</span></div>` +
    `<p class="design">Design: ${esc(design.path.join(" / "))} ${provenance}</p>` +
    decided +
    `<div class="actions">` +
    `<button data-action="accept" ${state !== "pending" ? "disabled" : ""}>Accept</button>` +
    `<button data-action="override" ${state !== "pending" ? "disabled" : ""}>Override…</button>` +
    `</div>` +
    `</div>`
  );
}
