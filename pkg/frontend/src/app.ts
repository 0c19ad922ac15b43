import { ChatPanel, renderChat } from "./chat";
import { ReviewClient } from "./client";
import { renderQueueItem, ScreeningQueue } from "./queue";
import { renderTrends } from "./trends";
import { renderWordCloud } from "./wordcloud";
import type { MetricsView, OverridePayload, TopicsView, TrendsPayload } from "./types";

export interface AppData {
  metrics: MetricsView;
  topics: TopicsView;
  trends: TrendsPayload | null;
}

export async function loadAppData(client: ReviewClient): Promise<AppData> {
  const metrics = await client.metrics();
  const topics = await client.topics();
  let trends: TrendsPayload | null = null;
  if (topics.fitted) {
    trends = await client.trends();
  }
  return { metrics, topics, trends };
}

function metricsStrip(m: MetricsView): string {
  const cells: [string, string][] = [
    ["records", String(m.records)],
    ["topics", m.fitted ? String(m.topics) : "not fitted"],
    ["compliant", `${m.compliant}/${m.compliant + m.non_compliant}`],
    ["decided", String((m.decisions.accepted ?? 0) + (m.decisions.overridden ?? 0))],
    ["refit due", m.pending_refit ? "yes" : "no"],
  ];
  const html = cells
    .map(([k, v]) => `<div class="stat"><span class="k">${k}</span><span class="v">${v}</span></div>`)
    .join("");
  return `<div class="metrics-strip">${html}</div>`;
}

function cloudSection(topics: TopicsView): string {
  if (!topics.fitted || !topics.topics.length) {
    return `<section class="cloud"><div class="empty-state">No topics yet.</div></section>`;
  }
  // One cloud over the union of per-topic term feeds; repeated terms keep
  // their highest-weight entry.
  const best = new Map<string, number>();
  for (const row of topics.topics) {
    for (const [term, weight] of row.terms) {
      const prev = best.get(term);
      if (prev === undefined || weight > prev) best.set(term, weight);
    }
  }
  const terms: [string, number][] = [...best.entries()].sort((a, b) => b[1] - a[1]);
  return `<section class="cloud"><h2>Topic vocabulary</h2>${renderWordCloud(terms)}</section>`;
}

function conflictBanner(queue: ScreeningQueue): string {
  const lost = queue.lastConflict;
  if (!lost) return "";
  const who = lost.view.decision?.reviewer ?? "someone else";
  return (
    `<div class="conflict-banner">⚠ “${lost.record.title}” was already decided` +
    ` (by ${who}). The stored decision is shown and the queue has moved on.</div>`
  );
}

export function renderApp(data: AppData, queue: ScreeningQueue, chat: ChatPanel): string {
  return (
    `<main class="reviewdesk">` +
    `<header><h1>Review Desk</h1>${metricsStrip(data.metrics)}</header>` +
    renderTrends(data.trends) +
    cloudSection(data.topics) +
    `<section class="screening"><h2>Screening queue ` +
    `<span class="counts">${queue.pendingCount()} pending / ${queue.size()} total</span></h2>` +
    conflictBanner(queue) +
    renderQueueItem(queue.current()) +
    `</section>` +
    renderChat(chat) +
    `</main>`
  );
}

export interface MountOptions {
  reviewer?: string;
  /** Collects the override payload from the reviewer; null cancels. */
  askOverride?: () => OverridePayload | null;
}

interface MountRoot {
  innerHTML: string;
  addEventListener?: (type: string, handler: (ev: Event) => void) => void;
}

function defaultAskOverride(): OverridePayload | null {
  const ask = (globalThis as { prompt?: (msg: string) => string | null }).prompt;
  if (!ask) return null;
  const design = ask("Override design leaf (e.g. cohort, rct, case_control):");
  if (!design) return null;
  return { design: design.trim() };
}

/** Browser entry point: mount into an element and wire the controls. */
export async function mount(
  root: MountRoot,
  baseUrl: string,
  opts: MountOptions = {}
): Promise<{
  client: ReviewClient;
  queue: ScreeningQueue;
  chat: ChatPanel;
  redraw: () => Promise<void>;
}> {
  const client = new ReviewClient(baseUrl);
  const queue = new ScreeningQueue(client);
  const chat = new ChatPanel(client);
  const reviewer = opts.reviewer ?? "reviewer";
  const askOverride = opts.askOverride ?? defaultAskOverride;

  await queue.load();
  const redraw = async () => {
    const data = await loadAppData(client);
    root.innerHTML = renderApp(data, queue, chat);
  };
  await redraw();

  // One delegated listener each; they survive innerHTML swaps.
  root.addEventListener?.("click", (ev) => {
    const target = ev.target as { closest?: (sel: string) => { dataset?: { action?: string } } | null };
    const button = target.closest?.("[data-action]");
    const action = button?.dataset?.action;
    if (!action) return;
    if (action === "accept") {
      void queue.accept(reviewer).then(redraw);
    } else if (action === "override") {
      const payload = askOverride();
      if (payload) {
        void queue.override(payload, reviewer).then(redraw);
      }
    }
  });
  root.addEventListener?.("submit", (ev) => {
    const form = ev.target as {
      classList?: { contains(name: string): boolean };
      elements?: Record<string, { value?: string }>;
    };
    if (!form.classList?.contains("ask")) return;
    ev.preventDefault?.();
    const question = form.elements?.question?.value?.trim();
    if (question) {
      void chat.ask(question).then(redraw);
    }
  });

  return { client, queue, chat, redraw };
}
