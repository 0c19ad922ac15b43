import { ApiError, ReviewClient } from "./client";
import type { Citation, QueryResponse } from "./types";

export interface ChatMessage {
  role: "user" | "assistant" | "error";
  text: string;
  /** Verbatim from the service. The renderer has no other source of
   *  citations, so the panel cannot invent a link the server never sent. */
  citations: Citation[];
  insufficient: boolean;
  route?: string;
  attempts?: number;
}

export class ChatPanel {
  private client: ReviewClient;
  transcript: ChatMessage[] = [];

  constructor(client: ReviewClient) {
    this.client = client;
  }

  async ask(question: string, k?: number): Promise<ChatMessage> {
    const q = question.trim();
    if (!q) {
      throw new Error("question must be non-empty");
    }
    this.transcript.push({ role: "user", text: q, citations: [], insufficient: false });
    let reply: ChatMessage;
    try {
      const resp: QueryResponse = await this.client.query(q, k);
      reply = {
        role: "assistant",
        text: resp.answer,
        citations: resp.citations,
        insufficient: resp.insufficient,
        route: resp.route,
        attempts: resp.attempts,
      };
    } catch (err) {
      const detail =
        err instanceof ApiError ? `${err.kind}: ${err.message}` : String(err);
      reply = {
        role: "error",
        text: `Query failed (${detail}). The answer service may be down; try again.`,
        citations: [],
        insufficient: false,
      };
    }
    this.transcript.push(reply);
    return reply;
  }
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function citationChips(citations: Citation[]): string {
  if (!citations.length) return "";
  const chips = citations
    .map(
      (c, i) =>
        `<a class="citation" href="#record-${esc(c.record_id)}"` +
        ` data-record-id="${esc(c.record_id)}" data-chunk-id="${esc(c.chunk_id)}"` +
        ` title="${esc(c.span)}">[${i + 1}] ${esc(c.record_id)}</a>`
    )
    .join(" ");
  return `<div class="citations">${chips}</div>`;
}

export function renderMessage(msg: ChatMessage): string {
  if (msg.role === "user") {
    return `<div class="msg user">${esc(msg.text)}</div>`;
  }
  if (msg.role === "error") {
    return `<div class="msg error">${esc(msg.text)}</div>`;
  }
  const cls = msg.insufficient ? "msg assistant refusal" : "msg assistant";
  const route = msg.route ? `<span class="route">${esc(msg.route)}</span>` : "";
  return (
    `<div class="${cls}">` +
    `<p>${esc(msg.text)}</p>` +
    citationChips(msg.citations) +
    route +
    `</div>`
  );
}

export function renderChat(panel: ChatPanel): string {
  const body = panel.transcript.length
    ? panel.transcript.map(renderMessage).join("")
    : `<div class="empty-state">Ask a question about the evidence base.</div>`;
  return (
    `<section class="chat">` +
    `<h2>Ask the evidence</h2>` +
    `<div class="transcript">${body}</div>` +
    `<form class="ask"><input name="question" placeholder="e.g. What interventions were studied for chronic pain?"/>` +
    `<button type="submit">Ask</button></form>` +
    `</section>`
  );
}
