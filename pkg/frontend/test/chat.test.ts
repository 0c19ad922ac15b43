import { describe, expect, it } from "vitest";
import { ChatPanel, renderChat, renderMessage } from "../src/chat";
import { ReviewClient } from "../src/client";
import { FakeService } from "./fixtures";

function setup(): { service: FakeService; panel: ChatPanel } {
  const service = new FakeService([{ id: "rec-0", title: "Study 0" }]);
  const client = new ReviewClient("http://fake", service.fetch);
  return { service, panel: new ChatPanel(client) };
}

describe("chat panel", () => {
  it("renders exactly the citations the service returned", async () => {
    const { service, panel } = setup();
    service.nextQuery = {
      answer: "Two trials reported reduced pain intensity.",
      citations: [
        { record_id: "exercise-0", chunk_id: "exercise-0:1", span: "pain intensity" },
        { record_id: "exercise-3", chunk_id: "exercise-3:0", span: "supervised exercise" },
      ],
      insufficient: false,
    };
    const msg = await panel.ask("What happened to pain outcomes?");
    const html = renderMessage(msg);

    const rendered = [...html.matchAll(/data-record-id="([^"]+)"/g)].map((m) => m[1]);
    expect(rendered).toEqual(["exercise-0", "exercise-3"]);
    expect(html).toContain("[1] exercise-0");
    expect(html).toContain("[2] exercise-3");
    expect(html).not.toContain("refusal");
  });

  it("never fabricates a citation across a whole transcript", async () => {
    const { service, panel } = setup();
    const served = new Set<string>();
    for (let turn = 0; turn < 5; turn++) {
      const ids = turn % 2 ? [`doc-${turn}`] : [];
      service.nextQuery = {
        answer: ids.length ? `Answer ${turn}.` : "Not enough graded evidence.",
        citations: ids.map((id) => ({ record_id: id, chunk_id: `${id}:0`, span: "…" })),
        insufficient: !ids.length,
      };
      ids.forEach((id) => served.add(id));
      await panel.ask(`Question ${turn}?`);
    }
    const html = renderChat(panel);
    const rendered = [...html.matchAll(/data-record-id="([^"]+)"/g)].map((m) => m[1]);
    expect(rendered.length).toBe(served.size);
    for (const id of rendered) {
      expect(served.has(id)).toBe(true);
    }
  });

  it("styles insufficiency refusals distinctly, with zero citation links", async () => {
    const { service, panel } = setup();
    service.nextQuery = {
      answer: "The graded evidence does not cover this question.",
      citations: [],
      insufficient: true,
    };
    const msg = await panel.ask("What about unicorn therapy?");
    const html = renderMessage(msg);
    expect(html).toContain("refusal");
    expect(html).not.toContain('class="citation"');
  });

  it("turns a provider outage into an error bubble and keeps the transcript", async () => {
    const { service, panel } = setup();
    service.failNextQuery = "ProviderUnavailable";
    const msg = await panel.ask("Anything?");
    expect(msg.role).toBe("error");
    expect(msg.text).toContain("ProviderUnavailable");
    expect(panel.transcript).toHaveLength(2);
    expect(panel.transcript[0].role).toBe("user");
    const html = renderMessage(msg);
    expect(html).toContain('class="msg error"');
    expect(html).not.toContain('class="citation"');
  });

  it("refuses empty questions locally", async () => {
    const { panel } = setup();
    await expect(panel.ask("   ")).rejects.toThrow("non-empty");
    expect(panel.transcript).toHaveLength(0);
  });

  it("escapes answer text", async () => {
    const { service, panel } = setup();
    service.nextQuery = {
      answer: 'Beware <img src=x onerror=alert(1)> & "quotes"',
      citations: [],
      insufficient: false,
    };
    const msg = await panel.ask("Inject?");
    const html = renderMessage(msg);
    expect(html).not.toContain("<img");
    expect(html).toContain("&lt;img");
  });

  it("starts with a prompt-to-ask empty state", () => {
    const { panel } = setup();
    expect(renderChat(panel)).toContain("empty-state");
  });
});
