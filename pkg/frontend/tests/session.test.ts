import { beforeEach, describe, expect, it } from "vitest";

import { initApp, type App } from "../src/app.js";
import {
  DownGateway,
  loadFixture,
  loadIndexHtml,
  RecordedGateway,
  type SessionFixture,
} from "./helpers.js";

const fixture = loadFixture<SessionFixture>("session_alpha3.json");

function mount(api: RecordedGateway | DownGateway): App {
  document.body.innerHTML = loadIndexHtml();
  return initApp(document, { api, startPolling: false });
}

function setValue(id: string, value: string): void {
  const input = document.getElementById(id) as HTMLInputElement | HTMLTextAreaElement;
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

function click(id: string): void {
  (document.getElementById(id) as HTMLButtonElement).click();
}

function text(id: string): string {
  return document.getElementById(id)?.textContent ?? "";
}

describe("scripted console session (3 feedbacks, ft_interval=3)", () => {
  let app: App;
  let gateway: RecordedGateway;

  beforeEach(async () => {
    gateway = new RecordedGateway(fixture);
    app = mount(gateway);
    await app.whenIdle();
  });

  it("starts from the server's fresh-loop state", () => {
    expect(text("gauge-value")).toBe(String(fixture.initial_state.satisfaction));
    expect(text("counter-view")).toBe(String(fixture.initial_state.counter));
    expect(document.getElementById("ft-badge")?.hasAttribute("hidden")).toBe(true);
  });

  it("disables submission while the form is empty", () => {
    const inferButton = document.getElementById("submit-inference") as HTMLButtonElement;
    const feedbackButton = document.getElementById("submit-feedback") as HTMLButtonElement;
    expect(inferButton.disabled).toBe(true);
    expect(feedbackButton.disabled).toBe(true);
    setValue("feedback-comment", "something to say");
    expect((document.getElementById("submit-feedback") as HTMLButtonElement).disabled).toBe(false);
  });

  it("renders the inference report, findings and usage from the payload", async () => {
    setValue("prompt-text", fixture.infer.request.text ?? "");
    click("submit-inference");
    await app.whenIdle();
    expect(gateway.inferCalls).toHaveLength(1);
    expect(document.querySelector("#report-view h1")?.textContent).toBe(
      "Railway defect inspection report",
    );
    const rows = document.querySelectorAll("#findings-body tr");
    expect(rows).toHaveLength(fixture.infer.response.findings.length);
    expect(text("usage-view")).toContain(
      `tokens: ${fixture.infer.response.usage.total_tokens}`,
    );
    expect(text("usage-view")).toContain(
      `latency: ${fixture.infer.response.usage.latency_ms} ms`,
    );
  });

  it("shows the fine-tune badge exactly once across three feedbacks", async () => {
    setValue("prompt-text", fixture.infer.request.text ?? "");
    click("submit-inference");
    await app.whenIdle();

    for (const exchange of fixture.feedback) {
      const scoreBox = document.getElementById("score-enabled") as HTMLInputElement;
      scoreBox.checked = true;
      scoreBox.dispatchEvent(new Event("change", { bubbles: true }));
      setValue("score-slider", String(exchange.request.score));
      click("submit-feedback");
      await app.whenIdle();
      // Gauge and counters round-trip from this exact API payload.
      expect(text("gauge-value")).toBe(String(exchange.response.satisfaction));
      expect(text("counter-view")).toBe(String(exchange.response.counter));
      expect(text("ft-count-view")).toBe(String(exchange.response.ft_count));
      expect(text("iteration-view")).toBe(String(exchange.response.iteration));
    }

    const badge = document.getElementById("ft-badge")!;
    expect(badge.hasAttribute("hidden")).toBe(false);
    expect(badge.textContent).toBe("fine-tuned x1");
    expect(document.querySelectorAll("#ft-timeline li")).toHaveLength(1);
    expect(app.session.finetuneEvents).toHaveLength(1);
    const datasetLinks = [...document.querySelectorAll("#dataset-links a")];
    expect(datasetLinks).toHaveLength(1);
    const ref = fixture.jobs.jobs[0].dataset_ref;
    expect(datasetLinks[0].getAttribute("href")).toBe(
      `/api/dataset/${ref.replace(/\.jsonl$/, "")}`,
    );
  });

  it("renders the gauge trace verbatim from /api/loop/report", async () => {
    for (const exchange of fixture.feedback) {
      const scoreBox = document.getElementById("score-enabled") as HTMLInputElement;
      scoreBox.checked = true;
      scoreBox.dispatchEvent(new Event("change", { bubbles: true }));
      setValue("score-slider", String(exchange.request.score));
      click("submit-feedback");
      await app.whenIdle();
    }
    const traceBox = document.getElementById("trace-box")!;
    expect(JSON.parse(traceBox.dataset.trace ?? "[]")).toEqual(
      fixture.report.satisfaction_trace,
    );
    const chain = [...document.querySelectorAll("#model-chain li")].map(
      (node) => node.textContent,
    );
    expect(chain).toEqual(fixture.report.model_chain);
  });

  it("holds no numeric state the server did not provide", async () => {
    // Every number on screen must appear somewhere in a served payload.
    for (const exchange of fixture.feedback) {
      const scoreBox = document.getElementById("score-enabled") as HTMLInputElement;
      scoreBox.checked = true;
      scoreBox.dispatchEvent(new Event("change", { bubbles: true }));
      setValue("score-slider", String(exchange.request.score));
      click("submit-feedback");
      await app.whenIdle();
    }
    const last = fixture.feedback[fixture.feedback.length - 1];
    expect(app.session.summary).toEqual({
      satisfaction: last.state_after.satisfaction,
      counter: last.state_after.counter,
      ftCount: last.state_after.ft_count,
      iteration: last.state_after.iteration,
      modelId: last.state_after.model_id,
    });
    expect(app.session.trace).toEqual(fixture.report.satisfaction_trace);
  });
});

describe("degraded gateway", () => {
  it("shows an inline error banner when inference fails", async () => {
    document.body.innerHTML = loadIndexHtml();
    const app = initApp(document, { api: new DownGateway(), startPolling: false });
    await app.whenIdle();
    setValue("prompt-text", "anything");
    click("submit-inference");
    await app.whenIdle();
    const banner = document.getElementById("error-banner")!;
    expect(banner.hasAttribute("hidden")).toBe(false);
    expect(banner.textContent).toContain("gateway unreachable");
  });

  it("flags stale data but keeps the dashboard alive", async () => {
    document.body.innerHTML = loadIndexHtml();
    const app = initApp(document, { api: new DownGateway(), startPolling: false });
    await app.whenIdle();
    expect(app.session.stale).toBe(true);
    expect(document.getElementById("stale-indicator")?.hasAttribute("hidden")).toBe(false);
  });
});
