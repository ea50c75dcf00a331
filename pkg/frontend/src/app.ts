import { ApiClient, type GatewayApi } from "./api.js";
import { renderMarkdown } from "./markdown.js";
import { ConsoleSession } from "./state.js";
import type { InferRequest } from "./types.js";

export interface AppOptions {
  api?: GatewayApi;
  pollIntervalMs?: number;
  startPolling?: boolean;
}

export interface App {
  session: ConsoleSession;
  whenIdle(): Promise<void>;
  stopPolling(): void;
}

function el<T extends HTMLElement>(root: Document, id: string): T {
  const node = root.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function gaugeSvg(value: number): string {
  const angle = (value / 100) * 180;
  const radians = ((180 - angle) * Math.PI) / 180;
  const x = 60 + 50 * Math.cos(radians);
  const y = 60 - 50 * Math.sin(radians);
  const large = angle > 180 ? 1 : 0;
  return (
    `<svg viewBox="0 0 120 70" class="gauge">` +
    `<path d="M 10 60 A 50 50 0 0 1 110 60" fill="none" stroke="#2a2f3a" stroke-width="10"/>` +
    `<path d="M 10 60 A 50 50 0 ${large} 1 ${x.toFixed(2)} ${y.toFixed(2)}"` +
    ` fill="none" stroke="#35c46f" stroke-width="10"/>` +
    `</svg>`
  );
}

function traceSvg(trace: number[]): string {
  if (trace.length === 0) {
    return `<svg viewBox="0 0 300 90" class="trace"></svg>`;
  }
  const step = trace.length > 1 ? 280 / (trace.length - 1) : 0;
  const points = trace
    .map((value, index) => `${(10 + index * step).toFixed(1)},${(85 - value * 0.75).toFixed(1)}`)
    .join(" ");
  return (
    `<svg viewBox="0 0 300 90" class="trace">` +
    `<polyline points="${points}" fill="none" stroke="#4aa3ff" stroke-width="2"/>` +
    `</svg>`
  );
}

export function initApp(root: Document, options: AppOptions = {}): App {
  const api = options.api ?? new ApiClient("");
  const session = new ConsoleSession(api);
  let lastOperation: Promise<unknown> = Promise.resolve();
  let pollTimer: ReturnType<typeof setInterval> | null = null;

  const promptInput = el<HTMLTextAreaElement>(root, "prompt-text");
  const imageInput = el<HTMLInputElement>(root, "image-refs");
  const intentSelect = el<HTMLSelectElement>(root, "intent");
  const inferButton = el<HTMLButtonElement>(root, "submit-inference");
  const errorBanner = el<HTMLDivElement>(root, "error-banner");
  const reportView = el<HTMLDivElement>(root, "report-view");
  const findingsBody = el<HTMLTableSectionElement>(root, "findings-body");
  const mediaGallery = el<HTMLDivElement>(root, "media-gallery");
  const usageView = el<HTMLDivElement>(root, "usage-view");
  const scoreEnabled = el<HTMLInputElement>(root, "score-enabled");
  const scoreSlider = el<HTMLInputElement>(root, "score-slider");
  const scoreValue = el<HTMLSpanElement>(root, "score-value");
  const commentInput = el<HTMLTextAreaElement>(root, "feedback-comment");
  const kindBadge = el<HTMLSpanElement>(root, "kind-badge");
  const feedbackButton = el<HTMLButtonElement>(root, "submit-feedback");
  const gaugeBox = el<HTMLDivElement>(root, "gauge-box");
  const gaugeValue = el<HTMLDivElement>(root, "gauge-value");
  const counterView = el<HTMLSpanElement>(root, "counter-view");
  const ftCountView = el<HTMLSpanElement>(root, "ft-count-view");
  const iterationView = el<HTMLSpanElement>(root, "iteration-view");
  const modelChainList = el<HTMLUListElement>(root, "model-chain");
  const traceBox = el<HTMLDivElement>(root, "trace-box");
  const ftBadge = el<HTMLSpanElement>(root, "ft-badge");
  const ftTimeline = el<HTMLUListElement>(root, "ft-timeline");
  const datasetLinks = el<HTMLUListElement>(root, "dataset-links");
  const staleIndicator = el<HTMLSpanElement>(root, "stale-indicator");

  function readDraft(): void {
    session.draft.score = scoreEnabled.checked ? Number(scoreSlider.value) : null;
    session.draft.comment = commentInput.value;
  }

  function render(): void {
    errorBanner.hidden = session.lastError === null;
    if (session.lastError) {
      errorBanner.textContent = `${session.lastError.code}: ${session.lastError.message}`;
    }
    inferButton.disabled = session.pendingInference || promptInput.value.trim() === "";
    if (session.response) {
      reportView.innerHTML = renderMarkdown(session.response.report_markdown);
      findingsBody.innerHTML = session.response.findings
        .map(
          (finding) =>
            `<tr><td>${finding.defect_type}</td><td>${finding.location_phrase}</td>` +
            `<td>${finding.severity_phrase}</td></tr>`,
        )
        .join("");
      mediaGallery.innerHTML = session.response.media
        .map((src) => `<figure><img src="${src}" alt="generated media"/></figure>`)
        .join("");
      usageView.textContent =
        `tokens: ${session.response.usage.total_tokens}` +
        ` (prompt ${session.response.usage.prompt_tokens}, ` +
        `completion ${session.response.usage.completion_tokens}), ` +
        `latency: ${session.response.usage.latency_ms} ms`;
    }
    scoreSlider.disabled = !scoreEnabled.checked;
    scoreValue.textContent = scoreEnabled.checked ? scoreSlider.value : "off";
    const kind = session.draftKind();
    kindBadge.textContent = kind ?? "empty";
    kindBadge.dataset.kind = kind ?? "none";
    feedbackButton.disabled = !session.canSubmitFeedback();
    if (session.summary) {
      gaugeBox.innerHTML = gaugeSvg(session.summary.satisfaction);
      gaugeValue.textContent = String(session.summary.satisfaction);
      counterView.textContent = String(session.summary.counter);
      ftCountView.textContent = String(session.summary.ftCount);
      iterationView.textContent = String(session.summary.iteration);
    }
    modelChainList.innerHTML = session.modelChain
      .map((model) => `<li>${model}</li>`)
      .join("");
    traceBox.innerHTML = traceSvg(session.trace);
    traceBox.dataset.trace = JSON.stringify(session.trace);
    ftBadge.hidden = session.finetuneEvents.length === 0;
    ftBadge.textContent = `fine-tuned x${session.finetuneEvents.length}`;
    ftTimeline.innerHTML = session.finetuneEvents
      .map((event) => `<li>iteration ${event.iteration}: ${event.modelId}</li>`)
      .join("");
    datasetLinks.innerHTML = session.jobs
      .map((job) => {
        const name = job.dataset_ref.split("/").pop() ?? job.dataset_ref;
        const id = name.replace(/\.jsonl$/, "");
        return (
          `<li><a href="/api/dataset/${id}" target="_blank">${name}</a>` +
          ` <span class="muted">(${job.status})</span></li>`
        );
      })
      .join("");
    staleIndicator.hidden = !session.stale;
  }

  function track(operation: Promise<unknown>): void {
    lastOperation = lastOperation.then(() => operation).then(render, render);
  }

  inferButton.addEventListener("click", () => {
    const imageRefs = imageInput.value
      .split(",")
      .map((ref) => ref.trim())
      .filter((ref) => ref.length > 0);
    const request: InferRequest = {
      text: promptInput.value.trim() || null,
      image_refs: imageRefs,
      intent: intentSelect.value === "generate" ? "generate" : "analyze",
    };
    track(session.submitInference(request));
    render();
  });

  feedbackButton.addEventListener("click", () => {
    readDraft();
    track(session.submitFeedback());
    render();
  });

  for (const input of [promptInput, commentInput, scoreSlider, scoreEnabled]) {
    input.addEventListener("input", () => {
      readDraft();
      render();
    });
    input.addEventListener("change", () => {
      readDraft();
      render();
    });
  }

  if (options.startPolling ?? true) {
    pollTimer = setInterval(() => {
      track(session.refresh());
    }, options.pollIntervalMs ?? 2000);
  }
  track(session.refresh());
  render();

  return {
    session,
    async whenIdle() {
      let settled: Promise<unknown>;
      do {
        settled = lastOperation;
        await settled;
      } while (settled !== lastOperation);
      render();
    },
    stopPolling() {
      if (pollTimer !== null) {
        clearInterval(pollTimer);
        pollTimer = null;
      }
    },
  };
}
