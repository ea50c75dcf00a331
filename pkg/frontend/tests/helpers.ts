import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { GatewayApi } from "../src/api.js";
import type {
  FeedbackRequest,
  FeedbackResponse,
  FinetuneJobDto,
  InferRequest,
  InferResponse,
  LoopReportDto,
  LoopStateDto,
} from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export function loadFixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "..", "fixtures", name), "utf-8")) as T;
}

export function loadIndexHtml(): string {
  const html = readFileSync(join(here, "..", "public", "index.html"), "utf-8");
  const match = html.match(/<body>([\s\S]*)<\/body>/);
  if (!match) {
    throw new Error("index.html has no body");
  }
  // Drop the module script tag; tests drive initApp directly.
  return match[1].replace(/<script[\s\S]*?<\/script>/, "");
}

interface FeedbackExchange {
  request: FeedbackRequest;
  response: FeedbackResponse;
  state_after: LoopStateDto;
}

export interface SessionFixture {
  loop_config: { ft_interval: number; satisfaction_threshold: number; ema_alpha: number };
  initial_state: LoopStateDto;
  initial_report: LoopReportDto;
  infer: { request: InferRequest; response: InferResponse };
  feedback: FeedbackExchange[];
  report: LoopReportDto;
  jobs: { jobs: FinetuneJobDto[] };
}

/** Replays the recorded gateway session: every payload the fake serves was
 * produced by the real server, so the console's rendering is checked against
 * genuine API output without a live process. */
export class RecordedGateway implements GatewayApi {
  inferCalls: InferRequest[] = [];
  feedbackCalls: FeedbackRequest[] = [];
  private served = 0;

  constructor(private fixture: SessionFixture) {}

  private get state(): LoopStateDto {
    if (this.served === 0) {
      return this.fixture.initial_state;
    }
    return this.fixture.feedback[this.served - 1].state_after;
  }

  async postInfer(request: InferRequest): Promise<InferResponse> {
    this.inferCalls.push(request);
    return this.fixture.infer.response;
  }

  async postFeedback(request: FeedbackRequest): Promise<FeedbackResponse> {
    if (this.served >= this.fixture.feedback.length) {
      throw new Error("recorded session exhausted");
    }
    const exchange = this.fixture.feedback[this.served];
    this.served += 1;
    this.feedbackCalls.push(request);
    return exchange.response;
  }

  async getLoopState(): Promise<LoopStateDto> {
    return this.state;
  }

  async getLoopReport(): Promise<LoopReportDto> {
    const full = this.fixture.report;
    return {
      iterations: this.served,
      ft_count: this.state.ft_count,
      satisfaction_trace: full.satisfaction_trace.slice(0, this.served),
      actions: full.actions.slice(0, this.served),
      model_chain: [...this.state.model_chain],
    };
  }

  async getFinetuneJobs(): Promise<FinetuneJobDto[]> {
    return this.fixture.jobs.jobs.slice(0, this.state.ft_count);
  }
}

export class DownGateway implements GatewayApi {
  async postInfer(): Promise<InferResponse> {
    throw Object.assign(new Error("gateway unreachable"), { code: "transport" });
  }

  async postFeedback(): Promise<FeedbackResponse> {
    throw Object.assign(new Error("gateway unreachable"), { code: "transport" });
  }

  async getLoopState(): Promise<LoopStateDto> {
    throw Object.assign(new Error("gateway unreachable"), { code: "transport" });
  }

  async getLoopReport(): Promise<LoopReportDto> {
    throw Object.assign(new Error("gateway unreachable"), { code: "transport" });
  }

  async getFinetuneJobs(): Promise<FinetuneJobDto[]> {
    throw Object.assign(new Error("gateway unreachable"), { code: "transport" });
  }
}
