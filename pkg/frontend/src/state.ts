import type { ApiError, GatewayApi } from "./api.js";
import { deriveKind, type FeedbackKind } from "./feedback.js";
import type {
  FeedbackResponse,
  FinetuneJobDto,
  InferRequest,
  InferResponse,
  LoopReportDto,
} from "./types.js";

export interface FeedbackDraft {
  score: number | null;
  comment: string;
}

/** Numbers shown on the dashboard; every value comes verbatim from an API
 * response, the console never computes satisfaction itself. */
export interface LoopSummary {
  satisfaction: number;
  counter: number;
  ftCount: number;
  iteration: number;
  modelId: string;
}

export interface FinetuneEvent {
  iteration: number;
  modelId: string;
}

export class ConsoleSession {
  response: InferResponse | null = null;
  draft: FeedbackDraft = { score: null, comment: "" };
  summary: LoopSummary | null = null;
  trace: number[] = [];
  modelChain: string[] = [];
  finetuneEvents: FinetuneEvent[] = [];
  jobs: FinetuneJobDto[] = [];
  pendingInference = false;
  pendingFeedback = false;
  stale = false;
  lastError: ApiError | null = null;

  constructor(private api: GatewayApi) {}

  draftKind(): FeedbackKind | null {
    return deriveKind(this.draft.comment || null, this.draft.score);
  }

  /** Mirrors the server-side precondition: score or comment must be present. */
  canSubmitFeedback(): boolean {
    if (this.pendingFeedback) {
      return false;
    }
    return this.draft.score !== null || this.draft.comment.trim().length > 0;
  }

  async submitInference(request: InferRequest): Promise<InferResponse | null> {
    if (this.pendingInference) {
      return null;
    }
    this.pendingInference = true;
    this.lastError = null;
    try {
      this.response = await this.api.postInfer(request);
      return this.response;
    } catch (error) {
      this.lastError = error as ApiError;
      return null;
    } finally {
      this.pendingInference = false;
    }
  }

  /** At most one in-flight feedback POST; the loop is single-writer. */
  async submitFeedback(): Promise<FeedbackResponse | null> {
    if (!this.canSubmitFeedback()) {
      return null;
    }
    this.pendingFeedback = true;
    this.lastError = null;
    try {
      const response = await this.api.postFeedback({
        text: this.draft.comment.trim() || null,
        score: this.draft.score,
      });
      this.applyFeedback(response);
      await this.refresh();
      this.draft = { score: null, comment: "" };
      return response;
    } catch (error) {
      this.lastError = error as ApiError;
      return null;
    } finally {
      this.pendingFeedback = false;
    }
  }

  private applyFeedback(response: FeedbackResponse): void {
    this.summary = {
      satisfaction: response.satisfaction,
      counter: response.counter,
      ftCount: response.ft_count,
      iteration: response.iteration,
      modelId: response.model_id,
    };
    if (response.action === "finetuned") {
      this.finetuneEvents.push({
        iteration: response.iteration,
        modelId: response.model_id,
      });
    }
  }

  /** Pull the latest snapshot and trace; a failure flips the stale flag but
   * keeps the last good data on screen. */
  async refresh(): Promise<void> {
    try {
      const [state, report, jobs] = await Promise.all([
        this.api.getLoopState(),
        this.api.getLoopReport(),
        this.api.getFinetuneJobs(),
      ]);
      this.summary = {
        satisfaction: state.satisfaction,
        counter: state.counter,
        ftCount: state.ft_count,
        iteration: state.iteration,
        modelId: state.model_id,
      };
      this.applyReport(report);
      this.jobs = jobs;
      this.stale = false;
    } catch {
      this.stale = true;
    }
  }

  private applyReport(report: LoopReportDto): void {
    this.trace = [...report.satisfaction_trace];
    this.modelChain = [...report.model_chain];
  }
}
