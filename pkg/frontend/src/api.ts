import type {
  FeedbackRequest,
  FeedbackResponse,
  FinetuneJobDto,
  InferRequest,
  InferResponse,
  LoopReportDto,
  LoopStateDto,
} from "./types.js";

/** Error payload shape the gateway returns for every failure. */
export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public detail: unknown = null,
    public status: number = 0,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The slice of the API the view-model needs; faked in tests. */
export interface GatewayApi {
  postInfer(request: InferRequest): Promise<InferResponse>;
  postFeedback(request: FeedbackRequest): Promise<FeedbackResponse>;
  getLoopState(): Promise<LoopStateDto>;
  getLoopReport(): Promise<LoopReportDto>;
  getFinetuneJobs(): Promise<FinetuneJobDto[]>;
}

function requestId(): string {
  if (typeof crypto !== "undefined" && "randomUUID" in crypto) {
    return crypto.randomUUID();
  }
  return `req-${Date.now()}-${Math.floor(Math.random() * 1e9)}`;
}

export class ApiClient implements GatewayApi {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, init);
    } catch (error) {
      throw new ApiError("transport", `cannot reach the gateway: ${String(error)}`);
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (!response.ok) {
      const payload = (body ?? {}) as { code?: string; message?: string; detail?: unknown };
      throw new ApiError(
        payload.code ?? "internal",
        payload.message ?? response.statusText,
        payload.detail ?? null,
        response.status,
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        "X-Request-Id": requestId(),
      },
      body: JSON.stringify(payload),
    });
  }

  postInfer(request: InferRequest): Promise<InferResponse> {
    return this.post("/api/infer", request);
  }

  postFeedback(request: FeedbackRequest): Promise<FeedbackResponse> {
    return this.post("/api/feedback", request);
  }

  getLoopState(): Promise<LoopStateDto> {
    return this.request("/api/loop/state");
  }

  getLoopReport(): Promise<LoopReportDto> {
    return this.request("/api/loop/report");
  }

  async getFinetuneJobs(): Promise<FinetuneJobDto[]> {
    const body = await this.request<{ jobs: FinetuneJobDto[] }>("/api/finetune/jobs");
    return body.jobs;
  }
}
