/** Wire types of the gateway API the console consumes. */

export interface Finding {
  defect_type: string;
  location_phrase: string;
  severity_phrase: string;
}

export interface Usage {
  prompt_tokens: number;
  completion_tokens: number;
  total_tokens: number;
  latency_ms: number;
}

export interface InferRequest {
  text?: string | null;
  image_refs?: string[];
  video_ref?: string | null;
  intent: "analyze" | "generate";
}

export interface InferResponse {
  report_markdown: string;
  findings: Finding[];
  media: string[];
  usage: Usage;
  warnings: string[];
}

export interface FeedbackRequest {
  text?: string | null;
  score?: number | null;
}

export type LoopAction = "none" | "system_updated" | "finetuned";

export interface FeedbackResponse {
  action: LoopAction;
  kind: string;
  satisfaction: number;
  ft_count: number;
  counter: number;
  iteration: number;
  model_id: string;
}

export interface LoopStateDto {
  iteration: number;
  counter: number;
  satisfaction: number;
  model_id: string;
  ft_count: number;
  model_chain: string[];
  instruction: string;
  sm: { text: string; version: number; history: string[] };
}

export interface LoopReportDto {
  iterations: number;
  ft_count: number;
  satisfaction_trace: number[];
  actions: LoopAction[];
  model_chain: string[];
}

export interface FinetuneJobDto {
  job_id: string;
  base_model_id: string;
  dataset_ref: string;
  status: "queued" | "running" | "succeeded" | "failed";
  result_model_id: string | null;
  error: string | null;
}
