/** Client-side preview of how the server will classify a feedback draft.
 *
 * Mirrors the gateway's parser exactly (the shared fixture table in
 * fixtures/feedback_kinds.json keeps both sides honest): score and text
 * together are "mixed", score alone is "score", text alone is classified by
 * the polarity lexicon below.
 */

export type FeedbackKind = "positive" | "negative" | "score" | "open_ended" | "mixed";

const POLARITY_LEXICON: Record<string, number> = {
  accurate: 1,
  accurately: 1,
  clear: 1,
  correct: 1,
  correctly: 1,
  detailed: 1,
  excellent: 1,
  good: 1,
  great: 1,
  helpful: 1,
  impressive: 1,
  perfect: 1,
  precise: 1,
  reliable: 1,
  thorough: 1,
  useful: 1,
  well: 1,
  bad: -1,
  confusing: -1,
  error: -1,
  errors: -1,
  fail: -1,
  failed: -1,
  fails: -1,
  inaccurate: -1,
  incorrect: -1,
  irrelevant: -1,
  misses: -1,
  missed: -1,
  poor: -1,
  struggled: -1,
  struggles: -1,
  unable: -1,
  unrealistic: -1,
  useless: -1,
  vague: -1,
  wrong: -1,
};

export function polarityScore(text: string): number {
  const words = text.toLowerCase().match(/[a-z0-9]+/g) ?? [];
  let net = 0;
  for (const word of words) {
    net += POLARITY_LEXICON[word] ?? 0;
  }
  return net;
}

export function deriveKind(text: string | null, score: number | null): FeedbackKind | null {
  const trimmed = text?.trim() ?? "";
  if (!trimmed && score === null) {
    return null;
  }
  if (score !== null && trimmed) {
    return "mixed";
  }
  if (score !== null) {
    return "score";
  }
  const net = polarityScore(trimmed);
  if (net > 0) {
    return "positive";
  }
  if (net < 0) {
    return "negative";
  }
  return "open_ended";
}
