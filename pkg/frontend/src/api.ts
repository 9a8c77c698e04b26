// Typed wrappers around the four JSON routes the UI is allowed to touch.
// The server is the source of truth; nothing here caches or transforms.

export interface QuestionPayload {
  record_id: string;
  image_id: string;
  image_url: string;
  width: number;
  height: number;
  region: [number, number, number, number]; // x_tl, y_tl, x_br, y_br
  question: string;
  tokens: string[];
  target_word: string;
  mode: string;
  remaining: number;
}

export interface Stats {
  total: number;
  answered: number;
  no_answer: number;
  successful: number;
}

/** Exactly one of answer / no_answer; the form layer enforces it. */
export interface AnswerSubmission {
  record_id: string;
  answer?: string;
  no_answer?: boolean;
  rating: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

async function toApiError(res: Response): Promise<ApiError> {
  let code = 'http-error';
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (body && typeof body.error === 'string') code = body.error;
    if (body && typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(res.status, code, detail);
}

export class Client {
  constructor(private readonly base = '') {}

  /** Next unanswered question, or null when the queue is drained (204). */
  async next(): Promise<QuestionPayload | null> {
    const res = await fetch(`${this.base}/api/next`);
    if (res.status === 204) return null;
    if (!res.ok) throw await toApiError(res);
    return (await res.json()) as QuestionPayload;
  }

  async submit(form: AnswerSubmission): Promise<void> {
    const res = await fetch(`${this.base}/api/answer`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(form),
    });
    if (!res.ok) throw await toApiError(res);
  }

  async stats(): Promise<Stats> {
    const res = await fetch(`${this.base}/api/stats`);
    if (!res.ok) throw await toApiError(res);
    return (await res.json()) as Stats;
  }

  imageUrl(question: QuestionPayload): string {
    return `${this.base}${question.image_url}`;
  }
}
