// Thin typed client for the session API. The fetch implementation is
// injectable so tests can script server behaviour.

import type {
  CreateSessionResponse,
  Mode,
  QueryResponse,
  ResultResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the generic message
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class SessionApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    }).then((response) => parseOrThrow<T>(response));
  }

  createSession(mode: Mode): Promise<CreateSessionResponse> {
    return this.post<CreateSessionResponse>("/session", { mode });
  }

  sendQuery(sessionId: string, text: string): Promise<QueryResponse> {
    return this.post<QueryResponse>(`/session/${sessionId}/query`, { text });
  }

  sendAnswer(sessionId: string, text: string): Promise<ResultResponse> {
    return this.post<ResultResponse>(`/session/${sessionId}/answer`, { text });
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchFn(`${this.baseUrl}/healthz`);
      return response.ok;
    } catch {
      return false;
    }
  }
}
