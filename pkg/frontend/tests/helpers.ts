// Scripted fetch: each test declares the exact server responses in order,
// so the assertions check that the UI is a pure render of those responses.

import type { FetchLike } from "../src/api.js";

export interface ScriptedCall {
  path: string;
  status?: number;
  body: unknown;
}

export interface RecordedRequest {
  path: string;
  method: string;
  body: unknown;
}

export function scriptedFetch(script: ScriptedCall[]): {
  fetchFn: FetchLike;
  requests: RecordedRequest[];
} {
  const queue = [...script];
  const requests: RecordedRequest[] = [];
  const fetchFn: FetchLike = async (input, init) => {
    const next = queue.shift();
    if (!next) {
      throw new Error(`unexpected request to ${input}`);
    }
    const path = input.replace(/^https?:\/\/[^/]+/, "");
    if (path !== next.path) {
      throw new Error(`expected request to ${next.path}, got ${path}`);
    }
    requests.push({
      path,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : null,
    });
    return new Response(JSON.stringify(next.body), {
      status: next.status ?? 200,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetchFn, requests };
}

export function failingFetch(message = "service unreachable"): FetchLike {
  return async () => {
    throw new Error(message);
  };
}
