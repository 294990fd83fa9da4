import { describe, expect, it } from "vitest";

import { ApiError, SessionApi } from "../src/api.js";
import { failingFetch, scriptedFetch } from "./helpers.js";

describe("SessionApi", () => {
  it("posts the documented shapes", async () => {
    const { fetchFn, requests } = scriptedFetch([
      { path: "/session", body: { session_id: "s1", mode: "mi_all", state: "awaiting_query" } },
      {
        path: "/session/s1/query",
        body: { state: "awaiting_answer", clarifying_question: { id: "q", text: "t?" } },
      },
    ]);
    const api = new SessionApi("http://svc", fetchFn);
    const created = await api.createSession("mi_all");
    expect(created.session_id).toBe("s1");
    await api.sendQuery("s1", "hello");
    expect(requests[0]).toEqual({
      path: "/session",
      method: "POST",
      body: { mode: "mi_all" },
    });
    expect(requests[1].body).toEqual({ text: "hello" });
  });

  it("raises ApiError with the server detail", async () => {
    const { fetchFn } = scriptedFetch([
      { path: "/session/s1/answer", status: 409, body: { detail: "no pending question" } },
    ]);
    const api = new SessionApi("http://svc", fetchFn);
    await expect(api.sendAnswer("s1", "x")).rejects.toThrowError(ApiError);
  });

  it("health returns false when unreachable", async () => {
    const api = new SessionApi("http://svc", failingFetch());
    expect(await api.health()).toBe(false);
  });
});
