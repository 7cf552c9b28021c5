import { describe, expect, it } from "vitest";

import { RankingApi } from "../src/api.js";
import type { FetchLike } from "../src/api.js";

interface Call {
  url: string;
  init?: RequestInit;
}

function stubFetch(responder: (url: string, init?: RequestInit) => Response): {
  fetchFn: FetchLike;
  calls: Call[];
} {
  const calls: Call[] = [];
  return {
    calls,
    fetchFn: async (url, init) => {
      calls.push({ url, init });
      return responder(url, init);
    },
  };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

const TASK = {
  task_id: "task-s1",
  sample_id: "s1",
  question_text: "最近很累",
  candidates: [
    { slot: "A", text: "回复甲" },
    { slot: "B", text: "回复乙" },
  ],
  progress: { done: 0, total: 2 },
};

describe("RankingApi.loadNextTask", () => {
  it("returns the task payload on 200", async () => {
    const { fetchFn, calls } = stubFetch(() => jsonResponse(200, TASK));
    const api = new RankingApi("http://svc", fetchFn);
    const result = await api.loadNextTask("ann 1");
    expect(result).toEqual({ kind: "task", task: TASK });
    expect(calls[0].url).toBe("http://svc/api/tasks/next?annotator=ann%201");
  });

  it("maps 404 to the done state", async () => {
    const { fetchFn } = stubFetch(() =>
      jsonResponse(404, { detail: "no tasks remaining", progress: { done: 2, total: 2 } }),
    );
    const api = new RankingApi("http://svc", fetchFn);
    expect(await api.loadNextTask("a")).toEqual({
      kind: "done",
      progress: { done: 2, total: 2 },
    });
  });

  it("maps network failure to an error result", async () => {
    const api = new RankingApi("http://svc", async () => {
      throw new Error("connection refused");
    });
    const result = await api.loadNextTask("a");
    expect(result.kind).toBe("error");
  });

  it("rejects an empty annotator id client-side", async () => {
    const { fetchFn, calls } = stubFetch(() => jsonResponse(200, TASK));
    const api = new RankingApi("http://svc", fetchFn);
    expect((await api.loadNextTask("")).kind).toBe("error");
    expect(calls).toHaveLength(0);
  });
});

describe("RankingApi.submitRanking", () => {
  const payload = { task_id: "task-s1", annotator_id: "a", ordering: ["B", "A"] };

  it("sends exactly the slot-label payload and maps 201", async () => {
    const { fetchFn, calls } = stubFetch(() => jsonResponse(201, { status: "recorded" }));
    const api = new RankingApi("http://svc", fetchFn);
    expect(await api.submitRanking(payload)).toEqual({ kind: "recorded" });
    expect(calls[0].url).toBe("http://svc/api/rankings");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual(payload);
  });

  it("maps 409 to duplicate", async () => {
    const { fetchFn } = stubFetch(() => jsonResponse(409, { detail: "already ranked" }));
    const api = new RankingApi("http://svc", fetchFn);
    expect(await api.submitRanking(payload)).toEqual({ kind: "duplicate" });
  });

  it("maps 400 to invalid with the server message", async () => {
    const { fetchFn } = stubFetch(() => jsonResponse(400, { detail: "bad permutation" }));
    const api = new RankingApi("http://svc", fetchFn);
    expect(await api.submitRanking(payload)).toEqual({
      kind: "invalid",
      message: "bad permutation",
    });
  });

  it("maps other failures to error", async () => {
    const { fetchFn } = stubFetch(() => jsonResponse(500, { detail: "boom" }));
    const api = new RankingApi("http://svc", fetchFn);
    expect((await api.submitRanking(payload)).kind).toBe("error");
  });
});

describe("RankingApi.fetchReport", () => {
  it("passes the k list through", async () => {
    const { fetchFn, calls } = stubFetch(() =>
      jsonResponse(200, { k_values: [1, 2], models: {} }),
    );
    const api = new RankingApi("http://svc", fetchFn);
    await api.fetchReport([1, 2]);
    expect(calls[0].url).toBe("http://svc/api/report?k=1,2");
  });
});
