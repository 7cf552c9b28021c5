import type { AggregateReport, NextTaskResult, SubmitPayload, SubmitResult, TaskView } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Typed client for the ranking service. Outbound payloads carry slot labels
 * only; model identities never reach the browser. */
export class RankingApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async loadNextTask(annotatorId: string): Promise<NextTaskResult> {
    if (!annotatorId) {
      return { kind: "error", message: "annotator id must be nonempty" };
    }
    let response: Response;
    try {
      response = await this.fetchFn(
        `${this.baseUrl}/api/tasks/next?annotator=${encodeURIComponent(annotatorId)}`,
      );
    } catch (err) {
      return { kind: "error", message: String(err) };
    }
    if (response.status === 404) {
      const body = await response.json().catch(() => ({}));
      return { kind: "done", progress: body.progress };
    }
    if (!response.ok) {
      return { kind: "error", message: `unexpected status ${response.status}` };
    }
    const task = (await response.json()) as TaskView;
    return { kind: "task", task };
  }

  async submitRanking(payload: SubmitPayload): Promise<SubmitResult> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}/api/rankings`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      });
    } catch (err) {
      return { kind: "error", message: String(err) };
    }
    if (response.status === 201) {
      return { kind: "recorded" };
    }
    if (response.status === 409) {
      return { kind: "duplicate" };
    }
    const body = await response.json().catch(() => ({ detail: `status ${response.status}` }));
    if (response.status === 400) {
      return { kind: "invalid", message: String(body.detail ?? "malformed submission") };
    }
    return { kind: "error", message: String(body.detail ?? `status ${response.status}`) };
  }

  async fetchReport(kValues: number[] = [1, 2]): Promise<AggregateReport> {
    const response = await this.fetchFn(`${this.baseUrl}/api/report?k=${kValues.join(",")}`);
    if (!response.ok) {
      throw new Error(`report request failed with status ${response.status}`);
    }
    return (await response.json()) as AggregateReport;
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchFn(`${this.baseUrl}/api/health`);
      return response.ok;
    } catch {
      return false;
    }
  }
}
