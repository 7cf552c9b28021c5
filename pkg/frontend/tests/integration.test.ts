import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { RankingApi } from "../src/api.js";
import { AnnotationController } from "../src/controller.js";
import type { FetchLike } from "../src/api.js";

const MODELS = ["model-one", "model-two", "model-three", "model-four", "model-five", "model-six"];
const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | undefined;
let assignPath = "";

interface OutboundCall {
  url: string;
  body?: string;
}

const outbound: OutboundCall[] = [];

const recordingFetch: FetchLike = async (url, init) => {
  outbound.push({ url, body: init?.body === undefined ? undefined : String(init.body) });
  return fetch(url, init);
};

async function waitForHealth(api: RankingApi, attempts = 60): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    if (await api.health()) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error("ranking service did not come up");
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "empathykit-ui-"));
  const corpusPath = join(dir, "corpus.jsonl");
  writeFileSync(
    corpusPath,
    JSON.stringify({
      id: "s1",
      title: "最近压力很大",
      description: "工作和家庭都让我喘不过气。",
      topic: "压力",
      answers: [{ text: "参考回答。" }],
    }) + "\n",
  );
  const predArgs: string[] = [];
  MODELS.forEach((model, i) => {
    const path = join(dir, `${model}.jsonl`);
    writeFileSync(path, JSON.stringify({ id: "s1", text: `第${i + 1}号候选回复内容` }) + "\n");
    predArgs.push("--pred", `${model}=${path}`);
  });
  const tasksPath = join(dir, "tasks.jsonl");
  assignPath = join(dir, "assign.jsonl");
  const made = spawnSync(
    "python3",
    [
      "-m", "empathykit.cli", "tasks-make",
      "--in", corpusPath,
      ...predArgs,
      "--out-tasks", tasksPath,
      "--out-assign", assignPath,
      "--seed", "11",
    ],
    { encoding: "utf-8" },
  );
  if (made.status !== 0) {
    throw new Error(`tasks-make failed: ${made.stderr}`);
  }
  server = spawn(
    "python3",
    [
      "-m", "empathykit.cli", "serve",
      "--port", String(PORT),
      "--tasks", tasksPath,
      "--assignments", assignPath,
      "--log", join(dir, "rankings.jsonl"),
    ],
    { stdio: ["ignore", "ignore", "pipe"] },
  );
  await waitForHealth(new RankingApi(BASE));
});

afterAll(() => {
  server?.kill();
});

describe("scripted browser session against the live service", () => {
  it("fetches a 6-candidate task, submits C,A,B,F,D,E and sees it in the report", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    const api = new RankingApi(BASE, recordingFetch);
    const controller = new AnnotationController(api, "annotator-int", root);
    await controller.start();

    const cards = [...root.querySelectorAll('[data-testid="pool"] .candidate-card')];
    expect(cards).toHaveLength(6);
    expect(cards.map((c) => (c as HTMLElement).dataset.slot)).toEqual([
      "A", "B", "C", "D", "E", "F",
    ]);

    const ordering = ["C", "A", "B", "F", "D", "E"];
    for (const slot of ordering) {
      (root.querySelector(`[data-action="rank"][data-slot="${slot}"]`) as HTMLElement).click();
    }
    const submit = root.querySelector('[data-action="submit"]') as HTMLButtonElement;
    expect(submit.disabled).toBe(false);
    await controller.submit();
    expect(root.querySelector('[data-testid="done"]')).toBeTruthy();

    const slotMap: Record<string, string> = JSON.parse(
      readFileSync(assignPath, "utf-8").trim(),
    ).slots;
    const report = await api.fetchReport([1, 2]);
    expect(report.models[slotMap["C"]].win_at["1"]).toBe(100.0);
    expect(report.models[slotMap["C"]].mean_rank).toBe(1.0);
    expect(report.models[slotMap["E"]].mean_rank).toBe(6.0);

    // duplicate resubmission: 409 and the report is unchanged
    const duplicate = await api.submitRanking({
      task_id: "task-s1",
      annotator_id: "annotator-int",
      ordering,
    });
    expect(duplicate).toEqual({ kind: "duplicate" });
    expect(await api.fetchReport([1, 2])).toEqual(report);

    // no outbound payload from the UI ever contains a model name
    expect(outbound.length).toBeGreaterThan(0);
    for (const call of outbound) {
      for (const model of MODELS) {
        expect(call.url).not.toContain(model);
        if (call.body !== undefined) {
          expect(call.body).not.toContain(model);
        }
      }
    }
    // submissions carry slot labels only
    const posts = outbound.filter((c) => c.body !== undefined);
    expect(posts.length).toBeGreaterThan(0);
    for (const post of posts) {
      expect(Object.keys(JSON.parse(String(post.body))).sort()).toEqual([
        "annotator_id", "ordering", "task_id",
      ]);
    }
  });
});
