import { RankingDraft } from "./draft.js";
import type { Progress, TaskView } from "./types.js";

/** The four guidance aspects shown to every annotator as static rubric text. */
export const RUBRIC_ASPECTS: ReadonlyArray<{ name: string; hint: string }> = [
  { name: "Fluency", hint: "语言自然连贯，不啰嗦" },
  { name: "Identification", hint: "准确识别求助者的核心困扰与情绪" },
  { name: "Comforting", hint: "真诚、不套话的安抚，营造安全氛围" },
  { name: "Suggestion", hint: "切实可行、有建设性的建议" },
];

export interface UiHandlers {
  onRank(slot: string): void;
  onUnrank(slot: string): void;
  onMoveUp(slot: string): void;
  onMoveDown(slot: string): void;
  onDropAt(slot: string, index: number): void;
  onSubmit(): void;
  onRetry(): void;
}

export type UiState =
  | { phase: "loading" }
  | { phase: "error"; message: string }
  | { phase: "done"; progress?: Progress }
  | { phase: "task"; task: TaskView; draft: RankingDraft; notice?: string; submitting?: boolean };

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function renderRubric(doc: Document): HTMLElement {
  const panel = el(doc, "aside", "rubric");
  panel.dataset.testid = "rubric";
  panel.appendChild(el(doc, "h2", undefined, "评价维度"));
  const list = el(doc, "ul");
  for (const aspect of RUBRIC_ASPECTS) {
    const item = el(doc, "li");
    item.appendChild(el(doc, "strong", undefined, aspect.name));
    item.appendChild(doc.createTextNode(` — ${aspect.hint}`));
    list.appendChild(item);
  }
  panel.appendChild(list);
  panel.appendChild(
    el(doc, "p", "rubric-note", "请综合以上四个方面，对所有候选回复给出一个整体排序。"),
  );
  return panel;
}

function candidateCard(doc: Document, task: TaskView, slot: string): HTMLElement {
  const candidate = task.candidates.find((c) => c.slot === slot);
  const card = el(doc, "article", "candidate-card");
  card.dataset.slot = slot;
  card.draggable = true;
  card.addEventListener("dragstart", (event) => {
    (event as DragEvent).dataTransfer?.setData("text/plain", slot);
  });
  const header = el(doc, "header");
  header.appendChild(el(doc, "span", "slot-label", `回复 ${slot}`));
  card.appendChild(header);
  card.appendChild(el(doc, "p", "candidate-text", candidate ? candidate.text : ""));
  return card;
}

function renderPool(
  doc: Document,
  task: TaskView,
  draft: RankingDraft,
  handlers: UiHandlers,
): HTMLElement {
  const pool = el(doc, "section", "pool");
  pool.dataset.testid = "pool";
  pool.appendChild(el(doc, "h2", undefined, "待排序的回复"));
  for (const slot of draft.unranked) {
    const card = candidateCard(doc, task, slot);
    const add = el(doc, "button", "rank-button", "加入排序");
    add.type = "button";
    add.dataset.action = "rank";
    add.dataset.slot = slot;
    add.addEventListener("click", () => handlers.onRank(slot));
    card.appendChild(add);
    pool.appendChild(card);
  }
  return pool;
}

function renderRanked(doc: Document, draft: RankingDraft, handlers: UiHandlers): HTMLElement {
  const section = el(doc, "section", "ranked");
  section.dataset.testid = "ranked";
  section.appendChild(el(doc, "h2", undefined, "当前排序（最好的排最前）"));
  const list = el(doc, "ol", "ranked-list");
  list.addEventListener("dragover", (event) => event.preventDefault());
  list.addEventListener("drop", (event) => {
    const dragged = (event as DragEvent).dataTransfer?.getData("text/plain");
    if (dragged) {
      event.preventDefault();
      handlers.onDropAt(dragged, draft.ordering.length);
    }
  });
  draft.ordering.forEach((slot, index) => {
    const item = el(doc, "li", "ranked-item");
    item.dataset.slot = slot;
    item.draggable = true;
    item.addEventListener("dragstart", (event) => {
      (event as DragEvent).dataTransfer?.setData("text/plain", slot);
    });
    item.addEventListener("dragover", (event) => event.preventDefault());
    item.addEventListener("drop", (event) => {
      const dragged = (event as DragEvent).dataTransfer?.getData("text/plain");
      if (dragged && dragged !== slot) {
        event.preventDefault();
        event.stopPropagation();
        handlers.onDropAt(dragged, index);
      }
    });
    item.appendChild(el(doc, "span", "rank-position", String(index + 1)));
    item.appendChild(el(doc, "span", "slot-label", `回复 ${slot}`));
    const controls = el(doc, "span", "controls");
    const up = el(doc, "button", undefined, "↑");
    up.type = "button";
    up.dataset.action = "up";
    up.dataset.slot = slot;
    up.addEventListener("click", () => handlers.onMoveUp(slot));
    const down = el(doc, "button", undefined, "↓");
    down.type = "button";
    down.dataset.action = "down";
    down.dataset.slot = slot;
    down.addEventListener("click", () => handlers.onMoveDown(slot));
    const remove = el(doc, "button", undefined, "移除");
    remove.type = "button";
    remove.dataset.action = "unrank";
    remove.dataset.slot = slot;
    remove.addEventListener("click", () => handlers.onUnrank(slot));
    controls.append(up, down, remove);
    item.appendChild(controls);
    list.appendChild(item);
  });
  section.appendChild(list);
  return section;
}

export function renderApp(root: HTMLElement, state: UiState, handlers: UiHandlers): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  if (state.phase === "loading") {
    const note = el(doc, "p", "status", "正在加载任务…");
    note.dataset.testid = "loading";
    root.appendChild(note);
    return;
  }

  if (state.phase === "error") {
    const panel = el(doc, "div", "error-panel");
    panel.dataset.testid = "error";
    panel.appendChild(el(doc, "p", undefined, `加载失败：${state.message}`));
    const retry = el(doc, "button", undefined, "重试");
    retry.type = "button";
    retry.dataset.action = "retry";
    retry.addEventListener("click", () => handlers.onRetry());
    panel.appendChild(retry);
    root.appendChild(panel);
    return;
  }

  if (state.phase === "done") {
    const panel = el(doc, "div", "done-panel");
    panel.dataset.testid = "done";
    panel.appendChild(el(doc, "h2", undefined, "所有任务已完成"));
    panel.appendChild(el(doc, "p", undefined, "感谢你的参与！"));
    root.appendChild(panel);
    return;
  }

  const { task, draft } = state;
  const header = el(doc, "header", "task-header");
  header.appendChild(el(doc, "h1", undefined, "回复质量排序"));
  const progress = el(
    doc,
    "p",
    "progress",
    `进度：${task.progress.done} / ${task.progress.total}`,
  );
  progress.dataset.testid = "progress";
  header.appendChild(progress);
  root.appendChild(header);

  const question = el(doc, "section", "question");
  question.dataset.testid = "question";
  question.appendChild(el(doc, "h2", undefined, "求助内容"));
  question.appendChild(el(doc, "p", undefined, task.question_text));
  root.appendChild(question);

  root.appendChild(renderRubric(doc));
  root.appendChild(renderPool(doc, task, draft, handlers));
  root.appendChild(renderRanked(doc, draft, handlers));

  const footer = el(doc, "footer", "actions");
  if (state.notice) {
    const notice = el(doc, "p", "notice", state.notice);
    notice.dataset.testid = "notice";
    footer.appendChild(notice);
  }
  const submit = el(doc, "button", "submit-button", "提交排序");
  submit.type = "submit";
  submit.dataset.action = "submit";
  submit.disabled = !draft.isComplete() || Boolean(state.submitting);
  submit.addEventListener("click", () => handlers.onSubmit());
  footer.appendChild(submit);
  root.appendChild(footer);
}
