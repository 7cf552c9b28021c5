import type { RankingApi } from "./api.js";
import { RankingDraft } from "./draft.js";
import { renderApp, type UiHandlers, type UiState } from "./ui.js";

/** Drives the annotation loop: fetch next task, edit a draft, submit, repeat.
 * A duplicate (409) skips forward with a notice; a validation error keeps the
 * draft so nothing the annotator entered is lost. */
export class AnnotationController {
  private state: UiState = { phase: "loading" };

  constructor(
    private readonly api: RankingApi,
    private readonly annotatorId: string,
    private readonly root: HTMLElement,
  ) {}

  get currentState(): UiState {
    return this.state;
  }

  private readonly handlers: UiHandlers = {
    onRank: (slot) => this.withDraft((draft) => draft.rank(slot)),
    onUnrank: (slot) => this.withDraft((draft) => draft.unrank(slot)),
    onMoveUp: (slot) => this.withDraft((draft) => draft.moveUp(slot)),
    onMoveDown: (slot) => this.withDraft((draft) => draft.moveDown(slot)),
    onDropAt: (slot, index) => this.withDraft((draft) => draft.moveTo(slot, index)),
    onSubmit: () => {
      void this.submit();
    },
    onRetry: () => {
      void this.loadNext();
    },
  };

  private withDraft(mutate: (draft: RankingDraft) => void): void {
    if (this.state.phase !== "task") {
      return;
    }
    mutate(this.state.draft);
    this.state = { ...this.state, notice: undefined };
    this.render();
  }

  private setState(state: UiState): void {
    this.state = state;
    this.render();
  }

  private render(): void {
    renderApp(this.root, this.state, this.handlers);
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  async loadNext(notice?: string): Promise<void> {
    this.setState({ phase: "loading" });
    const result = await this.api.loadNextTask(this.annotatorId);
    if (result.kind === "error") {
      this.setState({ phase: "error", message: result.message });
      return;
    }
    if (result.kind === "done") {
      this.setState({ phase: "done", progress: result.progress });
      return;
    }
    const draft = new RankingDraft(result.task.candidates.map((c) => c.slot));
    this.setState({ phase: "task", task: result.task, draft, notice });
  }

  async submit(): Promise<void> {
    if (this.state.phase !== "task" || !this.state.draft.isComplete()) {
      return;
    }
    const { task, draft } = this.state;
    this.setState({ ...this.state, submitting: true });
    const result = await this.api.submitRanking({
      task_id: task.task_id,
      annotator_id: this.annotatorId,
      ordering: draft.ordering,
    });
    switch (result.kind) {
      case "recorded":
        await this.loadNext();
        return;
      case "duplicate":
        await this.loadNext("上一个任务已有你的排序，已跳过。");
        return;
      case "invalid":
        this.setState({ ...this.state, submitting: false, notice: `提交无效：${result.message}` });
        return;
      case "error":
        this.setState({ ...this.state, submitting: false, notice: `提交失败：${result.message}` });
        return;
    }
  }
}
