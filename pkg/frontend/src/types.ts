export interface Candidate {
  slot: string;
  text: string;
}

export interface Progress {
  done: number;
  total: number;
}

export interface TaskView {
  task_id: string;
  sample_id: string;
  question_text: string;
  candidates: Candidate[];
  progress: Progress;
}

export type NextTaskResult =
  | { kind: "task"; task: TaskView }
  | { kind: "done"; progress?: Progress }
  | { kind: "error"; message: string };

export interface SubmitPayload {
  task_id: string;
  annotator_id: string;
  ordering: string[];
}

export type SubmitResult =
  | { kind: "recorded" }
  | { kind: "duplicate" }
  | { kind: "invalid"; message: string }
  | { kind: "error"; message: string };

export interface ModelReportEntry {
  win_at: Record<string, number>;
  mean_rank: number;
  n_rankings: number;
}

export interface AggregateReport {
  k_values: number[];
  models: Record<string, ModelReportEntry>;
}
