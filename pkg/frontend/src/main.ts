import { RankingApi } from "./api.js";
import { AnnotationController } from "./controller.js";

const ANNOTATOR_KEY = "empathykit.annotator_id";

declare global {
  interface Window {
    EMPATHYKIT_API_BASE?: string;
  }
}

function apiBase(): string {
  return window.EMPATHYKIT_API_BASE ?? "";
}

function startAnnotation(root: HTMLElement, annotatorId: string): void {
  const controller = new AnnotationController(new RankingApi(apiBase()), annotatorId, root);
  void controller.start();
}

function renderLogin(root: HTMLElement): void {
  root.textContent = "";
  const doc = root.ownerDocument;
  const form = doc.createElement("form");
  form.className = "login";
  const label = doc.createElement("label");
  label.textContent = "你的标注编号：";
  const input = doc.createElement("input");
  input.name = "annotator";
  input.required = true;
  label.appendChild(input);
  const button = doc.createElement("button");
  button.type = "submit";
  button.textContent = "开始标注";
  form.append(label, button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const value = input.value.trim();
    if (!value) {
      return;
    }
    window.localStorage.setItem(ANNOTATOR_KEY, value);
    startAnnotation(root, value);
  });
  root.appendChild(form);
}

export function boot(doc: Document = document): void {
  const root = doc.getElementById("app");
  if (!root) {
    throw new Error("missing #app root element");
  }
  const stored = window.localStorage.getItem(ANNOTATOR_KEY);
  if (stored) {
    startAnnotation(root, stored);
  } else {
    renderLogin(root);
  }
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", () => boot());
}
