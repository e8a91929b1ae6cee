import type { Draft } from "./draft";
import type { QudBundle, Schema, StoredAnnotation, Task } from "./types";

// Plain DOM rendering: a reading pane on the left, the judgment panel on the
// right. The panel never scrolls away; the reading pane scrolls on its own.

export interface ViewHandlers {
  onSelect: (dimension: string, value: string) => void;
  onNotes: (notes: string) => void;
  onSubmit: () => void;
  onSkip: () => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderTask(
  root: HTMLElement,
  task: Task,
  bundle: QudBundle,
  schema: Schema,
  draft: Draft,
  handlers: ViewHandlers,
  assetUrl: (path: string) => string,
  legend: string,
): void {
  root.innerHTML = "";
  const layout = el("div", "task-layout");

  const reading = el("section", "reading-pane");
  reading.appendChild(el("h2", "paper-title", bundle.title));
  reading.appendChild(el("p", "abstract", bundle.abstract));

  const figure = el("figure", "figure-box");
  if (bundle.image_url) {
    const img = el("img", "figure-image");
    img.src = assetUrl(bundle.image_url);
    img.alt = bundle.caption;
    figure.appendChild(img);
  } else {
    figure.appendChild(el("div", "figure-missing", "figure image unavailable"));
  }
  figure.appendChild(el("figcaption", "caption", bundle.caption));
  reading.appendChild(figure);

  reading.appendChild(el("h3", undefined, "Question"));
  const question = el("p", "question", bundle.question);
  question.dataset.qudType = bundle.qud_type;
  reading.appendChild(question);
  if (bundle.answer !== null) {
    reading.appendChild(el("h3", undefined, "Generated answer"));
    reading.appendChild(el("p", "answer", bundle.answer));
  }
  reading.appendChild(el("h3", undefined, "Source text"));
  reading.appendChild(el("p", "anchor-text", bundle.anchor_text));

  const panel = el("section", "judgment-panel");
  panel.appendChild(el("h3", undefined, `Task ${task.task_id.slice(0, 8)}`));
  for (const dimension of schema.dimensions) {
    const group = el("div", "dimension-group");
    group.dataset.dimension = dimension.name;
    group.appendChild(el("span", "dimension-label",
                         dimension.name.replace(/_/g, " ")));
    for (const value of dimension.values) {
      const button = el("button", "value-button", value.replace(/_/g, " "));
      button.type = "button";
      button.dataset.dimension = dimension.name;
      button.dataset.value = value;
      button.addEventListener("click", () => handlers.onSelect(dimension.name, value));
      group.appendChild(button);
    }
    panel.appendChild(group);
  }

  const notes = el("textarea", "notes-input") as HTMLTextAreaElement;
  notes.placeholder = "notes (optional)";
  notes.value = draft.notes;
  notes.addEventListener("input", () => handlers.onNotes(notes.value));
  panel.appendChild(notes);

  const actions = el("div", "actions");
  const submit = el("button", "submit-button", "Submit") as HTMLButtonElement;
  submit.type = "button";
  submit.id = "submit-button";
  submit.addEventListener("click", handlers.onSubmit);
  const skip = el("button", "skip-button", "Skip") as HTMLButtonElement;
  skip.type = "button";
  skip.addEventListener("click", handlers.onSkip);
  actions.appendChild(submit);
  actions.appendChild(skip);
  panel.appendChild(actions);
  panel.appendChild(el("p", "shortcut-legend", `keys: ${legend}  Enter=submit`));
  panel.appendChild(el("p", "field-error"));

  layout.appendChild(reading);
  layout.appendChild(panel);
  root.appendChild(layout);
  updateControls(root, draft);
}

/** Reflect the draft: highlight selections, enable submit only when complete. */
export function updateControls(root: HTMLElement, draft: Draft): void {
  for (const button of root.querySelectorAll<HTMLButtonElement>(".value-button")) {
    const { dimension, value } = button.dataset;
    button.classList.toggle(
      "selected",
      dimension !== undefined && draft.get(dimension) === value,
    );
  }
  const submit = root.querySelector<HTMLButtonElement>("#submit-button");
  if (submit) {
    submit.disabled = !draft.isComplete();
    submit.title = draft.isComplete()
      ? "store this judgment"
      : `missing: ${draft.missing().join(", ")}`;
  }
}

export function showFieldError(root: HTMLElement, message: string): void {
  const node = root.querySelector<HTMLElement>(".field-error");
  if (node) node.textContent = message;
}

export function renderBanner(root: HTMLElement, message: string,
                             onRetry: () => void): void {
  const existing = root.querySelector(".retry-banner");
  existing?.remove();
  const banner = el("div", "retry-banner");
  banner.appendChild(el("span", undefined, message));
  const retry = el("button", "retry-button", "Retry");
  retry.type = "button";
  retry.addEventListener("click", () => {
    banner.remove();
    onRetry();
  });
  banner.appendChild(retry);
  root.prepend(banner);
}

export function renderDone(root: HTMLElement): void {
  root.innerHTML = "";
  root.appendChild(el("p", "queue-done",
                      "Queue empty: no pending tasks for this annotator."));
}

export function renderReview(root: HTMLElement, annotations: StoredAnnotation[],
                             onBack: () => void): void {
  root.innerHTML = "";
  const back = el("button", "back-button", "Back to queue");
  back.type = "button";
  back.addEventListener("click", onBack);
  root.appendChild(back);
  root.appendChild(el("h2", undefined, `My submissions (${annotations.length})`));
  const list = el("div", "review-list");
  for (const annotation of annotations) {
    const row = el("div", "review-row");
    row.appendChild(el("code", "review-qud", annotation.qud_id ?? ""));
    const dims = Object.entries(annotation)
      .filter(([k]) => !["schema", "qud_id", "annotator_id", "source", "notes"].includes(k))
      .map(([k, v]) => `${k}=${v}`)
      .join("  ");
    row.appendChild(el("span", "review-dims", dims));
    list.appendChild(row);
  }
  root.appendChild(list);
}
