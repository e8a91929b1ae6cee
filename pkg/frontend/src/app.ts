import { AnnotationApi, ApiRequestError } from "./api";
import { Draft } from "./draft";
import { buildBindings, resolveKey, shortcutLegend, type KeyBinding } from "./keyboard";
import type { QudBundle, Schema, Task } from "./types";
import {
  renderBanner,
  renderDone,
  renderReview,
  renderTask,
  showFieldError,
  updateControls,
} from "./view";

// Single-page queue flow: one active task per session, the server is the
// source of truth, drafts autosave locally and vanish once stored.

export class App {
  private schema: Schema | null = null;
  private bindings: KeyBinding[] = [];
  private task: Task | null = null;
  private bundle: QudBundle | null = null;
  private draft: Draft | null = null;

  constructor(
    private root: HTMLElement,
    private api: AnnotationApi,
    private storage: Storage | null = null,
  ) {}

  async start(): Promise<void> {
    try {
      this.schema = await this.api.schema();
      this.bindings = buildBindings(this.schema);
    } catch (error) {
      this.networkError(error, () => void this.start());
      return;
    }
    document.addEventListener("keydown", (event) => this.onKey(event));
    window.addEventListener("hashchange", () => void this.route());
    await this.route();
  }

  private async route(): Promise<void> {
    if (window.location.hash === "#review") {
      await this.showReview();
    } else {
      await this.loadNext();
    }
  }

  async loadNext(): Promise<void> {
    if (!this.schema) return;
    try {
      this.task = await this.api.nextTask();
      if (this.task === null) {
        this.bundle = null;
        this.draft = null;
        renderDone(this.root);
        return;
      }
      this.bundle = await this.api.qud(this.task.qud_id);
      this.draft = Draft.restore(this.schema, this.task.task_id, this.storage);
      this.renderCurrent();
    } catch (error) {
      this.networkError(error, () => void this.loadNext());
    }
  }

  private renderCurrent(): void {
    if (!this.schema || !this.task || !this.bundle || !this.draft) return;
    renderTask(
      this.root, this.task, this.bundle, this.schema, this.draft,
      {
        onSelect: (dimension, value) => this.select(dimension, value),
        onNotes: (notes) => this.draft?.setNotes(notes),
        onSubmit: () => void this.submit(),
        onSkip: () => void this.skip(),
      },
      (path) => this.api.assetUrl(path),
      shortcutLegend(this.bindings),
    );
  }

  select(dimension: string, value: string): void {
    if (!this.draft) return;
    this.draft.set(dimension, value);
    updateControls(this.root, this.draft);
  }

  async submit(): Promise<void> {
    if (!this.task || !this.draft) return;
    if (!this.draft.isComplete()) {
      showFieldError(this.root, `missing: ${this.draft.missing().join(", ")}`);
      return;
    }
    try {
      await this.api.submit(this.task.task_id, this.draft.payload());
    } catch (error) {
      if (error instanceof ApiRequestError) {
        // validation or state conflict: surface it, keep the draft intact
        showFieldError(this.root, `${error.errorType}: ${error.detail}`);
        return;
      }
      this.networkError(error, () => void this.submit());
      return;
    }
    this.draft.clear();
    this.task = null;
    await this.loadNext();
  }

  async skip(): Promise<void> {
    if (!this.task) return;
    try {
      await this.api.skip(this.task.task_id);
    } catch (error) {
      if (error instanceof ApiRequestError) {
        showFieldError(this.root, `${error.errorType}: ${error.detail}`);
        return;
      }
      this.networkError(error, () => void this.skip());
      return;
    }
    this.draft?.clear();
    this.task = null;
    await this.loadNext();
  }

  private async showReview(): Promise<void> {
    try {
      const annotations = await this.api.myAnnotations();
      renderReview(this.root, annotations, () => {
        window.location.hash = "";
      });
    } catch (error) {
      this.networkError(error, () => void this.showReview());
    }
  }

  private onKey(event: KeyboardEvent): void {
    if (event.target instanceof HTMLTextAreaElement
        || event.target instanceof HTMLInputElement) {
      return;
    }
    if (event.key === "Enter") {
      event.preventDefault();
      void this.submit();
      return;
    }
    if (!this.draft) return;
    const action = resolveKey(this.bindings, event.key, this.draft.selections);
    if (action) {
      event.preventDefault();
      this.select(action.dimension, action.value);
    }
  }

  private networkError(error: unknown, retry: () => void): void {
    const message = error instanceof Error ? error.message : String(error);
    renderBanner(this.root, `request failed: ${message}`, retry);
  }
}
