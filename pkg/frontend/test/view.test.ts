import { describe, expect, it } from "vitest";

import { Draft } from "../src/draft";
import type { QudBundle, Task } from "../src/types";
import { renderTask, updateControls } from "../src/view";
import { MemoryStorage, SCHEMA_FIXTURE } from "./helpers";

const TASK: Task = {
  task_id: "task-1", qud_id: "q-1", annotator_id: "a", status: "pending",
  assigned_at: "t0", dual_group: null,
};

function bundle(overrides: Partial<QudBundle> = {}): QudBundle {
  return {
    qud_id: "q-1",
    question: "Why does the curve plateau?",
    answer: "Because entropy stabilizes.",
    qud_type: "cause",
    caption: "Accuracy curves across epochs.",
    title: "A Study",
    abstract: "We study curves.",
    anchor_text: "The model plateaus after ten epochs.",
    image_url: "/asset/abc",
    ...overrides,
  };
}

const noopHandlers = {
  onSelect: () => {},
  onNotes: () => {},
  onSubmit: () => {},
  onSkip: () => {},
};

function mount(b: QudBundle): { root: HTMLElement; draft: Draft } {
  document.body.innerHTML = '<main id="app"></main>';
  const root = document.getElementById("app")!;
  const draft = new Draft(SCHEMA_FIXTURE, TASK.task_id, new MemoryStorage());
  renderTask(root, TASK, b, SCHEMA_FIXTURE, draft, noopHandlers,
             (p) => `http://svc${p}`, "1=salience");
  return { root, draft };
}

describe("task view", () => {
  it("renders every bundle field and all seven dimension groups, unset", () => {
    const { root } = mount(bundle());
    expect(root.querySelector(".paper-title")!.textContent).toBe("A Study");
    expect(root.querySelector(".question")!.textContent).toContain("plateau");
    expect(root.querySelector(".answer")!.textContent).toContain("entropy");
    expect(root.querySelector(".anchor-text")!.textContent).toContain("ten epochs");
    expect(root.querySelector<HTMLImageElement>(".figure-image")!.src)
      .toBe("http://svc/asset/abc");
    expect(root.querySelectorAll(".dimension-group")).toHaveLength(7);
    expect(root.querySelectorAll(".value-button.selected")).toHaveLength(0);
    expect(root.querySelector<HTMLButtonElement>("#submit-button")!.disabled)
      .toBe(true);
  });

  it("shows a placeholder when the image asset is missing, caption intact", () => {
    const { root } = mount(bundle({ image_url: null }));
    expect(root.querySelector(".figure-image")).toBeNull();
    expect(root.querySelector(".figure-missing")).not.toBeNull();
    expect(root.querySelector(".caption")!.textContent)
      .toBe("Accuracy curves across epochs.");
  });

  it("enables submit exactly when the draft completes", () => {
    const { root, draft } = mount(bundle());
    for (const dim of SCHEMA_FIXTURE.dimensions.slice(0, -1)) {
      draft.set(dim.name, dim.values[0]!);
      updateControls(root, draft);
      expect(root.querySelector<HTMLButtonElement>("#submit-button")!.disabled)
        .toBe(true);
    }
    draft.set("q_grammar", "acceptable");
    updateControls(root, draft);
    expect(root.querySelector<HTMLButtonElement>("#submit-button")!.disabled)
      .toBe(false);
  });
});
