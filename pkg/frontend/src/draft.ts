import type { Schema } from "./types";

// Local judgment draft for one task: validated against the published schema,
// autosaved so a reload never loses selections, wiped on successful submit.

const storageKey = (taskId: string) => `mqud-draft-${taskId}`;

export class Draft {
  selections: Record<string, string> = {};
  notes = "";

  constructor(
    private schema: Schema,
    public taskId: string,
    private storage: Storage | null = defaultStorage(),
  ) {}

  set(dimension: string, value: string): void {
    const spec = this.schema.dimensions.find((d) => d.name === dimension);
    if (!spec) {
      throw new Error(`unknown dimension ${dimension}`);
    }
    if (!spec.values.includes(value)) {
      throw new Error(`${value} is not a ${dimension} value`);
    }
    this.selections[dimension] = value;
    this.save();
  }

  setNotes(notes: string): void {
    this.notes = notes;
    this.save();
  }

  get(dimension: string): string | undefined {
    return this.selections[dimension];
  }

  /** Submit is legal only when every dimension has a selection. */
  isComplete(): boolean {
    return this.schema.dimensions.every((d) => this.selections[d.name] !== undefined);
  }

  missing(): string[] {
    return this.schema.dimensions
      .map((d) => d.name)
      .filter((name) => this.selections[name] === undefined);
  }

  payload(): Record<string, string> {
    return { ...this.selections, notes: this.notes };
  }

  save(): void {
    this.storage?.setItem(
      storageKey(this.taskId),
      JSON.stringify({ selections: this.selections, notes: this.notes }),
    );
  }

  /** Drop both the in-memory and the persisted copy (after a submit). */
  clear(): void {
    this.selections = {};
    this.notes = "";
    this.storage?.removeItem(storageKey(this.taskId));
  }

  static restore(schema: Schema, taskId: string,
                 storage: Storage | null = defaultStorage()): Draft {
    const draft = new Draft(schema, taskId, storage);
    const raw = storage?.getItem(storageKey(taskId));
    if (!raw) {
      return draft;
    }
    try {
      const saved = JSON.parse(raw) as { selections?: Record<string, string>; notes?: string };
      for (const [dimension, value] of Object.entries(saved.selections ?? {})) {
        const spec = schema.dimensions.find((d) => d.name === dimension);
        if (spec?.values.includes(value)) {
          draft.selections[dimension] = value;
        }
      }
      draft.notes = saved.notes ?? "";
    } catch {
      // corrupt autosave: start clean rather than blocking the queue
    }
    return draft;
  }
}

function defaultStorage(): Storage | null {
  try {
    return typeof localStorage === "undefined" ? null : localStorage;
  } catch {
    return null;
  }
}
