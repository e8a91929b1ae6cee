import type { Schema } from "../src/types";

// Mirrors the shape of GET /schema; the integration test asserts the live
// service publishes exactly this structure.
export const SCHEMA_FIXTURE: Schema = {
  schema: "mqud/1",
  dimensions: [
    { name: "salience", values: ["salient", "not_salient"] },
    { name: "figure_useful", values: ["useful", "not_useful"] },
    { name: "answered_by_figure", values: ["yes", "no"] },
    { name: "answer_correct", values: ["acceptable", "not_acceptable"] },
    { name: "answer_quality", values: ["high", "low"] },
    { name: "figure_type", values: ["result", "data", "method", "comparison", "other"] },
    { name: "q_grammar", values: ["acceptable", "not_acceptable"] },
  ],
  notes_field: "notes",
};

export class MemoryStorage implements Storage {
  private data = new Map<string, string>();

  get length(): number {
    return this.data.size;
  }

  clear(): void {
    this.data.clear();
  }

  getItem(key: string): string | null {
    return this.data.get(key) ?? null;
  }

  key(index: number): string | null {
    return [...this.data.keys()][index] ?? null;
  }

  removeItem(key: string): void {
    this.data.delete(key);
  }

  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }
}

export async function waitFor(
  check: () => boolean | Promise<boolean>,
  timeoutMs = 20_000,
  stepMs = 50,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (await check()) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, stepMs));
  }
  throw new Error("waitFor timed out");
}
