import type { Schema } from "./types";

// Digit shortcuts derived from the schema, never hand-written: key "1" cycles
// the first dimension's values, "2" the second, and so on. Binary dimensions
// therefore toggle with a single key, which is what a 700-item shift needs.

export interface KeyAction {
  dimension: string;
  value: string;
}

export interface KeyBinding {
  key: string;
  dimension: string;
  values: string[];
}

export function buildBindings(schema: Schema): KeyBinding[] {
  return schema.dimensions.map((dimension, index) => ({
    key: String(index + 1),
    dimension: dimension.name,
    values: dimension.values,
  }));
}

/** Next value for the bound dimension, cycling from the current selection. */
export function resolveKey(
  bindings: KeyBinding[],
  key: string,
  current: Record<string, string>,
): KeyAction | null {
  const binding = bindings.find((b) => b.key === key);
  if (!binding) {
    return null;
  }
  const selected = current[binding.dimension];
  const index = selected === undefined ? -1 : binding.values.indexOf(selected);
  const value = binding.values[(index + 1) % binding.values.length];
  return value === undefined ? null : { dimension: binding.dimension, value };
}

export function shortcutLegend(bindings: KeyBinding[]): string {
  return bindings.map((b) => `${b.key}=${b.dimension.replace(/_/g, " ")}`).join("  ");
}
