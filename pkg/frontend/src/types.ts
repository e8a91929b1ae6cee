// Wire types mirroring the annotation service API. The dimension vocabulary
// is never written down here: it always comes from GET /schema.

export interface DimensionSpec {
  name: string;
  values: string[];
}

export interface Schema {
  schema: string;
  dimensions: DimensionSpec[];
  notes_field: string;
}

export interface Task {
  task_id: string;
  qud_id: string;
  annotator_id: string;
  status: string;
  assigned_at: string;
  dual_group: string | null;
}

export interface QudBundle {
  qud_id: string;
  question: string;
  answer: string | null;
  qud_type: string;
  caption: string;
  title: string;
  abstract: string;
  anchor_text: string;
  image_url: string | null;
}

export interface SubmitReceipt {
  stored: boolean;
  task_id: string;
  qud_id: string;
  offset: number;
}

export type StoredAnnotation = Record<string, string>;
