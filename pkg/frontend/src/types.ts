// Wire types mirroring the review API. The UI never computes metrics
// itself; every number on screen comes from these payloads.

export interface TaxonomyNode {
  code: string;
  name: string;
  label: string;
  annotatable: boolean;
  aliases: string[];
  children: TaxonomyNode[];
}

export interface TaxonomyTree {
  version: string;
  roots: TaxonomyNode[];
}

export interface PredictedChip {
  code: string;
  label: string;
  score: number;
}

export interface QueueCounts {
  pending: number;
  stale: number;
  done: number;
  skipped: number;
  total: number;
}

export interface TaskView {
  task_id: string;
  doc_id: string;
  idx: number;
  text: string;
  predicted: PredictedChip[];
  model_version: number;
  status: string;
  created_at: number;
  stale: boolean;
  queue?: QueueCounts;
}

export interface VerdictPayload {
  annotator_id: string;
  decisions: Record<string, "correct" | "incorrect">;
  added_concepts: string[];
}

export interface VerdictAck {
  task_id: string;
  status: string;
  derived_labels: string[];
  queue: QueueCounts;
}

export interface MetricSummary {
  mean: number | null;
  sd: number;
}

export interface GroupRow {
  group: string;
  correct: number;
  incorrect: number;
  pct_correct: number | null;
}

export interface ConceptRow {
  code: string;
  label: string;
  tp: number;
  fp: number;
  fn: number;
  tn: number;
  pct_correct: number | null;
}

export interface Snapshot {
  model_version: number;
  batch_id: string;
  coverage: number;
  sentences_judged: number;
  overall: Record<string, MetricSummary>;
  per_concept: ConceptRow[];
  per_group: {
    rows: GroupRow[];
    sum_correct: number;
    sum_incorrect: number;
    overall_pct: number | null;
    group_pct_sd: number;
  };
  per_concept_by_group: Record<string, Record<string, number | null>>;
}

export interface WilcoxonResultWire {
  n_effective: number;
  w_plus: number;
  w_minus: number;
  w: number;
  z: number | null;
  p_value: number;
  method: string;
  w_rounded?: number;
  p_rounded?: number;
  z_rounded?: number;
}

export interface FairnessResponse {
  group_a: string;
  group_b: string;
  n_pairs: number;
  median_a: number;
  median_b: number;
  sd_a: number;
  sd_b: number;
  result: WilcoxonResultWire;
  note: string;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
