// DTOs mirroring the workbench HTTP API. The UI only displays what the
// service computes; nothing here re-derives a metric.

export interface RunSummary {
  run_id: string;
  kind: 'ner' | 'recommend' | 'ablation';
  config: Record<string, unknown>;
  status: 'running' | 'complete' | 'failed';
  created_at: string;
  item_count: number;
  judged_count: number;
  pending_count: number;
}

export interface JudgmentState {
  status: 'pending' | 'judged';
  version?: number;
}

export interface ItemSummary {
  item_id: string;
  run_id: string;
  category: string | null;
  judgment_state: JudgmentState;
}

export interface JudgmentRecord {
  version: number;
  answer_correct: boolean;
  entity_exists: boolean;
  reviewer: string;
  judged_at: string;
}

export interface ItemDetail extends ItemSummary {
  source_text: string;
  raw_text: string | null;
  answers: Record<string, string[]> | null;
  llm_answer: string[];
  judgments: JudgmentRecord[];
}

export interface RationalValue {
  numerator: number;
  denominator: number;
}

export interface CategoryEntry {
  category: string;
  count: number;
  pending: number;
  correct: number | null;
  existence: number | null;
  modified_correct: number | null;
  modified_accuracy: RationalValue | null;
  modified_accuracy_pct: string | null;
}

export interface OverallEntry {
  count: number;
  pending: number;
  correct: number;
  existence: number;
  modified_correct: number;
  modified_accuracy: RationalValue;
  modified_accuracy_pct: string;
}

export interface MetricsDocument {
  kind: 'category_metrics';
  categories: CategoryEntry[];
  overall: OverallEntry | null;
}

export interface AblationRowEntry {
  config: string;
  model_variant: string;
  shot_mode: string;
  item_count: number;
  correct: number;
  modified_correct: number;
  modified_accuracy: RationalValue;
  modified_accuracy_pct: string;
}

export interface AblationDocument {
  kind: 'ablation_report';
  rows: AblationRowEntry[];
}

export interface ItemSeed {
  source_text: string;
  category?: string | null;
  item_id?: string;
  raw_text?: string | null;
  answers?: Record<string, string[]> | null;
}

export interface RunCreate {
  kind: string;
  config: Record<string, unknown>;
  items: ItemSeed[];
  idempotency_key?: string;
}

export interface ApiError {
  error_code: string;
  message: string;
}
