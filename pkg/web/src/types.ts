// Client-side mirrors of the backend JSON. These objects are never
// mutated locally; every rendered state is reconstructable from API
// responses alone.

export interface SymbolBinding {
  symbol: string;
  definition: string;
  unit: string;
}

export interface ParameterEntry {
  symbol: string;
  value_raw: number;
  scale_notation: string | null;
  unit_raw: string;
  value_si: number;
  unit_si: string;
  provenance: string;
  resolution_flag: "as_printed" | "scale_resolved" | "ambiguous";
}

export interface MaterialMeta {
  material_name: string;
  material_class: string;
  provenance_note: string;
  test_conditions: string;
}

export interface ValidationInfo {
  method: string;
  present: boolean;
}

export interface GroundingReport {
  grounded: boolean;
  ungrounded_symbols: string[];
  orphan_bindings: string[];
  duplicate_definitions: string[];
}

export interface ModelRecord {
  record_id: string;
  doc_id: string;
  equation_latex: string;
  symbol_map: SymbolBinding[];
  material: MaterialMeta;
  parameters: ParameterEntry[];
  validation: ValidationInfo;
  mechanism: string;
  confidence: number;
  review_status: "unverified" | "verified" | "rejected" | "edited";
  version: number;
  grounding?: GroundingReport;
}

export interface GateVerdict {
  domain_relevance: boolean;
  theoretical_content: boolean;
  experimental_validation: boolean;
  relevant: boolean;
  rationale: string;
  score: number;
}

export type JobState =
  | "queued" | "parsed" | "screening" | "rejected" | "extracting"
  | "needs_review" | "verified" | "failed";

export interface JobView {
  doc_id: string;
  state: JobState;
  timestamps: Record<string, string>;
  error: string | null;
  verdict: GateVerdict | null;
  records: ModelRecord[];
}

export interface QueryFilters {
  material_class?: string;
  mechanism?: string;
  q?: string;
  param?: string;
  min?: string;
  max?: string;
  review_status?: string;
  page?: number;
}

export interface ModelPage {
  records: ModelRecord[];
  total: number;
  page: number;
  page_size: number;
}

export interface MechanismBucket {
  mechanism: string;
  count: number;
  percentage: number;
}

export interface MechanismHistogram {
  buckets: MechanismBucket[];
  total: number;
}

export interface UploadResponse {
  doc_id: string;
  job_state: JobState;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}

export const MATERIAL_CLASSES = [
  "stone", "brick", "mortar", "timber", "earthen", "clay_suspension",
  "composite_masonry", "other",
] as const;

export const MECHANISM_CLASSES = [
  "elasto_plasticity", "failure_damage", "rheology_time_dependent",
  "elasticity", "viscoelasticity", "hyperelasticity",
  "coupled_environmental", "other",
] as const;

export const SETTLED_STATES: JobState[] = [
  "needs_review", "verified", "rejected", "failed",
];
