// Payload shapes for the session service (api_version 1).

export type Phase =
  | "eliciting_preferences"
  | "awaiting_choice"
  | "evaluating"
  | "done"
  | "aborted";

export interface Bounds {
  lower: number[];
  upper: number[];
}

export interface PendingPair {
  x1: number[];
  x2: number[];
}

export interface PreferencesInfo {
  total: number;
  labeled: number;
  pending_pair: PendingPair | null;
  hypothesis: { lower: number[]; upper: number[] }[] | null;
}

export interface SessionState {
  api_version: number;
  id: string;
  phase: Phase;
  error: string | null;
  t: number;
  budget: number;
  initial: number;
  dims: number;
  bounds: Bounds;
  expert_mode: string;
  acq: string;
  zeta: number;
  gamma: number;
  preferences: PreferencesInfo;
  context: { task_id: string; points: number[][]; values: number[] };
  history: { step: number; side: string; x: number[]; y: number }[];
  regret: number[] | null;
  suggested_dims: [number, number];
}

export interface Snapshot {
  mu_s: number;
  var_s: number;
  alpha_s: number;
  mu_pi?: number;
  var_pi?: number;
  mu_combined?: number;
  var_combined?: number;
  w_pi?: number;
  w_s?: number;
  alpha_s_pi?: number;
}

export interface PairPayload {
  x1: number[];
  x2: number[];
  score1: number;
  score2: number;
  snapshot1: Snapshot;
  snapshot2: Snapshot;
}

export interface AttributionRecord {
  method: "shap" | "lime";
  target: "acquisition" | "surrogate_mean" | "surrogate_uncertainty";
  values: number[];
  baseline: number;
  candidate: number;
  diagnostics: Record<string, unknown>;
}

export interface ExplanationsPayload {
  candidates: { point: number[]; snapshot: Snapshot }[];
  attributions: AttributionRecord[];
}

export interface CandidatesPayload {
  id: string;
  api_version: number;
  step: number;
  pair: PairPayload;
  explanations: ExplanationsPayload | null;
}

export interface HeatmapPayload {
  id: string;
  dim_pair: [number, number];
  fixed: number[];
  axis_i: number[];
  axis_j: number[];
  mean: number[][];
  uncertainty: number[][];
  acquisition: number[][];
  annotations: { index: number; i: number; j: number }[];
}

export interface CreateSessionBody {
  family_path: string;
  checkpoint_path: string;
  task_id?: string;
  expert_mode: string;
  m_pairs: number;
  budget: number;
  initial?: number;
  seed: number;
  zeta?: number;
  gamma?: number;
  explanations?: boolean;
}
