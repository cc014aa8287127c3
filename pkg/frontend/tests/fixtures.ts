import type {
  CandidatesPayload,
  HeatmapPayload,
  SessionState,
} from "../src/types";

export function makeState(overrides: Partial<SessionState> = {}): SessionState {
  return {
    api_version: 1,
    id: "abc123",
    phase: "eliciting_preferences",
    error: null,
    t: 0,
    budget: 3,
    initial: 1,
    dims: 2,
    bounds: { lower: [0, 0], upper: [1, 1] },
    expert_mode: "interactive",
    acq: "ei",
    zeta: 0.1,
    gamma: 0.1,
    preferences: {
      total: 2,
      labeled: 0,
      pending_pair: { x1: [0.1, 0.2], x2: [0.8, 0.9] },
      hypothesis: [{ lower: [0.0, 0.0], upper: [0.2, 1.0] }],
    },
    context: { task_id: "t", points: [[0.5, 0.5]], values: [0.42] },
    history: [],
    regret: [0.58],
    suggested_dims: [0, 1],
    ...overrides,
  };
}

export function makeCandidates(overrides: Partial<CandidatesPayload> = {}): CandidatesPayload {
  const snapshot1 = { mu_s: 0.5117, var_s: 0.04, alpha_s: 0.123456789 };
  const snapshot2 = {
    mu_s: 0.6,
    var_s: 0.09,
    alpha_s: 0.2,
    mu_pi: 0.91,
    var_pi: 0.002,
    mu_combined: 0.88,
    var_combined: 0.001,
    w_pi: 0.9,
    w_s: 0.1,
    alpha_s_pi: 0.3333333333333,
  };
  return {
    id: "abc123",
    api_version: 1,
    step: 0,
    pair: {
      x1: [0.25, 0.5],
      x2: [0.75, 0.5],
      score1: 0.123456789,
      score2: 0.3333333333333,
      snapshot1,
      snapshot2,
    },
    explanations: {
      candidates: [
        { point: [0.25, 0.5], snapshot: snapshot1 },
        { point: [0.75, 0.5], snapshot: snapshot2 },
      ],
      attributions: (["shap", "lime"] as const).flatMap((method) =>
        [0, 1].flatMap((candidate) =>
          (["acquisition", "surrogate_mean", "surrogate_uncertainty"] as const).map(
            (target) => ({
              method,
              target,
              values: [0.2 * (candidate + 1), -0.1],
              baseline: 0.05,
              candidate,
              diagnostics: {},
            }),
          ),
        ),
      ),
    },
    ...overrides,
  };
}

export function makeHeatmap(): HeatmapPayload {
  return {
    id: "abc123",
    dim_pair: [0, 1],
    fixed: [0.5, 0.5],
    axis_i: [0, 0.5, 1],
    axis_j: [0, 0.5, 1],
    mean: [
      [0.1, 0.2, 0.3],
      [0.4, 0.5, 0.6],
      [0.7, 0.8, 0.9],
    ],
    uncertainty: [
      [0.01, 0.02, 0.03],
      [0.04, 0.05, 0.06],
      [0.07, 0.08, 0.09],
    ],
    acquisition: [
      [1, 2, 3],
      [4, 5, 6],
      [7, 8, 9],
    ],
    annotations: [{ index: 1, i: 0.5, j: 0.5 }],
  };
}
