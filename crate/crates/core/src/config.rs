//! Tolerances and defaults shared by the library, its tests and the CLI.

/// Row-sum tolerance when an MDP is ingested.
pub const ROW_SUM_INGEST_TOL: f64 = 1e-6;
/// Row-sum tolerance guaranteed after construction normalizes the rows.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Rows closer than this to unit mass are stored untouched, which keeps
/// normalization idempotent and the JSON round trip bit-exact.
pub const ROW_SUM_SNAP: f64 = 1e-12;

/// Slack allowed in non-expansion checks.
pub const NON_EXPANSION_SLACK: f64 = 1e-12;
/// Probability vectors sum to one within this.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Residual tolerance on the normalized beta root function.
pub const BETA_ROOT_TOL: f64 = 1e-10;
/// Relative bracket width at which the beta search stops.
pub const BETA_BRACKET_TOL: f64 = 1e-12;
/// Maximum number of bracket doublings in the beta search.
pub const BETA_MAX_DOUBLINGS: usize = 200;

/// GVI stopping threshold used by studies.
pub const GVI_DELTA: f64 = 1e-3;
/// GVI sweep cap.
pub const GVI_CAP: usize = 1000;
/// Default clustering threshold as a multiple of `delta / (1 - gamma)`.
pub const CLUSTER_TOL_FACTOR: f64 = 10.0;
/// Stopping threshold for fixed-point enumeration. Endpoints must land well
/// inside the gap between distinct fixed points.
pub const FIXED_POINT_DELTA: f64 = 1e-8;
/// Sweep cap for fixed-point enumeration.
pub const FIXED_POINT_CAP: usize = 20_000;
/// Stopping threshold for iteration-count sweeps on the two-state MDP. At
/// `GVI_DELTA` the slow passage near the fold is cut short by the stopping
/// rule itself.
pub const ITERATION_SWEEP_DELTA: f64 = 1e-6;

/// Operator parameter (`beta = omega`) pinned for the random-MDP study.
pub const RANDOM_STUDY_PARAMETER: f64 = 16.55;
/// Discount of the random-MDP study.
pub const RANDOM_STUDY_GAMMA: f64 = 0.98;
/// Random initializations per MDP when counting fixed points in the study.
pub const RANDOM_STUDY_INITS: usize = 20;

/// Oscillation window in episodes.
pub const OSCILLATION_WINDOW: usize = 500;
/// Oscillation threshold on the window standard deviation.
pub const OSCILLATION_TAU: f64 = 0.05;
/// Per-episode step cap for SARSA.
pub const EPISODE_STEP_CAP: usize = 10_000;

/// Central finite-difference step used by gradient checks.
pub const FD_STEP: f64 = 1e-5;
/// Relative tolerance of gradient checks.
pub const FD_REL_TOL: f64 = 1e-6;
