//! Sparse Boolean tasks, trial logic and result analysis for the scaling and
//! parity experiments.
//!
//! Randomness is keyed by coordinates: a scaling trial's seed is
//! `child_seed(root, [T, m, trial])`, and a parity run's seed is
//! `child_seed(root, [seed_index])`. Outputs therefore do not depend on how
//! trials are scheduled across workers.

mod analysis;
mod parity;
mod tasks;
mod trial;

pub use analysis::{
    detect_transition, inversions, least_squares, scaling_fits, thresholds, CellRate, LinearFit, ScalingFits, Threshold,
};
pub use parity::{run_parity, run_parity_seed, ParityCurve, ParitySpec, ParityStep, PARITY_HEADER};
pub use tasks::{
    ambiguity, default_bias, gen_dataset, gen_dataset_lenient, Ambiguity, Generated, TaskKind, TaskSpec,
    MAX_AMBIGUITY_CANDIDATES, REJECTION_BUDGET,
};
pub use trial::{
    run_trial, summarize, GridSpec, ScalingResult, ScalingRow, TrialJob, TrialKnobs, TrialOutcome, SCALING_HEADER,
};
