//! Adaptive allocation of robot failures to human operators.
//!
//! Each operator carries a belief interval per capability dimension. A
//! failure is scored against those intervals, combined with the operator's
//! historical resolution speed and current workload share into an expected
//! reward, and handed to the operator with the highest value. Resolution
//! outcomes feed back into the intervals through an Adam-driven fit of
//! predicted against observed success.
//!
//! The crate is `no_std` (with `alloc`). Everything here is deterministic
//! given a seed; file formats and the command line live in the `arfa` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod allocation;
pub mod capability;
mod error;
pub mod metrics;
pub mod optimizer;
pub mod sim;

pub use allocation::{
    allocate_alternating, allocate_arfa, allocate_random, cost, expected_reward,
    performance_metric_tau, reward, AllocationConfig, AllocationDecision, ResolutionLedger,
    ResolutionRecord,
};
pub use capability::{
    capability_score, performance_index, predicted_performance, BeliefSet, CapabilityBelief,
    CapabilityDimension, DimensionWeights, FailureId, FailureRequirements, FailureSpec,
    OperatorId, OperatorProfile,
};
pub use error::Error;
pub use metrics::{
    convergence_rate, idle_time, mean_std, operator_durations, paired_permutation_test,
    permutation_test, success_rates, summarize, workload_gap, ExperimentSummary, MetricStat,
    OperatorRate, PairwiseComparison, PolicySummary, SuccessRates, SummaryConfig,
};
pub use optimizer::{
    adam_step, detect_convergence, empirical_success, loss, loss_gradient, observe_outcome,
    settling_point, update_beliefs, AdamState, BinCounts, BinGrid, BoundParams, OptimizerConfig,
    RequirementBin, SuccessTracker,
};
pub use sim::{
    default_catalog, resolution_duration, run_experiment, run_trial, run_trial_from,
    sample_failure, simulate_resolution, success_threshold, ExperimentConfig, FailureGenerator, FailureType, OperatorKind, PhaseMode, Policy,
    PolicyResults, SimulatedOperator, TrialConfig, TrialResult,
};

pub type Result<T, E = Error> = core::result::Result<T, E>;
