//! Seeded simulation of operators resolving a stream of failures.
//!
//! Operators carry hidden ground-truth capability intervals. Resolution
//! time is a uniform draw from the operator's base range, inflated by how
//! far the failure's requirements exceed the operator's true upper bounds.
//! A resolution succeeds when it finishes within `ε / (1 + urgency)`.
//!
//! Randomness comes from one root seed. Each trial derives independent
//! ChaCha streams for failure requirements, resolution times and random
//! allocation, so every policy in an experiment can see the same failures
//! and the same resolution-time draws.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    allocate_alternating, allocate_arfa, allocate_random, AllocationConfig, AllocationDecision,
    ResolutionLedger, ResolutionRecord,
};
use crate::capability::{
    BeliefSet, CapabilityBelief, CapabilityDimension, FailureId, FailureRequirements, FailureSpec,
    OperatorId, OperatorProfile,
};
use crate::optimizer::{observe_outcome, update_beliefs, AdamState, OptimizerConfig, SuccessTracker};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Local,
    Remote,
}

impl OperatorKind {
    /// Base resolution-time range in seconds.
    pub fn default_time_range(self) -> (f64, f64) {
        match self {
            OperatorKind::Local => (10.0, 50.0),
            OperatorKind::Remote => (40.0, 90.0),
        }
    }

    /// Default hidden capabilities: lowers at 0, uppers per dimension.
    pub fn default_latent(self) -> BeliefSet {
        let uppers = match self {
            OperatorKind::Local => [1.0, 1.0, 1.0],
            OperatorKind::Remote => [0.45, 0.85, 0.55],
        };
        let mut latent = BeliefSet::UNINFORMED;
        for dim in CapabilityDimension::ALL {
            *latent.get_mut(dim) = CapabilityBelief { lower: 0.0, upper: uppers[dim.index()] };
        }
        latent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedOperator {
    pub id: OperatorId,
    pub kind: OperatorKind,
    /// Ground truth, never shown to the allocator.
    pub latent: BeliefSet,
    pub base_time_range: (f64, f64),
    /// Multiplier `k` on the summed requirement excess.
    pub overload_penalty: f64,
}

impl SimulatedOperator {
    pub const DEFAULT_OVERLOAD_PENALTY: f64 = 1.0;

    pub fn new(id: impl Into<OperatorId>, kind: OperatorKind) -> Self {
        SimulatedOperator {
            id: id.into(),
            kind,
            latent: kind.default_latent(),
            base_time_range: kind.default_time_range(),
            overload_penalty: Self::DEFAULT_OVERLOAD_PENALTY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.latent.validate()?;
        let (lo, hi) = self.base_time_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "operator {}: base time range must satisfy 0 < min <= max, got ({lo}, {hi})",
                self.id
            )));
        }
        if !(self.overload_penalty >= 0.0 && self.overload_penalty.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "operator {}: overload penalty must be >= 0, got {}",
                self.id, self.overload_penalty
            )));
        }
        Ok(())
    }
}

/// One row of a failure catalog: requirement ranges per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureType {
    pub label: String,
    pub physical: (f64, f64),
    pub cognitive: (f64, f64),
    pub urgency: (f64, f64),
}

impl FailureType {
    fn new(label: &str, physical: (f64, f64), cognitive: (f64, f64), urgency: (f64, f64)) -> Self {
        FailureType { label: label.into(), physical, cognitive, urgency }
    }

    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.physical, self.cognitive, self.urgency] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "failure type {}: range ({lo}, {hi}) outside [0, 1]",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

/// The five failure types of the medication-fetching task.
pub fn default_catalog() -> Vec<FailureType> {
    vec![
        FailureType::new("Undetected", (0.2, 0.4), (0.4, 0.6), (0.0, 1.0)),
        FailureType::new("Misplaced", (0.4, 0.6), (0.8, 1.0), (0.0, 1.0)),
        FailureType::new("Expired", (0.3, 0.5), (0.2, 0.3), (0.0, 1.0)),
        FailureType::new("Grasp error", (0.1, 0.3), (0.6, 0.7), (0.0, 1.0)),
        FailureType::new("Non-graspable", (0.9, 1.0), (0.3, 0.4), (0.0, 1.0)),
    ]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FailureGenerator {
    /// Every requirement uniform on `[0, 1]`.
    #[default]
    Uniform,
    /// A catalog type chosen uniformly, then each requirement uniform within
    /// that type's range.
    Catalog { catalog: Vec<FailureType> },
}

impl FailureGenerator {
    pub fn default_catalog() -> Self {
        FailureGenerator::Catalog { catalog: default_catalog() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FailureGenerator::Uniform => Ok(()),
            FailureGenerator::Catalog { catalog } if catalog.is_empty() => Err(Error::EmptyCatalog),
            FailureGenerator::Catalog { catalog } => catalog.iter().try_for_each(FailureType::validate),
        }
    }
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

pub fn sample_failure<R: Rng + ?Sized>(
    generator: &FailureGenerator,
    id: FailureId,
    rng: &mut R,
) -> Result<FailureSpec> {
    match generator {
        FailureGenerator::Uniform => {
            let r: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            Ok(FailureSpec { id, requirements: FailureRequirements::from_array(r), type_label: None })
        }
        FailureGenerator::Catalog { catalog } => {
            if catalog.is_empty() {
                return Err(Error::EmptyCatalog);
            }
            let ty = &catalog[rng.gen_range(0..catalog.len())];
            let requirements = FailureRequirements {
                physical: uniform_in(rng, ty.physical),
                cognitive: uniform_in(rng, ty.cognitive),
                urgency: uniform_in(rng, ty.urgency),
            };
            Ok(FailureSpec { id, requirements, type_label: Some(ty.label.clone()) })
        }
    }
}

/// `base * (1 + k * Σ_j max(0, r_j − latent_upper_j))` with `base` at the
/// fraction `unit` of the operator's base range.
pub fn resolution_duration(operator: &SimulatedOperator, requirements: &FailureRequirements, unit: f64) -> f64 {
    let base = uniform_from_unit(operator.base_time_range, unit);
    let excess: f64 = CapabilityDimension::ALL
        .iter()
        .map(|&d| (requirements.get(d) - operator.latent.get(d).upper).max(0.0))
        .sum();
    base * (1.0 + operator.overload_penalty * excess)
}

fn uniform_from_unit((lo, hi): (f64, f64), unit: f64) -> f64 {
    lo + (hi - lo) * unit
}

/// Draws a resolution time. Resolution always completes; exceeding the
/// operator's capabilities only makes it slower.
pub fn simulate_resolution<R: Rng + ?Sized>(
    operator: &SimulatedOperator,
    requirements: &FailureRequirements,
    rng: &mut R,
) -> f64 {
    resolution_duration(operator, requirements, rng.gen())
}

/// Time limit for a successful resolution, tightened by urgency.
pub fn success_threshold(epsilon: f64, urgency: f64) -> f64 {
    epsilon / (1.0 + urgency)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Arfa,
    Random,
    #[serde(alias = "roundrobin")]
    Alternating,
}

impl Policy {
    pub const fn name(self) -> &'static str {
        match self {
            Policy::Arfa => "arfa",
            Policy::Random => "random",
            Policy::Alternating => "alternating",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arfa" => Ok(Policy::Arfa),
            "random" => Ok(Policy::Random),
            "alternating" | "roundrobin" | "round-robin" => Ok(Policy::Alternating),
            other => Err(Error::InvalidConfig(format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PhaseMode {
    /// The policy allocates every failure; beliefs update after each one.
    #[default]
    Online,
    /// The first `acquisition_length` failures alternate between operators
    /// to calibrate beliefs; the policy handles the rest. With
    /// `freeze_beliefs` the calibrated bounds stay fixed afterwards.
    TwoPhase {
        acquisition_length: usize,
        #[serde(default)]
        freeze_beliefs: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub policy: Policy,
    pub n_failures: usize,
    pub allocation: AllocationConfig,
    pub optimizer: OptimizerConfig,
    pub generator: FailureGenerator,
    pub phase_mode: PhaseMode,
    /// Root seed of the experiment.
    pub seed: u64,
    pub trial_index: u64,
    /// Nonzero values give this trial its own failure and resolution-time
    /// streams instead of the ones shared by every policy.
    #[serde(default)]
    pub stream_salt: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            policy: Policy::Arfa,
            n_failures: 100,
            allocation: AllocationConfig::default(),
            optimizer: OptimizerConfig::default(),
            generator: FailureGenerator::Uniform,
            phase_mode: PhaseMode::Online,
            seed: 0,
            trial_index: 0,
            stream_salt: 0,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.allocation.validate()?;
        self.optimizer.validate()?;
        self.generator.validate()?;
        if let PhaseMode::TwoPhase { acquisition_length, .. } = self.phase_mode {
            if self.n_failures > 0 && acquisition_length >= self.n_failures {
                return Err(Error::InvalidConfig(format!(
                    "acquisition length {acquisition_length} must be below the {} failures of a trial",
                    self.n_failures
                )));
            }
        }
        if self.stream_salt >= 1 << 12 {
            return Err(Error::InvalidConfig(format!("stream salt {} too large", self.stream_salt)));
        }
        Ok(())
    }

    /// Number of leading failures handled by the acquisition phase.
    pub fn acquisition_length(&self) -> usize {
        match self.phase_mode {
            PhaseMode::Online => 0,
            PhaseMode::TwoPhase { acquisition_length, .. } => acquisition_length.min(self.n_failures),
        }
    }

    fn rng(&self, purpose: Stream) -> ChaCha8Rng {
        let salt = match purpose {
            Stream::Policy => 0,
            _ => self.stream_salt,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.trial_index << 16) | (salt << 4) | purpose as u64);
        rng
    }
}

#[derive(Clone, Copy)]
enum Stream {
    Failures = 0,
    Resolution = 1,
    Policy = 2,
}

/// Everything a trial produced. Metrics are derived from the ledger and
/// trajectories by [`crate::metrics`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub policy: Policy,
    pub trial_index: u64,
    pub seed: u64,
    pub config_fingerprint: u64,
    pub operator_ids: Vec<OperatorId>,
    /// Index of the first failure counted by the metrics; nonzero only in
    /// two-phase mode.
    pub evaluation_start: usize,
    pub failures: Vec<FailureSpec>,
    pub decisions: Vec<AllocationDecision>,
    pub ledger: ResolutionLedger,
    /// `trajectories[op][i]` is operator `op`'s beliefs after failure `i`.
    pub trajectories: Vec<Vec<BeliefSet>>,
    pub final_profiles: Vec<OperatorProfile>,
}

impl TrialResult {
    /// Ledger records from the evaluation phase.
    pub fn evaluation_records(&self) -> &[ResolutionRecord] {
        let records = self.ledger.records();
        &records[self.evaluation_start.min(records.len())..]
    }

    pub fn n_failures(&self) -> usize {
        self.failures.len()
    }
}

fn validate_operators(operators: &[SimulatedOperator]) -> Result<()> {
    if operators.is_empty() {
        return Err(Error::NoOperators);
    }
    for (i, op) in operators.iter().enumerate() {
        op.validate()?;
        if operators[..i].iter().any(|o| o.id == op.id) {
            return Err(Error::InvalidConfig(format!("duplicate operator id `{}`", op.id)));
        }
    }
    Ok(())
}

/// Runs one trial with every operator starting from uninformed beliefs.
pub fn run_trial(config: &TrialConfig, operators: &[SimulatedOperator]) -> Result<TrialResult> {
    run_trial_from(config, operators, None)
}

/// Runs one trial, optionally starting from previously calibrated beliefs
/// (one per operator, in registration order).
pub fn run_trial_from(
    config: &TrialConfig,
    operators: &[SimulatedOperator],
    initial_beliefs: Option<&[BeliefSet]>,
) -> Result<TrialResult> {
    config.validate()?;
    validate_operators(operators)?;
    if let Some(init) = initial_beliefs {
        if init.len() != operators.len() {
            return Err(Error::InvalidConfig(format!(
                "{} initial belief sets for {} operators",
                init.len(),
                operators.len()
            )));
        }
        init.iter().try_for_each(BeliefSet::validate)?;
    }

    let n = config.n_failures;
    let mut profiles: Vec<OperatorProfile> = operators
        .iter()
        .enumerate()
        .map(|(i, op)| OperatorProfile {
            id: op.id.clone(),
            beliefs: initial_beliefs.map_or(BeliefSet::UNINFORMED, |b| b[i]),
        })
        .collect();
    let mut adam = vec![AdamState::new(); operators.len()];
    let mut tracker = SuccessTracker::new(config.optimizer.grid());
    let mut ledger = ResolutionLedger::new();
    let mut failures = Vec::with_capacity(n);
    let mut decisions = Vec::with_capacity(n);
    let mut trajectories = vec![Vec::with_capacity(n); operators.len()];

    let mut failure_rng = config.rng(Stream::Failures);
    let mut resolution_rng = config.rng(Stream::Resolution);
    let mut policy_rng = config.rng(Stream::Policy);

    let acquisition = config.acquisition_length();
    let freeze = matches!(config.phase_mode, PhaseMode::TwoPhase { freeze_beliefs: true, .. });

    for idx in 0..n {
        let failure = sample_failure(&config.generator, FailureId(idx as u64), &mut failure_rng)?;
        let in_acquisition = idx < acquisition;
        let decision = if in_acquisition {
            allocate_alternating(&failure, idx, &profiles)?
        } else {
            match config.policy {
                Policy::Arfa => allocate_arfa(&failure, &profiles, &ledger, &config.allocation)?,
                Policy::Random => allocate_random(&failure, &profiles, &mut policy_rng)?,
                Policy::Alternating => allocate_alternating(&failure, idx, &profiles)?,
            }
        };
        let chosen = decision.chosen_index;

        // one draw per failure whoever resolves it, so policies stay paired
        let unit: f64 = resolution_rng.gen();
        let duration = resolution_duration(&operators[chosen], &failure.requirements, unit);
        let succeeded =
            duration <= success_threshold(config.allocation.epsilon, failure.requirements.urgency);

        ledger.append(ResolutionRecord {
            failure_id: failure.id,
            operator_id: profiles[chosen].id.clone(),
            duration,
            succeeded,
            requirements: failure.requirements,
        })?;
        observe_outcome(&mut tracker, &profiles[chosen].id, &failure.requirements, succeeded);
        if in_acquisition || !freeze {
            update_beliefs(&mut profiles[chosen], &tracker, &mut adam[chosen], &config.optimizer);
        }

        for (traj, profile) in trajectories.iter_mut().zip(&profiles) {
            traj.push(profile.beliefs);
        }
        failures.push(failure);
        decisions.push(decision);
    }

    Ok(TrialResult {
        policy: config.policy,
        trial_index: config.trial_index,
        seed: config.seed,
        config_fingerprint: fingerprint(config, operators),
        operator_ids: operators.iter().map(|o| o.id.clone()).collect(),
        evaluation_start: acquisition,
        failures,
        decisions,
        ledger,
        trajectories,
        final_profiles: profiles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Template for every trial; its `policy`, `trial_index` and
    /// `stream_salt` are overridden per run.
    pub base: TrialConfig,
    pub policies: Vec<Policy>,
    pub n_trials: usize,
    pub shared_failure_stream: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            base: TrialConfig::default(),
            policies: vec![Policy::Arfa, Policy::Random],
            n_trials: 20,
            shared_failure_stream: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResults {
    pub policy: Policy,
    pub trials: Vec<TrialResult>,
}

/// Runs `n_trials` trials of every policy. With a shared failure stream,
/// trial `t` of every policy sees the same failures and resolution-time
/// draws.
pub fn run_experiment(
    config: &ExperimentConfig,
    operators: &[SimulatedOperator],
    initial_beliefs: Option<&[BeliefSet]>,
) -> Result<Vec<PolicyResults>> {
    if config.n_trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    if config.policies.is_empty() {
        return Err(Error::InvalidConfig("at least one policy is required".into()));
    }
    config
        .policies
        .iter()
        .enumerate()
        .map(|(p_idx, &policy)| {
            let trials = (0..config.n_trials as u64)
                .map(|t| {
                    let trial = TrialConfig {
                        policy,
                        trial_index: t,
                        stream_salt: if config.shared_failure_stream { 0 } else { p_idx as u64 + 1 },
                        ..config.base.clone()
                    };
                    run_trial_from(&trial, operators, initial_beliefs)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PolicyResults { policy, trials })
        })
        .collect()
}

/// FNV-1a over the `Debug` rendering of the trial inputs.
fn fingerprint(config: &TrialConfig, operators: &[SimulatedOperator]) -> u64 {
    struct Fnv(u64);
    impl fmt::Write for Fnv {
        fn write_str(&mut self, s: &str) -> fmt::Result {
            for b in s.bytes() {
                self.0 ^= b as u64;
                self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
            }
            Ok(())
        }
    }
    let mut h = Fnv(0xcbf2_9ce4_8422_2325);
    let _ = fmt::write(&mut h, format_args!("{config:?}{operators:?}"));
    h.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops() -> Vec<SimulatedOperator> {
        vec![
            SimulatedOperator::new("local", OperatorKind::Local),
            SimulatedOperator::new("remote", OperatorKind::Remote),
        ]
    }

    #[test]
    fn threshold_examples() {
        assert!((success_threshold(100.0, 0.0) - 100.0).abs() < 1e-12);
        assert!((success_threshold(100.0, 1.0) - 50.0).abs() < 1e-12);
        assert!((success_threshold(100.0, 0.5) - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn inflation_formula() {
        let mut op = SimulatedOperator::new("r", OperatorKind::Remote);
        op.base_time_range = (40.0, 40.0);
        op.overload_penalty = 2.0;
        // excess: physical 0.75 - 0.45 = 0.3, urgency 0.75 - 0.55 = 0.2
        let r = FailureRequirements::new(0.75, 0.5, 0.75).unwrap();
        assert!((resolution_duration(&op, &r, 0.3) - 80.0).abs() < 1e-9);

        let below = FailureRequirements::new(0.1, 0.1, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let d = simulate_resolution(&ops()[1], &below, &mut rng);
            assert!((40.0..=90.0).contains(&d));
        }
        let a = simulate_resolution(&ops()[0], &r, &mut ChaCha8Rng::seed_from_u64(5));
        let b = simulate_resolution(&ops()[0], &r, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut sums = [0.0; 3];
        for i in 0..n {
            let f = sample_failure(&FailureGenerator::Uniform, FailureId(i), &mut rng).unwrap();
            for (s, r) in sums.iter_mut().zip(f.requirements.as_array()) {
                assert!((0.0..=1.0).contains(&r));
                *s += r;
            }
        }
        for s in sums {
            let mean = s / n as f64;
            assert!((0.48..=0.52).contains(&mean), "{mean}");
        }

        let catalog = FailureGenerator::Catalog {
            catalog: vec![default_catalog().remove(4)],
        };
        for i in 0..500 {
            let f = sample_failure(&catalog, FailureId(i), &mut rng).unwrap();
            assert_eq!(f.type_label.as_deref(), Some("Non-graspable"));
            assert!((0.9..=1.0).contains(&f.requirements.physical));
            assert!((0.3..=0.4).contains(&f.requirements.cognitive));
        }

        let empty = FailureGenerator::Catalog { catalog: vec![] };
        assert_eq!(sample_failure(&empty, FailureId(0), &mut rng), Err(Error::EmptyCatalog));
    }

    #[test]
    fn default_catalog_matches_table() {
        let c = default_catalog();
        let misplaced = c.iter().find(|t| t.label == "Misplaced").unwrap();
        assert_eq!(misplaced.cognitive, (0.8, 1.0));
        assert_eq!(misplaced.physical, (0.4, 0.6));
        let expired = c.iter().find(|t| t.label == "Expired").unwrap();
        assert_eq!((expired.physical, expired.cognitive), ((0.3, 0.5), (0.2, 0.3)));
        let grasp = c.iter().find(|t| t.label == "Grasp error").unwrap();
        assert_eq!((grasp.physical, grasp.cognitive), ((0.1, 0.3), (0.6, 0.7)));
        let undetected = c.iter().find(|t| t.label == "Undetected").unwrap();
        assert_eq!((undetected.physical, undetected.cognitive), ((0.2, 0.4), (0.4, 0.6)));
        assert!(c.iter().all(|t| t.urgency == (0.0, 1.0)));
    }

    #[test]
    fn empty_trial() {
        let cfg = TrialConfig { n_failures: 0, ..Default::default() };
        let res = run_trial(&cfg, &ops()).unwrap();
        assert!(res.ledger.is_empty());
        assert!(res.trajectories.iter().all(|t| t.is_empty()));
        assert!(res.final_profiles.iter().all(|p| p.beliefs == BeliefSet::UNINFORMED));
    }

    #[test]
    fn trial_rejects_bad_inputs() {
        let cfg = TrialConfig::default();
        assert_eq!(run_trial(&cfg, &[]), Err(Error::NoOperators));
        let two_phase = TrialConfig {
            phase_mode: PhaseMode::TwoPhase { acquisition_length: 100, freeze_beliefs: false },
            ..Default::default()
        };
        assert!(run_trial(&two_phase, &ops()).is_err());
        let mut dup = ops();
        dup[1].id = "local".into();
        assert!(run_trial(&cfg, &dup).is_err());
    }

    #[test]
    fn records_match_threshold_and_count() {
        for policy in [Policy::Arfa, Policy::Random, Policy::Alternating] {
            let cfg = TrialConfig { policy, seed: 9, ..Default::default() };
            let res = run_trial(&cfg, &ops()).unwrap();
            assert_eq!(res.ledger.len(), cfg.n_failures);
            assert!(res.ledger.audit());
            for r in res.ledger.records() {
                assert_eq!(r.succeeded, r.duration <= success_threshold(100.0, r.requirements.urgency));
            }
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let cfg = TrialConfig { seed: 42, trial_index: 3, ..Default::default() };
        let a = run_trial(&cfg, &ops()).unwrap();
        let b = run_trial(&cfg, &ops()).unwrap();
        assert_eq!(a, b);
        let other = run_trial(&TrialConfig { trial_index: 4, ..cfg }, &ops()).unwrap();
        assert_ne!(a.failures, other.failures);
    }

    #[test]
    fn random_split_is_near_even() {
        let cfg = TrialConfig { policy: Policy::Random, seed: 42, ..Default::default() };
        let res = run_trial(&cfg, &ops()).unwrap();
        let local = res.ledger.assignment_count(&"local".into());
        assert!((35..=65).contains(&local), "{local}");
        assert_eq!(res, run_trial(&cfg, &ops()).unwrap());
    }

    #[test]
    fn two_phase_acquisition_alternates() {
        let cfg = TrialConfig {
            phase_mode: PhaseMode::TwoPhase { acquisition_length: 15, freeze_beliefs: false },
            seed: 5,
            ..Default::default()
        };
        let res = run_trial(&cfg, &ops()).unwrap();
        assert_eq!(res.evaluation_start, 15);
        let acq = &res.ledger.records()[..15];
        let local = acq.iter().filter(|r| r.operator_id == "local".into()).count();
        assert!(local.abs_diff(15 - local) <= 1);
        assert_eq!(res.evaluation_records().len(), 85);
    }

    #[test]
    fn frozen_beliefs_stop_after_acquisition() {
        let cfg = TrialConfig {
            phase_mode: PhaseMode::TwoPhase { acquisition_length: 10, freeze_beliefs: true },
            seed: 5,
            ..Default::default()
        };
        let res = run_trial(&cfg, &ops()).unwrap();
        for traj in &res.trajectories {
            assert!(traj[9..].iter().all(|b| *b == traj[9]));
        }
    }

    #[test]
    fn initial_beliefs_are_used() {
        let mut start = BeliefSet::UNINFORMED;
        start.physical.upper = 0.3;
        let cfg = TrialConfig { n_failures: 1, policy: Policy::Alternating, ..Default::default() };
        let res = run_trial_from(&cfg, &ops(), Some(&[start, start])).unwrap();
        // the remote operator was not assigned failure 0, so keeps its start
        assert_eq!(res.final_profiles[1].beliefs, start);
        assert!(run_trial_from(&cfg, &ops(), Some(&[start])).is_err());
    }

    #[test]
    fn shared_streams_across_policies() {
        let exp = ExperimentConfig { n_trials: 3, ..Default::default() };
        let res = run_experiment(&exp, &ops(), None).unwrap();
        assert_eq!(res.len(), 2);
        for t in 0..3 {
            assert_eq!(res[0].trials[t].failures, res[1].trials[t].failures);
        }
        let unshared = ExperimentConfig { shared_failure_stream: false, ..exp };
        let res = run_experiment(&unshared, &ops(), None).unwrap();
        assert_ne!(res[0].trials[0].failures, res[1].trials[0].failures);

        let single = ExperimentConfig { n_trials: 1, ..Default::default() };
        let res = run_experiment(&single, &ops(), None).unwrap();
        assert!(res.iter().all(|p| p.trials.len() == 1));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("ARFA".parse::<Policy>().unwrap(), Policy::Arfa);
        assert_eq!("roundrobin".parse::<Policy>().unwrap(), Policy::Alternating);
        assert!("greedy".parse::<Policy>().is_err());
    }
}
