//! Scenario files: operators, failure source and experiment parameters as
//! versioned JSON. Every section and field except `version` may be omitted
//! and falls back to the defaults below.

use std::fs;
use std::path::Path;

use arfa_core::{
    AllocationConfig, BeliefSet, DimensionWeights, ExperimentConfig, FailureGenerator, FailureType,
    OperatorKind, OptimizerConfig, PhaseMode, Policy, SimulatedOperator, SummaryConfig, TrialConfig,
};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default = "default_operators")]
    pub operators: Vec<OperatorSpec>,
    #[serde(default)]
    pub failures: FailureSource,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub summary: SummaryConfig,
}

/// A simulated operator. Omitted fields take the defaults of its kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub id: String,
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<BeliefSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_time_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overload_penalty: Option<f64>,
}

impl OperatorSpec {
    pub fn new(id: &str, kind: OperatorKind) -> Self {
        OperatorSpec { id: id.into(), kind, latent: None, base_time_range: None, overload_penalty: None }
    }

    pub fn to_operator(&self) -> SimulatedOperator {
        let mut op = SimulatedOperator::new(self.id.as_str(), self.kind);
        if let Some(latent) = self.latent {
            op.latent = latent;
        }
        if let Some(range) = self.base_time_range {
            op.base_time_range = range;
        }
        if let Some(k) = self.overload_penalty {
            op.overload_penalty = k;
        }
        op
    }

    fn resolved(&self) -> Self {
        let op = self.to_operator();
        OperatorSpec {
            id: self.id.clone(),
            kind: self.kind,
            latent: Some(op.latent),
            base_time_range: Some(op.base_time_range),
            overload_penalty: Some(op.overload_penalty),
        }
    }
}

fn default_operators() -> Vec<OperatorSpec> {
    vec![OperatorSpec::new("local", OperatorKind::Local), OperatorSpec::new("remote", OperatorKind::Remote)]
}

/// Where failure requirements come from. A catalog without rows uses the
/// built-in medication-task catalog.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum FailureSource {
    #[default]
    Uniform,
    Catalog {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        catalog: Option<Vec<FailureType>>,
    },
}

impl FailureSource {
    pub fn generator(&self) -> FailureGenerator {
        match self {
            FailureSource::Uniform => FailureGenerator::Uniform,
            FailureSource::Catalog { catalog: Some(rows) } => FailureGenerator::Catalog { catalog: rows.clone() },
            FailureSource::Catalog { catalog: None } => FailureGenerator::default_catalog(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    #[default]
    Online,
    TwoPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: u64,
    pub trials: usize,
    pub failures: usize,
    pub policies: Vec<Policy>,
    pub epsilon: f64,
    pub cold_start_tau: f64,
    pub weights: DimensionWeights,
    pub phase_mode: PhaseKind,
    pub acquisition_length: usize,
    pub freeze_beliefs: bool,
    pub shared_failure_stream: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let alloc = AllocationConfig::default();
        ExperimentSection {
            seed: 42,
            trials: 20,
            failures: 100,
            policies: vec![Policy::Arfa, Policy::Random],
            epsilon: alloc.epsilon,
            cold_start_tau: alloc.cold_start_tau,
            weights: alloc.weights,
            phase_mode: PhaseKind::Online,
            acquisition_length: 15,
            freeze_beliefs: false,
            shared_failure_stream: true,
        }
    }
}

impl ExperimentSection {
    pub fn phase(&self) -> PhaseMode {
        match self.phase_mode {
            PhaseKind::Online => PhaseMode::Online,
            PhaseKind::TwoPhase => PhaseMode::TwoPhase {
                acquisition_length: self.acquisition_length,
                freeze_beliefs: self.freeze_beliefs,
            },
        }
    }
}

/// Belief optimizer settings; scenarios run 200 Adam steps per update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub steps: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub bin_width: f64,
    pub min_width: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        OptimizerSection {
            steps: 200,
            learning_rate: c.learning_rate,
            weight_decay: c.weight_decay,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
            bin_width: c.bin_width,
            min_width: c.min_width,
        }
    }
}

impl From<OptimizerSection> for OptimizerConfig {
    fn from(s: OptimizerSection) -> Self {
        OptimizerConfig {
            learning_rate: s.learning_rate,
            weight_decay: s.weight_decay,
            beta1: s.beta1,
            beta2: s.beta2,
            epsilon: s.epsilon,
            steps: s.steps,
            bin_width: s.bin_width,
            min_width: s.min_width,
        }
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            version: SCENARIO_VERSION,
            operators: default_operators(),
            failures: FailureSource::default(),
            experiment: ExperimentSection::default(),
            optimizer: OptimizerSection::default(),
            summary: SummaryConfig::default(),
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
        let scenario = Self::from_json(&text).map_err(|e| match e {
            Error::Usage(msg) => Error::malformed(path, msg),
            other => other,
        })?;
        Ok(scenario)
    }

    /// Parses and validates; problems are reported as [`Error::Usage`].
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Usage(e.to_string()))?;
        scenario.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::Usage(format!(
                "unsupported scenario version {} (expected {SCENARIO_VERSION})",
                self.version
            )));
        }
        if self.experiment.trials == 0 {
            return Err(Error::Usage("at least one trial is required".into()));
        }
        if self.experiment.policies.is_empty() {
            return Err(Error::Usage("at least one policy is required".into()));
        }
        self.trial_config(self.experiment.policies[0]).validate()?;
        let ops = self.operators();
        if ops.is_empty() {
            return Err(arfa_core::Error::NoOperators.into());
        }
        for (i, op) in ops.iter().enumerate() {
            op.validate()?;
            if ops[..i].iter().any(|o| o.id == op.id) {
                return Err(Error::Usage(format!("duplicate operator id `{}`", op.id)));
            }
        }
        Ok(())
    }

    pub fn operators(&self) -> Vec<SimulatedOperator> {
        self.operators.iter().map(OperatorSpec::to_operator).collect()
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        self.optimizer.into()
    }

    pub fn trial_config(&self, policy: Policy) -> TrialConfig {
        let e = &self.experiment;
        TrialConfig {
            policy,
            n_failures: e.failures,
            allocation: AllocationConfig {
                weights: e.weights,
                epsilon: e.epsilon,
                cold_start_tau: e.cold_start_tau,
            },
            optimizer: self.optimizer_config(),
            generator: self.failures.generator(),
            phase_mode: e.phase(),
            seed: e.seed,
            trial_index: 0,
            stream_salt: 0,
        }
    }

    pub fn experiment_config(&self, policies: &[Policy]) -> ExperimentConfig {
        ExperimentConfig {
            base: self.trial_config(policies.first().copied().unwrap_or(Policy::Arfa)),
            policies: policies.to_vec(),
            n_trials: self.experiment.trials,
            shared_failure_stream: self.experiment.shared_failure_stream,
        }
    }

    /// Summary settings; the paired test only applies to shared streams.
    pub fn summary_config(&self) -> SummaryConfig {
        SummaryConfig { paired: self.summary.paired && self.experiment.shared_failure_stream, ..self.summary }
    }

    /// Copy with every defaulted value written out, as echoed next to the
    /// outputs of a run.
    pub fn resolved(&self) -> Self {
        let mut s = self.clone();
        s.operators = self.operators.iter().map(OperatorSpec::resolved).collect();
        if let FailureSource::Catalog { catalog: None } = s.failures {
            s.failures = FailureSource::Catalog { catalog: Some(arfa_core::default_catalog()) };
        }
        s.summary = self.summary_config();
        s
    }
}

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub failures: Option<usize>,
    pub policies: Option<Vec<Policy>>,
    pub epsilon: Option<f64>,
    pub bin_width: Option<f64>,
    pub steps: Option<usize>,
    pub phase_mode: Option<PhaseKind>,
    pub acquisition_length: Option<usize>,
    pub freeze_beliefs: bool,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) {
        let e = &mut scenario.experiment;
        if let Some(v) = self.seed {
            e.seed = v;
        }
        if let Some(v) = self.trials {
            e.trials = v;
        }
        if let Some(v) = self.failures {
            e.failures = v;
        }
        if let Some(v) = &self.policies {
            e.policies = v.clone();
        }
        if let Some(v) = self.epsilon {
            e.epsilon = v;
        }
        if let Some(v) = self.phase_mode {
            e.phase_mode = v;
        }
        if let Some(v) = self.acquisition_length {
            e.acquisition_length = v;
        }
        if self.freeze_beliefs {
            e.freeze_beliefs = true;
        }
        if let Some(v) = self.bin_width {
            scenario.optimizer.bin_width = v;
        }
        if let Some(v) = self.steps {
            scenario.optimizer.steps = v;
        }
    }
}
