//! Expected-reward assignment and the baseline policies.
//!
//! ER_i = Λ_i · (R_i − C_i): the performance index scales the difference
//! between an urgency-weighted reward for past speed and the operator's
//! share of all resolution time spent so far.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::capability::{
    performance_index, DimensionWeights, FailureId, FailureRequirements, FailureSpec, OperatorId,
    OperatorProfile,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRecord {
    pub failure_id: FailureId,
    pub operator_id: OperatorId,
    /// Seconds from assignment to resolution.
    pub duration: f64,
    pub succeeded: bool,
    pub requirements: FailureRequirements,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Aggregate {
    count: usize,
    total_duration: f64,
}

/// Append-only history of resolutions with cached per-operator totals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResolutionLedger {
    records: Vec<ResolutionRecord>,
    per_operator: BTreeMap<OperatorId, Aggregate>,
    total_duration: f64,
}

impl ResolutionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = ResolutionRecord>) -> Result<Self> {
        let mut ledger = Self::new();
        for r in records {
            ledger.append(r)?;
        }
        Ok(ledger)
    }

    pub fn append(&mut self, record: ResolutionRecord) -> Result<()> {
        if !(record.duration > 0.0 && record.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "resolution duration must be positive and finite, got {}",
                record.duration
            )));
        }
        record.requirements.validate()?;
        let agg = self.per_operator.entry(record.operator_id.clone()).or_default();
        agg.count += 1;
        agg.total_duration += record.duration;
        self.total_duration += record.duration;
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[ResolutionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn assignment_count(&self, operator: &OperatorId) -> usize {
        self.per_operator.get(operator).map_or(0, |a| a.count)
    }

    /// Cumulative resolution time of one operator.
    pub fn operator_duration(&self, operator: &OperatorId) -> f64 {
        self.per_operator.get(operator).map_or(0.0, |a| a.total_duration)
    }

    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    /// Recomputes every cached aggregate from the raw records and reports
    /// whether the cache agrees.
    pub fn audit(&self) -> bool {
        let mut fresh: BTreeMap<&OperatorId, Aggregate> = BTreeMap::new();
        let mut total = 0.0;
        for r in &self.records {
            let agg = fresh.entry(&r.operator_id).or_default();
            agg.count += 1;
            agg.total_duration += r.duration;
            total += r.duration;
        }
        fresh.len() == self.per_operator.len()
            && total == self.total_duration
            && self
                .per_operator
                .iter()
                .all(|(id, agg)| fresh.get(id) == Some(agg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocationConfig {
    pub weights: DimensionWeights,
    /// Task-dependent time threshold ε in seconds.
    pub epsilon: f64,
    /// τ used for an operator without any resolution history.
    pub cold_start_tau: f64,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        AllocationConfig {
            weights: DimensionWeights::uniform(),
            epsilon: 100.0,
            cold_start_tau: 0.5,
        }
    }
}

impl AllocationConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// τ_i = 1 − mean(duration)/ε over every record assigned to the operator,
/// successful or not. Falls back to `cold_start_tau` without history.
pub fn performance_metric_tau(
    ledger: &ResolutionLedger,
    operator: &OperatorId,
    epsilon: f64,
    cold_start_tau: f64,
) -> f64 {
    match ledger.per_operator.get(operator) {
        Some(agg) if agg.count > 0 => 1.0 - (agg.total_duration / agg.count as f64) / epsilon,
        _ => cold_start_tau,
    }
}

pub fn reward(urgency: f64, tau: f64) -> f64 {
    urgency * (1.0 + tau) / (1.0 + urgency)
}

/// Operator's share of all resolution time so far; 0 for an empty ledger.
pub fn cost(ledger: &ResolutionLedger, operator: &OperatorId) -> f64 {
    if ledger.total_duration > 0.0 {
        ledger.operator_duration(operator) / ledger.total_duration
    } else {
        0.0
    }
}

pub fn expected_reward(
    profile: &OperatorProfile,
    requirements: &FailureRequirements,
    ledger: &ResolutionLedger,
    config: &AllocationConfig,
) -> f64 {
    let lambda = performance_index(profile, requirements, &config.weights);
    let tau = performance_metric_tau(ledger, &profile.id, config.epsilon, config.cold_start_tau);
    let r = reward(requirements.urgency, tau);
    let c = cost(ledger, &profile.id);
    lambda * (r - c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDecision {
    pub failure_id: FailureId,
    pub chosen_operator_id: OperatorId,
    /// Position of the chosen operator in registration order.
    pub chosen_index: usize,
    /// Expected reward per operator; `None` for policies that do not score.
    pub per_operator_expected_reward: Option<Vec<(OperatorId, f64)>>,
}

/// Assigns the failure to the operator with the highest expected reward.
///
/// Exact ties go to the operator with the lower cumulative resolution time,
/// then to the earlier-registered operator.
pub fn allocate_arfa(
    failure: &FailureSpec,
    operators: &[OperatorProfile],
    ledger: &ResolutionLedger,
    config: &AllocationConfig,
) -> Result<AllocationDecision> {
    if operators.is_empty() {
        return Err(Error::NoOperators);
    }
    let scores: Vec<(OperatorId, f64)> = operators
        .iter()
        .map(|op| (op.id.clone(), expected_reward(op, &failure.requirements, ledger, config)))
        .collect();

    let mut best = 0;
    for (i, (id, er)) in scores.iter().enumerate().skip(1) {
        let (best_id, best_er) = &scores[best];
        if *er > *best_er
            || (*er == *best_er && ledger.operator_duration(id) < ledger.operator_duration(best_id))
        {
            best = i;
        }
    }

    Ok(AllocationDecision {
        failure_id: failure.id,
        chosen_operator_id: operators[best].id.clone(),
        chosen_index: best,
        per_operator_expected_reward: Some(scores),
    })
}

/// Uniform draw over the operators from the caller's seeded stream.
pub fn allocate_random<R: Rng + ?Sized>(
    failure: &FailureSpec,
    operators: &[OperatorProfile],
    rng: &mut R,
) -> Result<AllocationDecision> {
    if operators.is_empty() {
        return Err(Error::NoOperators);
    }
    let idx = rng.gen_range(0..operators.len());
    Ok(unscored(failure, operators, idx))
}

/// Round-robin in registration order.
pub fn allocate_alternating(
    failure: &FailureSpec,
    failure_index: usize,
    operators: &[OperatorProfile],
) -> Result<AllocationDecision> {
    if operators.is_empty() {
        return Err(Error::NoOperators);
    }
    Ok(unscored(failure, operators, failure_index % operators.len()))
}

fn unscored(failure: &FailureSpec, operators: &[OperatorProfile], idx: usize) -> AllocationDecision {
    AllocationDecision {
        failure_id: failure.id,
        chosen_operator_id: operators[idx].id.clone(),
        chosen_index: idx,
        per_operator_expected_reward: None,
    }
}
