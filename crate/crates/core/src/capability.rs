//! Operator capability beliefs and the scores that match them against
//! failure requirements.

use alloc::format;
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Capability axes, iterated in the fixed order physical, cognitive,
/// responsiveness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapabilityDimension {
    Physical,
    Cognitive,
    Responsiveness,
}

impl CapabilityDimension {
    pub const ALL: [CapabilityDimension; 3] = [
        CapabilityDimension::Physical,
        CapabilityDimension::Cognitive,
        CapabilityDimension::Responsiveness,
    ];

    pub const fn index(self) -> usize {
        match self {
            CapabilityDimension::Physical => 0,
            CapabilityDimension::Cognitive => 1,
            CapabilityDimension::Responsiveness => 2,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            CapabilityDimension::Physical => "physical",
            CapabilityDimension::Cognitive => "cognitive",
            CapabilityDimension::Responsiveness => "responsiveness",
        }
    }
}

impl fmt::Display for CapabilityDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Interval `[lower, upper]` in which an operator's true capability is
/// believed to lie.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapabilityBelief {
    pub lower: f64,
    pub upper: f64,
}

impl CapabilityBelief {
    /// The initial belief: nothing is known, so the whole unit interval.
    pub const UNINFORMED: CapabilityBelief = CapabilityBelief { lower: 0.0, upper: 1.0 };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let belief = CapabilityBelief { lower, upper };
        belief.validate()?;
        Ok(belief)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.lower)
            && (0.0..=1.0).contains(&self.upper)
            && self.lower <= self.upper;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "belief bounds must satisfy 0 <= lower <= upper <= 1, got ({}, {})",
                self.lower, self.upper
            )))
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

impl Default for CapabilityBelief {
    fn default() -> Self {
        Self::UNINFORMED
    }
}

/// One belief per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BeliefSet {
    pub physical: CapabilityBelief,
    pub cognitive: CapabilityBelief,
    pub responsiveness: CapabilityBelief,
}

impl BeliefSet {
    pub const UNINFORMED: BeliefSet = BeliefSet {
        physical: CapabilityBelief::UNINFORMED,
        cognitive: CapabilityBelief::UNINFORMED,
        responsiveness: CapabilityBelief::UNINFORMED,
    };

    pub fn get(&self, dim: CapabilityDimension) -> &CapabilityBelief {
        match dim {
            CapabilityDimension::Physical => &self.physical,
            CapabilityDimension::Cognitive => &self.cognitive,
            CapabilityDimension::Responsiveness => &self.responsiveness,
        }
    }

    pub fn get_mut(&mut self, dim: CapabilityDimension) -> &mut CapabilityBelief {
        match dim {
            CapabilityDimension::Physical => &mut self.physical,
            CapabilityDimension::Cognitive => &mut self.cognitive,
            CapabilityDimension::Responsiveness => &mut self.responsiveness,
        }
    }

    pub fn validate(&self) -> Result<()> {
        CapabilityDimension::ALL
            .iter()
            .try_for_each(|&dim| self.get(dim).validate())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OperatorId(pub String);

impl OperatorId {
    pub fn new(id: impl Into<String>) -> Self {
        OperatorId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for OperatorId {
    fn from(s: &str) -> Self {
        OperatorId(s.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorProfile {
    pub id: OperatorId,
    pub beliefs: BeliefSet,
}

impl OperatorProfile {
    /// Fresh profile with every bound at `(0, 1)`.
    pub fn new(id: impl Into<OperatorId>) -> Self {
        OperatorProfile { id: id.into(), beliefs: BeliefSet::UNINFORMED }
    }
}

impl From<String> for OperatorId {
    fn from(s: String) -> Self {
        OperatorId(s)
    }
}

/// Requirement vector of a failure. Urgency is scored against the
/// responsiveness belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureRequirements {
    pub physical: f64,
    pub cognitive: f64,
    pub urgency: f64,
}

impl FailureRequirements {
    pub fn new(physical: f64, cognitive: f64, urgency: f64) -> Result<Self> {
        let req = FailureRequirements { physical, cognitive, urgency };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.physical, self.cognitive, self.urgency]
            .iter()
            .all(|r| (0.0..=1.0).contains(r))
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "requirements must lie in [0, 1], got {:?}",
                self
            )))
        }
    }

    /// Requirement component scored against `dim`.
    pub fn get(&self, dim: CapabilityDimension) -> f64 {
        match dim {
            CapabilityDimension::Physical => self.physical,
            CapabilityDimension::Cognitive => self.cognitive,
            CapabilityDimension::Responsiveness => self.urgency,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.physical, self.cognitive, self.urgency]
    }

    pub fn from_array(r: [f64; 3]) -> Self {
        FailureRequirements { physical: r[0], cognitive: r[1], urgency: r[2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FailureId(pub u64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureSpec {
    pub id: FailureId,
    pub requirements: FailureRequirements,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_label: Option<String>,
}

/// Non-negative weights over the dimensions, summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionWeights {
    pub physical: f64,
    pub cognitive: f64,
    pub responsiveness: f64,
}

impl DimensionWeights {
    pub fn new(physical: f64, cognitive: f64, responsiveness: f64) -> Result<Self> {
        let w = DimensionWeights { physical, cognitive, responsiveness };
        w.validate()?;
        Ok(w)
    }

    pub fn uniform() -> Self {
        let third = 1.0 / 3.0;
        DimensionWeights { physical: third, cognitive: third, responsiveness: third }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.physical, self.cognitive, self.responsiveness];
        let sum: f64 = w.iter().sum();
        if w.iter().all(|&x| x >= 0.0 && x.is_finite()) && libm::fabs(sum - 1.0) <= 1e-9 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "weights must be non-negative and sum to 1, got {:?}",
                w
            )))
        }
    }

    pub fn get(&self, dim: CapabilityDimension) -> f64 {
        match dim {
            CapabilityDimension::Physical => self.physical,
            CapabilityDimension::Cognitive => self.cognitive,
            CapabilityDimension::Responsiveness => self.responsiveness,
        }
    }
}

impl Default for DimensionWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Piecewise-linear match of one requirement against one belief interval:
/// 1 at or below the lower bound, 0 above the upper bound, linear between.
/// A zero-width interval scores 1 unless the requirement exceeds it.
pub fn capability_score(belief: &CapabilityBelief, requirement: f64) -> f64 {
    let CapabilityBelief { lower, upper } = *belief;
    if requirement <= lower {
        1.0
    } else if requirement > upper {
        0.0
    } else {
        // lower < requirement <= upper implies upper > lower
        (upper - requirement) / (upper - lower)
    }
}

/// Weighted sum of per-dimension scores.
pub fn performance_index(
    profile: &OperatorProfile,
    requirements: &FailureRequirements,
    weights: &DimensionWeights,
) -> f64 {
    CapabilityDimension::ALL
        .iter()
        .map(|&dim| {
            weights.get(dim) * capability_score(profile.beliefs.get(dim), requirements.get(dim))
        })
        .sum()
}

/// Probability of success predicted from the beliefs, treating the
/// dimensions as independent.
pub fn predicted_performance(profile: &OperatorProfile, requirements: &FailureRequirements) -> f64 {
    predicted_from_beliefs(&profile.beliefs, requirements)
}

pub(crate) fn predicted_from_beliefs(beliefs: &BeliefSet, requirements: &FailureRequirements) -> f64 {
    CapabilityDimension::ALL
        .iter()
        .map(|&dim| capability_score(beliefs.get(dim), requirements.get(dim)))
        .product()
}
