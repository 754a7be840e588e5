//! Online calibration of capability bounds.
//!
//! Outcomes are counted per requirement bin. The bounds of each operator
//! are fitted so that the product of capability scores at each bin's
//! center matches the bin's observed success fraction, minimizing the sum
//! of squared residuals with Adam. After every step the bounds are
//! projected back to `0 <= lower <= upper <= 1` with a minimum width.

use alloc::collections::BTreeMap;
use alloc::format;

use serde::{Deserialize, Serialize};

use crate::capability::{
    capability_score, predicted_from_beliefs, BeliefSet, CapabilityBelief, CapabilityDimension,
    FailureRequirements, OperatorId, OperatorProfile,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// L2 coefficient added to the gradient as `weight_decay * param`.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Adam iterations per resolved failure.
    pub steps: usize,
    pub bin_width: f64,
    pub min_width: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.001,
            weight_decay: 0.001,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
            steps: 10,
            bin_width: 0.2,
            min_width: 0.01,
        }
    }
}

impl OptimizerConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidConfig(format!("{what} out of range: {v}")));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", self.learning_rate);
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay", self.weight_decay);
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", self.beta1);
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", self.beta2);
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", self.epsilon);
        }
        if !(self.bin_width > 0.0 && self.bin_width <= 1.0) {
            return bad("bin_width", self.bin_width);
        }
        if !(0.0..=1.0).contains(&self.min_width) {
            return bad("min_width", self.min_width);
        }
        Ok(())
    }

    pub fn grid(&self) -> BinGrid {
        BinGrid::new(self.bin_width)
    }
}

/// Quantization of each requirement component into `ceil(1 / width)` bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    width: f64,
    count: usize,
}

impl BinGrid {
    pub fn new(width: f64) -> Self {
        // 1/0.2 is 5.000000000000001 in binary; shave rounding noise before ceil
        let count = libm::ceil(1.0 / width - 1e-9).max(1.0) as usize;
        BinGrid { width, count }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn bins_per_dimension(&self) -> usize {
        self.count
    }

    /// Bin index of one requirement component; 1.0 falls in the top bin.
    pub fn index(&self, requirement: f64) -> usize {
        let idx = libm::floor(requirement / self.width) as usize;
        idx.min(self.count - 1)
    }

    pub fn bin(&self, requirements: &FailureRequirements) -> RequirementBin {
        RequirementBin(requirements.as_array().map(|r| self.index(r)))
    }

    /// Midpoint of bin `idx`, with the top bin clipped at 1.
    pub fn center(&self, idx: usize) -> f64 {
        let lo = idx as f64 * self.width;
        let hi = ((idx + 1) as f64 * self.width).min(1.0);
        (lo + hi) / 2.0
    }

    /// Representative requirement vector of a bin.
    pub fn representative(&self, bin: RequirementBin) -> FailureRequirements {
        FailureRequirements::from_array(bin.0.map(|i| self.center(i)))
    }
}

/// Per-dimension bin indices, in physical, cognitive, urgency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RequirementBin(pub [usize; 3]);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinCounts {
    pub successes: u64,
    pub trials: u64,
}

/// Empirical success counts per operator and requirement bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessTracker {
    grid: BinGrid,
    per_operator: BTreeMap<OperatorId, BTreeMap<RequirementBin, BinCounts>>,
}

impl SuccessTracker {
    pub fn new(grid: BinGrid) -> Self {
        SuccessTracker { grid, per_operator: BTreeMap::new() }
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn counts(&self, operator: &OperatorId, bin: RequirementBin) -> BinCounts {
        self.per_operator
            .get(operator)
            .and_then(|m| m.get(&bin))
            .copied()
            .unwrap_or_default()
    }

    /// Observed bins of one operator in key order.
    pub fn bins(&self, operator: &OperatorId) -> impl Iterator<Item = (RequirementBin, BinCounts)> + '_ {
        self.per_operator
            .get(operator)
            .into_iter()
            .flat_map(|m| m.iter().map(|(b, c)| (*b, *c)))
    }

    pub fn has_observations(&self, operator: &OperatorId) -> bool {
        self.per_operator.get(operator).is_some_and(|m| !m.is_empty())
    }
}

pub fn observe_outcome(
    tracker: &mut SuccessTracker,
    operator: &OperatorId,
    requirements: &FailureRequirements,
    succeeded: bool,
) {
    let bin = tracker.grid.bin(requirements);
    let counts = tracker
        .per_operator
        .entry(operator.clone())
        .or_default()
        .entry(bin)
        .or_default();
    counts.trials += 1;
    if succeeded {
        counts.successes += 1;
    }
}

pub fn empirical_success(
    tracker: &SuccessTracker,
    operator: &OperatorId,
    bin: RequirementBin,
) -> Result<f64> {
    let c = tracker.counts(operator, bin);
    if c.trials == 0 {
        return Err(Error::EmptyBin(bin.0));
    }
    Ok(c.successes as f64 / c.trials as f64)
}

/// The six bounds as a flat vector:
/// `[lower_phys, upper_phys, lower_cog, upper_cog, lower_resp, upper_resp]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams(pub [f64; 6]);

impl BoundParams {
    pub fn from_beliefs(beliefs: &BeliefSet) -> Self {
        let mut p = [0.0; 6];
        for dim in CapabilityDimension::ALL {
            let b = beliefs.get(dim);
            p[2 * dim.index()] = b.lower;
            p[2 * dim.index() + 1] = b.upper;
        }
        BoundParams(p)
    }

    pub fn to_beliefs(&self) -> BeliefSet {
        let mut beliefs = BeliefSet::UNINFORMED;
        for dim in CapabilityDimension::ALL {
            *beliefs.get_mut(dim) = CapabilityBelief {
                lower: self.0[2 * dim.index()],
                upper: self.0[2 * dim.index() + 1],
            };
        }
        beliefs
    }

    /// Clamps every bound to `[0, 1]`, then pushes each pair apart about its
    /// midpoint until `upper - lower >= min_width`, shifting back inside the
    /// unit interval if the push crosses an edge.
    pub fn project(&mut self, min_width: f64) {
        for pair in self.0.chunks_exact_mut(2) {
            let mut lower = pair[0].clamp(0.0, 1.0);
            let mut upper = pair[1].clamp(0.0, 1.0);
            if upper - lower < min_width {
                let mid = (lower + upper) / 2.0;
                lower = mid - min_width / 2.0;
                upper = mid + min_width / 2.0;
                if lower < 0.0 {
                    lower = 0.0;
                    upper = min_width;
                } else if upper > 1.0 {
                    upper = 1.0;
                    lower = 1.0 - min_width;
                }
            }
            pair[0] = lower;
            pair[1] = upper;
        }
    }
}

/// Sum over observed bins of `(observed - predicted)^2`, predictions taken
/// at each bin's center.
pub fn loss(profile: &OperatorProfile, tracker: &SuccessTracker, operator: &OperatorId) -> f64 {
    loss_for(&profile.beliefs, tracker, operator)
}

fn loss_for(beliefs: &BeliefSet, tracker: &SuccessTracker, operator: &OperatorId) -> f64 {
    tracker
        .bins(operator)
        .map(|(bin, c)| {
            let observed = c.successes as f64 / c.trials as f64;
            let predicted = predicted_from_beliefs(beliefs, &tracker.grid.representative(bin));
            let e = observed - predicted;
            e * e
        })
        .sum()
}

/// Partial derivatives of one capability score with respect to
/// `(lower, upper)`. Nonzero only on the sloped branch; at either
/// breakpoint the sloped branch's one-sided derivative is used.
fn score_partials(belief: &CapabilityBelief, r: f64) -> (f64, f64) {
    let CapabilityBelief { lower, upper } = *belief;
    let width = upper - lower;
    if width <= 0.0 || r < lower || r > upper {
        return (0.0, 0.0);
    }
    let w2 = width * width;
    ((upper - r) / w2, (r - lower) / w2)
}

/// Analytic gradient of [`loss`] over the six bounds (no weight decay).
pub fn loss_gradient(
    profile: &OperatorProfile,
    tracker: &SuccessTracker,
    operator: &OperatorId,
) -> BoundParams {
    gradient_for(&profile.beliefs, tracker, operator)
}

fn gradient_for(beliefs: &BeliefSet, tracker: &SuccessTracker, operator: &OperatorId) -> BoundParams {
    let mut grad = [0.0; 6];
    for (bin, c) in tracker.bins(operator) {
        let rep = tracker.grid.representative(bin);
        let scores = CapabilityDimension::ALL.map(|d| capability_score(beliefs.get(d), rep.get(d)));
        let predicted: f64 = scores.iter().product();
        let observed = c.successes as f64 / c.trials as f64;
        let outer = -2.0 * (observed - predicted);
        for dim in CapabilityDimension::ALL {
            let j = dim.index();
            let others: f64 = (0..3).filter(|&m| m != j).map(|m| scores[m]).product();
            let (d_lower, d_upper) = score_partials(beliefs.get(dim), rep.get(dim));
            grad[2 * j] += outer * others * d_lower;
            grad[2 * j + 1] += outer * others * d_upper;
        }
    }
    BoundParams(grad)
}

/// First and second moment estimates of one operator's six bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: [f64; 6],
    pub second_moment: [f64; 6],
    pub step: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One Adam iteration with the L2 term folded into the gradient, followed
/// by projection onto the feasible bounds.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut BoundParams,
    gradient: &BoundParams,
    config: &OptimizerConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - libm::pow(config.beta1, t as f64);
    let bias2 = 1.0 - libm::pow(config.beta2, t as f64);
    for k in 0..6 {
        let g = gradient.0[k] + config.weight_decay * params.0[k];
        let m = config.beta1 * state.first_moment[k] + (1.0 - config.beta1) * g;
        let v = config.beta2 * state.second_moment[k] + (1.0 - config.beta2) * g * g;
        state.first_moment[k] = m;
        state.second_moment[k] = v;
        let m_hat = m / bias1;
        let v_hat = v / bias2;
        params.0[k] -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + config.epsilon);
    }
    params.project(config.min_width);
}

/// Runs `config.steps` Adam iterations on the operator's accumulated loss.
/// An operator without observations is left untouched.
pub fn update_beliefs(
    profile: &mut OperatorProfile,
    tracker: &SuccessTracker,
    state: &mut AdamState,
    config: &OptimizerConfig,
) {
    if !tracker.has_observations(&profile.id) {
        return;
    }
    let mut params = BoundParams::from_beliefs(&profile.beliefs);
    for _ in 0..config.steps {
        let grad = gradient_for(&params.to_beliefs(), tracker, &profile.id);
        adam_step(state, &mut params, &grad, config);
    }
    profile.beliefs = params.to_beliefs();
}

/// Per-bound convergence flags, in [`BoundParams`] order: a bound has
/// converged when its range over the last `window` snapshots is below `tol`.
pub fn detect_convergence(history: &[BeliefSet], window: usize, tol: f64) -> Result<[bool; 6]> {
    if window == 0 || history.len() < window {
        return Err(Error::HistoryTooShort { len: history.len(), window });
    }
    let tail = &history[history.len() - window..];
    let mut lo = [f64::INFINITY; 6];
    let mut hi = [f64::NEG_INFINITY; 6];
    for snap in tail {
        let p = BoundParams::from_beliefs(snap).0;
        for k in 0..6 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Ok(core::array::from_fn(|k| hi[k] - lo[k] < tol))
}

/// For each bound, the earliest snapshot index from which it stays within
/// `tol` for at least `window` snapshots and through the end of the
/// history. `None` if it never settles.
pub fn settling_point(history: &[BeliefSet], window: usize, tol: f64) -> [Option<usize>; 6] {
    let mut settled: [Option<usize>; 6] = [None; 6];
    if window == 0 || history.len() < window {
        return settled;
    }
    for n in (window..=history.len()).rev() {
        let flags = detect_convergence(&history[..n], window, tol).unwrap_or([false; 6]);
        let mut any_open = false;
        for k in 0..6 {
            let still_settled = flags[k] && (n == history.len() || settled[k] == Some(n + 1));
            if still_settled {
                settled[k] = Some(n);
            }
            any_open |= settled[k].is_some();
        }
        if !any_open {
            break;
        }
    }
    settled.map(|n| n.map(|n| n - window))
}
