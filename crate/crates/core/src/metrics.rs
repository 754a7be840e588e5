//! Evaluation metrics, cross-trial summaries and permutation tests.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capability::OperatorId;
use crate::optimizer::detect_convergence;
use crate::sim::{Policy, PolicyResults, TrialResult};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorRate {
    pub operator_id: OperatorId,
    pub assignments: usize,
    pub successes: usize,
    /// `None` when the operator received no failures.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRates {
    pub n_failures: usize,
    pub team_successes: usize,
    pub team: f64,
    pub per_operator: Vec<OperatorRate>,
}

/// Fraction of evaluation-phase failures resolved within their threshold,
/// for the team and for each registered operator.
pub fn success_rates(result: &TrialResult) -> Result<SuccessRates> {
    let records = result.evaluation_records();
    if records.is_empty() {
        return Err(Error::EmptyLedger);
    }
    let per_operator = result
        .operator_ids
        .iter()
        .map(|id| {
            let (assignments, successes) = records
                .iter()
                .filter(|r| &r.operator_id == id)
                .fold((0, 0), |(a, s), r| (a + 1, s + r.succeeded as usize));
            OperatorRate {
                operator_id: id.clone(),
                assignments,
                successes,
                rate: (assignments > 0).then(|| successes as f64 / assignments as f64),
            }
        })
        .collect();
    let team_successes = records.iter().filter(|r| r.succeeded).count();
    Ok(SuccessRates {
        n_failures: records.len(),
        team_successes,
        team: team_successes as f64 / records.len() as f64,
        per_operator,
    })
}

/// Total time the robot waited on failure resolution.
pub fn idle_time(result: &TrialResult) -> f64 {
    result.evaluation_records().iter().map(|r| r.duration).sum()
}

/// Per-operator cumulative resolution time, in registration order.
pub fn operator_durations(result: &TrialResult) -> Vec<f64> {
    result
        .operator_ids
        .iter()
        .map(|id| {
            result
                .evaluation_records()
                .iter()
                .filter(|r| &r.operator_id == id)
                .map(|r| r.duration)
                .sum()
        })
        .collect()
}

/// Largest minus smallest cumulative resolution time across operators;
/// with two operators, the absolute difference between them.
pub fn workload_gap(result: &TrialResult) -> f64 {
    let totals = operator_durations(result);
    let max = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = totals.iter().cloned().fold(f64::INFINITY, f64::min);
    if totals.is_empty() {
        0.0
    } else {
        max - min
    }
}

/// Converged and total bound counts of one trial. Trajectories shorter
/// than `window` are skipped.
fn convergence_counts(result: &TrialResult, window: usize, tol: f64) -> (usize, usize) {
    result
        .trajectories
        .iter()
        .filter_map(|traj| detect_convergence(traj, window, tol).ok())
        .fold((0, 0), |(c, n), flags| {
            (c + flags.iter().filter(|&&f| f).count(), n + flags.len())
        })
}

/// Fraction of (trial, operator, dimension, bound) trajectories classified
/// converged. Trajectories shorter than the window are not counted; with
/// none left the rate is 0.
pub fn convergence_rate(results: &[TrialResult], window: usize, tol: f64) -> f64 {
    let (c, n) = results
        .iter()
        .map(|r| convergence_counts(r, window, tol))
        .fold((0, 0), |(c, n), (c1, n1)| (c + c1, n + n1));
    if n == 0 {
        0.0
    } else {
        c as f64 / n as f64
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, libm::sqrt(var))
}

fn binomial(n: usize, k: usize) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u64)? / (i as u64 + 1);
    }
    Some(acc)
}

/// Calls `f` with every `k`-subset of `0..n` as a membership mask.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[bool])) {
    let mut idx: Vec<usize> = (0..k).collect();
    let mut mask = vec![false; n];
    loop {
        mask.iter_mut().for_each(|m| *m = false);
        idx.iter().for_each(|&i| mask[i] = true);
        f(&mask);
        // advance to the next combination in lexicographic order
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn abs_mean_diff(pooled: &[f64], in_first: &[bool], n_first: usize) -> f64 {
    let (mut s1, mut s2) = (0.0, 0.0);
    for (x, &first) in pooled.iter().zip(in_first) {
        if first {
            s1 += x;
        } else {
            s2 += x;
        }
    }
    libm::fabs(s1 / n_first as f64 - s2 / (pooled.len() - n_first) as f64)
}

// relative slack so that exact ties in the statistic count as extreme
fn at_least(stat: f64, observed: f64) -> bool {
    stat >= observed - 1e-12 * observed.max(1.0)
}

/// Two-sided two-sample permutation test on the difference of means.
///
/// When the number of distinct relabelings fits within `resamples` they
/// are enumerated exactly; otherwise `resamples` random relabelings are
/// drawn and the p-value is `(hits + 1) / (resamples + 1)`. The result does
/// not depend on which sample is passed first.
pub fn permutation_test<R: Rng + ?Sized>(
    samples_a: &[f64],
    samples_b: &[f64],
    resamples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(Error::InvalidConfig("permutation test needs two non-empty samples".into()));
    }
    let (a, b) = canonical_order(samples_a, samples_b);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let observed = libm::fabs(mean(a) - mean(b));

    match binomial(n, a.len()) {
        Some(total) if total <= resamples as u64 => {
            let mut hits = 0u64;
            for_each_subset(n, a.len(), |mask| {
                if at_least(abs_mean_diff(&pooled, mask, a.len()), observed) {
                    hits += 1;
                }
            });
            Ok(hits as f64 / total as f64)
        }
        _ => {
            let mut order: Vec<usize> = (0..n).collect();
            let mut mask = vec![false; n];
            let mut hits = 0usize;
            for _ in 0..resamples {
                order.shuffle(rng);
                mask.iter_mut().for_each(|m| *m = false);
                order[..a.len()].iter().for_each(|&i| mask[i] = true);
                if at_least(abs_mean_diff(&pooled, &mask, a.len()), observed) {
                    hits += 1;
                }
            }
            Ok((hits + 1) as f64 / (resamples + 1) as f64)
        }
    }
}

fn canonical_order<'a>(a: &'a [f64], b: &'a [f64]) -> (&'a [f64], &'a [f64]) {
    let key = |s: &[f64]| (s.len(), s.to_vec());
    let (ka, kb) = (key(a), key(b));
    let swap = match ka.0.cmp(&kb.0) {
        core::cmp::Ordering::Equal => ka
            .1
            .iter()
            .zip(&kb.1)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .is_some_and(|o| o.is_gt()),
        o => o.is_gt(),
    };
    if swap {
        (b, a)
    } else {
        (a, b)
    }
}

/// Two-sided paired sign-flip permutation test on the mean difference.
/// Exact when `2^n <= resamples`, otherwise Monte Carlo with the `+1`
/// correction.
pub fn paired_permutation_test<R: Rng + ?Sized>(
    samples_a: &[f64],
    samples_b: &[f64],
    resamples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples_a.is_empty() || samples_a.len() != samples_b.len() {
        return Err(Error::InvalidConfig(format!(
            "paired test needs equal non-empty samples, got {} and {}",
            samples_a.len(),
            samples_b.len()
        )));
    }
    let diffs: Vec<f64> = samples_a.iter().zip(samples_b).map(|(a, b)| a - b).collect();
    let n = diffs.len();
    let observed = libm::fabs(mean(&diffs));
    let flipped_mean = |signs: &mut dyn FnMut(usize) -> bool| {
        let s: f64 = diffs
            .iter()
            .enumerate()
            .map(|(i, d)| if signs(i) { -d } else { *d })
            .sum();
        libm::fabs(s / n as f64)
    };

    if n < 63 && (1u64 << n) <= resamples as u64 {
        let total = 1u64 << n;
        let hits = (0..total)
            .filter(|mask| at_least(flipped_mean(&mut |i| mask >> i & 1 == 1), observed))
            .count();
        Ok(hits as f64 / total as f64)
    } else {
        let mut hits = 0usize;
        for _ in 0..resamples {
            let flips: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            if at_least(flipped_mean(&mut |i| flips[i]), observed) {
                hits += 1;
            }
        }
        Ok((hits + 1) as f64 / (resamples + 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: Policy,
    pub n_trials: usize,
    pub metrics: Vec<MetricStat>,
}

impl PolicySummary {
    pub fn metric(&self, name: &str) -> Option<&MetricStat> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub policy_a: Policy,
    pub policy_b: Policy,
    pub metric: String,
    /// `paired_sign_flip` or `two_sample`.
    pub test: String,
    pub n: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub policies: Vec<PolicySummary>,
    pub comparisons: Vec<PairwiseComparison>,
}

impl ExperimentSummary {
    pub fn policy(&self, policy: Policy) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == policy)
    }

    pub fn comparison(&self, a: Policy, b: Policy, metric: &str) -> Option<&PairwiseComparison> {
        self.comparisons.iter().find(|c| {
            c.metric == metric
                && ((c.policy_a == a && c.policy_b == b) || (c.policy_a == b && c.policy_b == a))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummaryConfig {
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub resamples: usize,
    /// Seed of the permutation tests.
    pub seed: u64,
    /// Use the paired sign-flip test (trials share failure streams).
    pub paired: bool,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        SummaryConfig {
            convergence_window: 20,
            convergence_tol: 0.02,
            resamples: 10_000,
            seed: 0,
            paired: true,
        }
    }
}

pub const TEAM_SUCCESS: &str = "team_success_rate";
pub const IDLE_TIME: &str = "idle_time";
pub const WORKLOAD_GAP: &str = "workload_gap";
pub const CONVERGENCE: &str = "convergence_rate";

pub fn operator_success_metric(id: &OperatorId) -> String {
    format!("success_rate.{id}")
}

/// Per-trial values of every metric; `None` marks a value that is absent
/// for that trial (an operator without assignments).
fn per_trial_metrics(
    trials: &[TrialResult],
    cfg: &SummaryConfig,
) -> Result<BTreeMap<String, Vec<Option<f64>>>> {
    let mut out: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    let mut push = |name: String, v: Option<f64>| out.entry(name).or_default().push(v);
    for t in trials {
        let rates = success_rates(t)?;
        push(TEAM_SUCCESS.into(), Some(rates.team));
        for op in &rates.per_operator {
            push(operator_success_metric(&op.operator_id), op.rate);
        }
        push(IDLE_TIME.into(), Some(idle_time(t)));
        push(WORKLOAD_GAP.into(), Some(workload_gap(t)));
        let (c, n) = convergence_counts(t, cfg.convergence_window, cfg.convergence_tol);
        push(CONVERGENCE.into(), (n > 0).then(|| c as f64 / n as f64));
    }
    Ok(out)
}

fn metric_order(name: &str) -> (u8, &str) {
    let rank = match name {
        TEAM_SUCCESS => 0,
        n if n.starts_with("success_rate.") => 1,
        IDLE_TIME => 2,
        WORKLOAD_GAP => 3,
        _ => 4,
    };
    (rank, name)
}

type TrialMetrics = BTreeMap<String, Vec<Option<f64>>>;

/// Aggregates trial results into means and standard deviations over
/// trials, plus pairwise permutation p-values for every pair of policies.
pub fn summarize(results: &[PolicyResults], cfg: &SummaryConfig) -> Result<ExperimentSummary> {
    let per_policy: Vec<(Policy, TrialMetrics)> = results
        .iter()
        .map(|pr| Ok((pr.policy, per_trial_metrics(&pr.trials, cfg)?)))
        .collect::<Result<_>>()?;

    let policies = results
        .iter()
        .zip(&per_policy)
        .map(|(pr, (_, metrics))| {
            let mut names: Vec<&String> = metrics.keys().collect();
            names.sort_by(|a, b| metric_order(a).cmp(&metric_order(b)));
            // a metric absent from every trial has no mean and is left out
            let metrics = names
                .into_iter()
                .filter_map(|name| {
                    let present: Vec<f64> = metrics[name].iter().flatten().copied().collect();
                    if present.is_empty() {
                        return None;
                    }
                    let (mean, std) = mean_std(&present);
                    Some(MetricStat { metric: name.clone(), mean, std, n: present.len() })
                })
                .collect();
            PolicySummary { policy: pr.policy, n_trials: pr.trials.len(), metrics }
        })
        .collect();

    let mut comparisons = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..per_policy.len() {
        for j in i + 1..per_policy.len() {
            let (pa, ma) = &per_policy[i];
            let (pb, mb) = &per_policy[j];
            let mut names: Vec<&String> = ma.keys().filter(|k| mb.contains_key(*k)).collect();
            names.sort_by(|a, b| metric_order(a).cmp(&metric_order(b)));
            for name in names {
                let (xa, xb) = (&ma[name], &mb[name]);
                let (test, n, p) = if cfg.paired && xa.len() == xb.len() {
                    let (a, b): (Vec<f64>, Vec<f64>) = xa
                        .iter()
                        .zip(xb)
                        .filter_map(|(a, b)| Some((*a.as_ref()?, *b.as_ref()?)))
                        .unzip();
                    if a.is_empty() {
                        continue;
                    }
                    let p = paired_permutation_test(&a, &b, cfg.resamples, &mut rng)?;
                    ("paired_sign_flip", a.len(), p)
                } else {
                    let a: Vec<f64> = xa.iter().flatten().copied().collect();
                    let b: Vec<f64> = xb.iter().flatten().copied().collect();
                    if a.is_empty() || b.is_empty() {
                        continue;
                    }
                    let p = permutation_test(&a, &b, cfg.resamples, &mut rng)?;
                    ("two_sample", a.len().min(b.len()), p)
                };
                comparisons.push(PairwiseComparison {
                    policy_a: *pa,
                    policy_b: *pb,
                    metric: name.clone(),
                    test: test.into(),
                    n,
                    p_value: p,
                });
            }
        }
    }

    Ok(ExperimentSummary { policies, comparisons })
}
