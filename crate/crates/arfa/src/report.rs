//! Report and export files: summary CSV/JSON, pairwise comparisons, belief
//! trajectories and the resolution ledger.
//!
//! Floats are written in shortest round-trip form, so every exported value
//! parses back to the same `f64`.

use std::fs;
use std::io;
use std::path::Path;

use arfa_core::{
    CapabilityDimension, ExperimentSummary, FailureId, FailureRequirements, Policy, PolicyResults,
    ResolutionRecord,
};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::write(path, io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::write(path, e))
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let fail = |e: csv::Error| Error::write(path, io::Error::other(e));
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::write(path, e.into_error()))?;
    fs::write(path, bytes).map_err(|e| Error::write(path, e))
}

fn write_header_only(header: &[&str], path: &Path) -> Result<()> {
    fs::write(path, format!("{}\n", header.join(","))).map_err(|e| Error::write(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: Policy,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn summary_rows(summary: &ExperimentSummary) -> Vec<SummaryRow> {
    summary
        .policies
        .iter()
        .flat_map(|p| {
            p.metrics.iter().map(move |m| SummaryRow {
                policy: p.policy,
                metric: m.metric.clone(),
                mean: m.mean,
                std: m.std,
                n: m.n,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy_a: Policy,
    pub policy_b: Policy,
    pub metric: String,
    pub test: String,
    pub n: usize,
    pub p_value: f64,
}

/// Writes the summary: one `policy,metric,mean,std,n` row per metric as
/// CSV, or the whole structure as JSON.
pub fn emit_report(summary: &ExperimentSummary, format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Json => write_json(summary, path),
        Format::Csv => {
            let rows = summary_rows(summary);
            if rows.is_empty() {
                write_header_only(&["policy", "metric", "mean", "std", "n"], path)
            } else {
                write_rows(rows, path)
            }
        }
    }
}

pub fn write_comparisons(summary: &ExperimentSummary, path: &Path) -> Result<()> {
    if summary.comparisons.is_empty() {
        return write_header_only(&["policy_a", "policy_b", "metric", "test", "n", "p_value"], path);
    }
    write_rows(
        summary.comparisons.iter().map(|c| ComparisonRow {
            policy_a: c.policy_a,
            policy_b: c.policy_b,
            metric: c.metric.clone(),
            test: c.test.clone(),
            n: c.n,
            p_value: c.p_value,
        }),
        path,
    )
}

pub fn read_summary_json(path: &Path) -> Result<ExperimentSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub policy: Policy,
    pub trial: u64,
    pub failure_index: usize,
    pub operator: String,
    pub dimension: CapabilityDimension,
    pub lower: f64,
    pub upper: f64,
}

pub fn trajectory_rows(results: &[PolicyResults]) -> impl Iterator<Item = TrajectoryRow> + '_ {
    results.iter().flat_map(|pr| {
        pr.trials.iter().flat_map(move |t| {
            (0..t.n_failures()).flat_map(move |i| {
                t.operator_ids.iter().zip(&t.trajectories).flat_map(move |(id, traj)| {
                    CapabilityDimension::ALL.into_iter().map(move |dim| {
                        let b = traj[i].get(dim);
                        TrajectoryRow {
                            policy: pr.policy,
                            trial: t.trial_index,
                            failure_index: i,
                            operator: id.to_string(),
                            dimension: dim,
                            lower: b.lower,
                            upper: b.upper,
                        }
                    })
                })
            })
        })
    })
}

const TRAJECTORY_HEADER: [&str; 7] = ["policy", "trial", "failure_index", "operator", "dimension", "lower", "upper"];

/// One row per (trial, failure index, operator, dimension).
pub fn write_trajectories(results: &[PolicyResults], path: &Path) -> Result<()> {
    let mut rows = trajectory_rows(results).peekable();
    if rows.peek().is_none() {
        return write_header_only(&TRAJECTORY_HEADER, path);
    }
    write_rows(rows, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub policy: Policy,
    pub trial: u64,
    pub failure_id: u64,
    pub operator: String,
    pub physical: f64,
    pub cognitive: f64,
    pub urgency: f64,
    pub duration: f64,
    pub succeeded: bool,
}

impl LedgerRow {
    pub fn from_record(policy: Policy, trial: u64, r: &ResolutionRecord) -> Self {
        LedgerRow {
            policy,
            trial,
            failure_id: r.failure_id.0,
            operator: r.operator_id.to_string(),
            physical: r.requirements.physical,
            cognitive: r.requirements.cognitive,
            urgency: r.requirements.urgency,
            duration: r.duration,
            succeeded: r.succeeded,
        }
    }

    pub fn to_record(&self) -> std::result::Result<ResolutionRecord, String> {
        let requirements =
            FailureRequirements::new(self.physical, self.cognitive, self.urgency).map_err(|e| e.to_string())?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(format!("duration must be positive and finite, got {}", self.duration));
        }
        Ok(ResolutionRecord {
            failure_id: FailureId(self.failure_id),
            operator_id: self.operator.as_str().into(),
            duration: self.duration,
            succeeded: self.succeeded,
            requirements,
        })
    }
}

const LEDGER_HEADER: [&str; 9] =
    ["policy", "trial", "failure_id", "operator", "physical", "cognitive", "urgency", "duration", "succeeded"];

/// Every ledger record of every trial, in resolution order.
pub fn write_ledger(results: &[PolicyResults], path: &Path) -> Result<()> {
    let rows: Vec<LedgerRow> = results
        .iter()
        .flat_map(|pr| {
            pr.trials.iter().flat_map(move |t| {
                t.ledger.records().iter().map(move |r| LedgerRow::from_record(pr.policy, t.trial_index, r))
            })
        })
        .collect();
    if rows.is_empty() {
        return write_header_only(&LEDGER_HEADER, path);
    }
    write_rows(rows, path)
}

/// Reads a ledger export. Row numbers in errors are file line numbers.
pub fn read_ledger(path: &Path) -> Result<Vec<LedgerRow>> {
    let file = fs::File::open(path).map_err(|e| Error::read(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let bad = |row: u64, message: String| Error::BadRow { path: path.to_path_buf(), row, message };
    let headers = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let fallback = i as u64 + 2;
        let record = record.map_err(|e| bad(e.position().map_or(fallback, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(fallback, |p| p.line());
        let row: LedgerRow = record.deserialize(Some(&headers)).map_err(|e| bad(line, e.to_string()))?;
        row.to_record().map_err(|m| bad(line, m))?;
        rows.push(row);
    }
    Ok(rows)
}
