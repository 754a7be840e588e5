//! `arfa simulate | compare | calibrate`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arfa_core::{metrics, run_experiment, summarize, OperatorProfile, Policy, PolicyResults};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::beliefs::BeliefFile;
use crate::report::{self, Format};
use crate::scenario::{OptimizerSection, Overrides, PhaseKind, Scenario};
use crate::{calibrate, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "arfa", version, about = "Allocate robot failures to human operators and evaluate allocation policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one policy over every trial of a scenario.
    Simulate(SimulateArgs),
    /// Run several policies on shared failure streams and test the differences.
    Compare(CompareArgs),
    /// Replay an exported ledger through the belief optimizer.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file; the built-in default scenario when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "ARFA_OUT_DIR", default_value = "results")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub failures: Option<usize>,
    /// Time threshold in seconds.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Optimizer steps per belief update.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Summary format; both when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Belief file with starting bounds.
    #[arg(long)]
    pub initial_beliefs: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub phase_mode: Option<PhaseKind>,
    #[arg(long)]
    pub acquisition_length: Option<usize>,
    /// Keep the bounds learned during acquisition fixed afterwards.
    #[arg(long)]
    pub freeze_beliefs: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value = "arfa")]
    pub policy: Policy,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated; the scenario's policy list when omitted.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<Policy>>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Ledger CSV as exported by `simulate` or `compare`.
    #[arg(long)]
    pub ledger: PathBuf,
    /// Scenario supplying optimizer settings and operator order.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub policy: Option<Policy>,
    #[arg(long)]
    pub trial: Option<u64>,
    #[arg(long)]
    pub initial_beliefs: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Output directory; the bounds go to `beliefs.json`.
    #[arg(long, env = "ARFA_OUT_DIR", default_value = "results")]
    pub out: PathBuf,
}

pub const EFFECTIVE_CONFIG: &str = "effective_config.json";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const COMPARISONS_CSV: &str = "comparisons.csv";
pub const LEDGER_CSV: &str = "ledger.csv";
pub const TRAJECTORIES_CSV: &str = "trajectories.csv";
pub const BELIEFS_JSON: &str = "beliefs.json";

/// Parses the process arguments, runs the command and maps the outcome to
/// an exit status.
pub fn main() -> ExitCode {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => run_policies(&a.run, Some(vec![a.policy]), "simulate"),
        Command::Compare(a) => {
            let policies = a.policies.clone();
            if let Some(p) = &policies {
                check_compare_policies(p)?;
            }
            run_policies(&a.run, policies, "compare")
        }
        Command::Calibrate(a) => run_calibrate(&a),
    }
}

fn check_compare_policies(policies: &[Policy]) -> Result<()> {
    if policies.len() < 2 {
        return Err(Error::Usage(format!("compare needs at least two policies, got {}", policies.len())));
    }
    if let Some(p) = policies.iter().enumerate().find_map(|(i, p)| policies[..i].contains(p).then_some(p)) {
        return Err(Error::Usage(format!("policy `{p}` listed twice")));
    }
    Ok(())
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p),
        None => Ok(Scenario::default()),
    }
}

#[derive(Serialize)]
struct RunEcho<'a> {
    command: &'a str,
    scenario: Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_beliefs: Option<BeliefFile>,
}

fn run_policies(args: &RunArgs, policies: Option<Vec<Policy>>, command: &str) -> Result<()> {
    let mut scenario = load_scenario(args.scenario.as_deref())?;
    Overrides {
        seed: args.seed,
        trials: args.trials,
        failures: args.failures,
        policies,
        epsilon: args.epsilon,
        bin_width: args.bin_width,
        steps: args.steps,
        phase_mode: args.phase_mode,
        acquisition_length: args.acquisition_length,
        freeze_beliefs: args.freeze_beliefs,
    }
    .apply(&mut scenario);
    if command == "compare" {
        check_compare_policies(&scenario.experiment.policies)?;
    }
    scenario.validate().map_err(|e| Error::Usage(format!("invalid configuration: {e}")))?;

    let operators = scenario.operators();
    let initial_file = args.initial_beliefs.as_deref().map(BeliefFile::load).transpose()?;
    let initial = initial_file.as_ref().map(|f| f.initial_for(&operators)).transpose()?;

    let policies = scenario.experiment.policies.clone();
    let results = run_experiment(&scenario.experiment_config(&policies), &operators, initial.as_deref())?;
    let summary = summarize(&results, &scenario.summary_config())?;

    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| Error::write(out, e))?;
    let echo = RunEcho {
        command,
        scenario: scenario.resolved(),
        initial_beliefs: initial_file.map(|_| {
            let profiles = operators
                .iter()
                .zip(initial.unwrap_or_default())
                .map(|(o, b)| OperatorProfile { id: o.id.clone(), beliefs: b })
                .collect();
            BeliefFile::new(profiles)
        }),
    };
    report::write_json(&echo, &out.join(EFFECTIVE_CONFIG))?;
    if args.format != Some(Format::Csv) {
        report::emit_report(&summary, Format::Json, &out.join(SUMMARY_JSON))?;
    }
    if args.format != Some(Format::Json) {
        report::emit_report(&summary, Format::Csv, &out.join(SUMMARY_CSV))?;
        report::write_comparisons(&summary, &out.join(COMPARISONS_CSV))?;
    }
    report::write_ledger(&results, &out.join(LEDGER_CSV))?;
    report::write_trajectories(&results, &out.join(TRAJECTORIES_CSV))?;

    print_overview(&results, &summary);
    println!("outputs written to {}", out.display());
    Ok(())
}

fn print_overview(results: &[PolicyResults], summary: &arfa_core::ExperimentSummary) {
    for p in &summary.policies {
        let team = p.metric(metrics::TEAM_SUCCESS);
        let idle = p.metric(metrics::IDLE_TIME);
        print!("{:<12} trials {:>3}", p.policy.to_string(), p.n_trials);
        if let Some(m) = team {
            print!("  team success {:.3} ± {:.3}", m.mean, m.std);
        }
        if let Some(m) = idle {
            print!("  idle {:.1} s", m.mean);
        }
        println!();
    }
    if results.len() >= 2 {
        for c in summary.comparisons.iter().filter(|c| c.metric == metrics::TEAM_SUCCESS) {
            println!("{} vs {}: team success p = {:.4} ({})", c.policy_a, c.policy_b, c.p_value, c.test);
        }
    }
}

#[derive(Serialize)]
struct CalibrateEcho<'a> {
    command: &'a str,
    ledger: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<Policy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trial: Option<u64>,
    records: usize,
    optimizer: OptimizerSection,
    initial: Vec<OperatorProfile>,
}

fn run_calibrate(args: &CalibrateArgs) -> Result<()> {
    let rows = report::read_ledger(&args.ledger)?;
    let rows: Vec<_> = rows
        .into_iter()
        .filter(|r| args.policy.is_none_or(|p| r.policy == p) && args.trial.is_none_or(|t| r.trial == t))
        .collect();
    let mut runs: Vec<(Policy, u64)> = rows.iter().map(|r| (r.policy, r.trial)).collect();
    runs.sort();
    runs.dedup();
    if runs.len() > 1 {
        return Err(Error::Usage(format!(
            "{} holds {} runs; select one with --policy and --trial",
            args.ledger.display(),
            runs.len()
        )));
    }
    let records: Vec<_> = rows.iter().map(|r| r.to_record().expect("validated while reading")).collect();

    let mut scenario = load_scenario(args.scenario.as_deref())?;
    Overrides { bin_width: args.bin_width, steps: args.steps, ..Default::default() }.apply(&mut scenario);
    let config = scenario.optimizer_config();
    config.validate().map_err(|e| Error::Usage(format!("invalid optimizer settings: {e}")))?;

    let beliefs = args.initial_beliefs.as_deref().map(BeliefFile::load).transpose()?;
    let initial: Vec<OperatorProfile> = match (&args.scenario, &beliefs) {
        (Some(_), _) => {
            let ops = scenario.operators();
            let sets = match &beliefs {
                Some(f) => f.initial_for(&ops)?,
                None => vec![arfa_core::BeliefSet::UNINFORMED; ops.len()],
            };
            ops.into_iter().zip(sets).map(|(o, b)| OperatorProfile { id: o.id, beliefs: b }).collect()
        }
        (None, Some(f)) => f.operators.clone(),
        (None, None) => Vec::new(),
    };

    let profiles = calibrate::replay(&records, initial.clone(), &config)?;

    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| Error::write(out, e))?;
    let echo = CalibrateEcho {
        command: "calibrate",
        ledger: args.ledger.display().to_string(),
        policy: args.policy,
        trial: args.trial,
        records: records.len(),
        optimizer: scenario.optimizer,
        initial,
    };
    report::write_json(&echo, &out.join(EFFECTIVE_CONFIG))?;
    let path = out.join(BELIEFS_JSON);
    BeliefFile::new(profiles.clone()).save(&path)?;
    for p in &profiles {
        let b = &p.beliefs;
        println!(
            "{:<12} physical [{:.3}, {:.3}]  cognitive [{:.3}, {:.3}]  responsiveness [{:.3}, {:.3}]",
            p.id.to_string(),
            b.physical.lower,
            b.physical.upper,
            b.cognitive.lower,
            b.cognitive.upper,
            b.responsiveness.lower,
            b.responsiveness.upper
        );
    }
    println!("beliefs written to {}", path.display());
    Ok(())
}
