//! The `tokbrier` command line: argument definitions and one function per
//! subcommand. Exit codes are 0 on success, 1 on validation or I/O errors
//! and 2 when a properness check fails.

pub mod config;
pub mod jsonl;
pub mod svg;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::apps::{
    cascade_curve, random_selection_curve, simulate_cascade, simulate_self_correction, write_curve_csv, CurvePoint,
    SimMode, SimOutcome,
};
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::psr::{verify_rule, ScoringRule, VerificationReport};
use crate::synthetic::{bayes_optimal_records, confidence_records, generate, EtaFunction};
use crate::toy::{train, ToyConfidenceHead};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "tokbrier",
    version,
    about = "Tokenized Brier score toolkit for verbalized confidence"
)]
pub struct Cli {
    /// Config file of `key = value` lines (default: $TOKBRIER_CONFIG).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ECE, AUROC and accuracy of a JSONL record file.
    Eval(EvalArgs),
    /// Brute-force check that the nearest token minimizes the conditional risk.
    VerifyPsr(VerifyArgs),
    /// Train a toy confidence head on synthetic data.
    Train(TrainArgs),
    /// Confidence-gated self-correction on a record file.
    SimulateSelfcorrect(SelfCorrectArgs),
    /// Budgeted cascade to a stronger model on a record file.
    SimulateCascade(CascadeArgs),
    /// Render a diagram or curve CSV as SVG.
    Plot(PlotArgs),
    /// Write synthetic records with known correctness probabilities.
    Generate(GenerateArgs),
    /// Print the resolved configuration as a config file.
    ShowConfig,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub scale_n: Option<usize>,
    /// Metrics report JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reliability-diagram CSV.
    #[arg(long)]
    pub diagram: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub scale_n: Option<usize>,
    /// Grid size; eta runs over k / (points - 1).
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Check these eta values instead of a grid; repeatable.
    #[arg(long = "eta")]
    pub etas: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = RuleArg::Brier)]
    pub rule: RuleArg,
    /// JSON array of per-eta reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RuleArg {
    /// Tokenized Brier score.
    Brier,
    /// Expected absolute error; not proper, useful as a negative control.
    Absolute,
}

impl From<RuleArg> for ScoringRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Brier => ScoringRule::TokenizedBrier,
            RuleArg::Absolute => ScoringRule::TokenizedAbsolute,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Ground-truth eta, e.g. `constant:0.7`, `piecewise:0:0.2,0.8`,
    /// `logistic:1.5,-1:0.3`.
    #[arg(long)]
    pub eta: EtaFunction,
    /// Trained head JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Training report JSON (default: `<out stem>.report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelfCorrectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub strong_accuracy: Option<f64>,
    #[arg(long)]
    pub flip_risk: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outcome JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-record trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CascadeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated budgets for the expected-accuracy curve.
    #[arg(long)]
    pub budgets: Option<String>,
    /// Budget for the sampled simulation.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub strong_accuracy: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Curves and sampled outcome as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Lowest-confidence-first curve as `budget,expected_accuracy` CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Predictor {
    /// Reports the token nearest to the true eta.
    Oracle,
    /// Reports one minus the oracle's confidence.
    Anti,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub eta: EtaFunction,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub scale_n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Predictor::Oracle)]
    pub predictor: Predictor,
    #[arg(long)]
    pub out: PathBuf,
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    VerificationFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::VerificationFailed => 2,
        }
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn warn(message: &str) {
    eprintln!("warning: {message}");
}

pub fn run(cli: Cli) -> Result<Status> {
    let mut config = RunConfig::resolve(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Eval(args) => cmd_eval(&mut config, &args),
        Command::VerifyPsr(args) => cmd_verify_psr(&mut config, &args),
        Command::Train(args) => cmd_train(&config, &args),
        Command::SimulateSelfcorrect(args) => cmd_simulate_selfcorrect(&mut config, &args),
        Command::SimulateCascade(args) => cmd_simulate_cascade(&mut config, &args),
        Command::Plot(args) => cmd_plot(&args),
        Command::Generate(args) => cmd_generate(&mut config, &args),
        Command::ShowConfig => {
            print!("{}", config.to_text());
            Ok(Status::Success)
        }
    }
}

pub fn cmd_eval(config: &mut RunConfig, args: &EvalArgs) -> Result<Status> {
    if let Some(b) = args.bins {
        config.bins = b;
    }
    if let Some(n) = args.scale_n {
        config.scale_n = n;
    }
    let records = jsonl::read_records(&args.input, Some(config.scale()?))?;
    let (report, diagram) = evaluate(&records, config.bins)?;
    if report.auroc.is_none() {
        warn("AUROC is undefined because every record has the same label; reporting null");
    }
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    if let Some(path) = &args.diagram {
        let mut buf = Vec::new();
        diagram.write_csv(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    Ok(Status::Success)
}

/// `points` evenly spaced values on `[0, 1]`, both ends included.
pub fn eta_grid(points: usize) -> Result<Vec<f64>> {
    match points {
        0 => Err(Error::InvalidArgument("points must be at least 1".into())),
        1 => Ok(vec![0.5]),
        p => Ok((0..p).map(|k| k as f64 / (p - 1) as f64).collect()),
    }
}

pub fn cmd_verify_psr(config: &mut RunConfig, args: &VerifyArgs) -> Result<Status> {
    if let Some(n) = args.scale_n {
        config.scale_n = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let scale = config.scale()?;
    let etas = if args.etas.is_empty() {
        eta_grid(args.points)?
    } else {
        args.etas.clone()
    };
    let rule = ScoringRule::from(args.rule);
    let reports: Vec<VerificationReport> = etas
        .par_iter()
        .enumerate()
        .map(|(k, &eta)| verify_rule(rule, eta, scale, args.samples, config.seed.wrapping_add(k as u64)))
        .collect::<Result<_>>()?;
    if let Some(out) = &args.out {
        write_json(out, &reports)?;
    }
    let failing: Vec<&VerificationReport> = reports.iter().filter(|r| !r.holds).collect();
    let ties = reports.iter().filter(|r| r.tie).count();
    println!(
        "checked {} eta values at n = {} with {} samples each; {} ties, {} failures",
        reports.len(),
        scale.n(),
        args.samples,
        ties,
        failing.len()
    );
    if failing.is_empty() {
        return Ok(Status::Success);
    }
    for r in failing.iter().take(20) {
        println!(
            "  eta = {}: nearest token {} but risk-optimal {:?}, {} sampled points beat the vertex minimum",
            r.eta, r.nearest_token, r.argmin_vertices, r.sampled_violations
        );
    }
    if failing.len() > 20 {
        println!("  ... {} more", failing.len() - 20);
    }
    Ok(Status::VerificationFailed)
}

fn report_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("head");
    out.with_file_name(format!("{stem}.report.json"))
}

pub fn cmd_train(config: &RunConfig, args: &TrainArgs) -> Result<Status> {
    let scale = config.scale()?;
    let train_cfg = config.train_config();
    train_cfg.validate()?;
    let seed = config.seed;
    let train_set = generate(&args.eta, config.train_size, config.dim, seed)?;
    let heldout = generate(&args.eta, config.test_size, config.dim, seed.wrapping_add(1))?;
    let mut head = ToyConfidenceHead::new(config.dim, config.hidden, scale, seed.wrapping_add(2))?;
    let report = train(&mut head, &train_set, &heldout, &train_cfg)?;

    let mut head_text = head.to_json()?;
    head_text.push('\n');
    write_atomic(&args.out, head_text.as_bytes())?;
    let report_out = args.report.clone().unwrap_or_else(|| report_path(&args.out));
    write_json(&report_out, &report)?;

    if !report.loss_increase_epochs.is_empty() {
        warn(&format!(
            "full-set training loss rose at epochs {:?}",
            report.loss_increase_epochs
        ));
    }
    println!(
        "trained {} epochs: loss {:.6} -> {:.6}; held-out ECE {:.4} (untrained {:.4}, oracle {:.4}); oracle token agreement {:.4}",
        train_cfg.epochs,
        report.epoch_loss.first().copied().unwrap_or(f64::NAN),
        report.epoch_loss.last().copied().unwrap_or(f64::NAN),
        report.final_ece,
        report.untrained_ece,
        report.oracle_ece,
        report.oracle_token_agreement
    );
    println!("wrote {} and {}", args.out.display(), report_out.display());
    Ok(Status::Success)
}

fn write_trace_csv(path: &Path, outcome: &SimOutcome) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "confidence", "decision", "correct_before", "correct_after"])?;
    for t in &outcome.trace {
        let decision = match t.decision {
            crate::apps::Decision::Kept => "kept",
            crate::apps::Decision::Refined => "refined",
        };
        w.write_record([
            t.id.clone(),
            t.confidence.to_string(),
            decision.to_owned(),
            u8::from(t.correct_before).to_string(),
            u8::from(t.correct_after).to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn cmd_simulate_selfcorrect(config: &mut RunConfig, args: &SelfCorrectArgs) -> Result<Status> {
    if let Some(v) = args.threshold {
        config.threshold = v;
    }
    if let Some(v) = args.strong_accuracy {
        config.strong_accuracy = v;
    }
    if let Some(v) = args.flip_risk {
        config.flip_risk = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    let records = jsonl::read_records(&args.input, None)?;
    let outcome = simulate_self_correction(&records, &config.sim_policy())?;
    println!(
        "accuracy {:.4} -> {:.4}; refined {} of {}",
        outcome.accuracy_before,
        outcome.accuracy_after,
        outcome.triggered_count,
        records.len()
    );
    if let Some(out) = &args.out {
        write_json(out, &outcome)?;
    }
    if let Some(path) = &args.trace {
        write_trace_csv(path, &outcome)?;
    }
    Ok(Status::Success)
}

#[derive(Serialize)]
struct CascadeOutput {
    strong_accuracy: f64,
    curve: Vec<CurvePoint>,
    random_curve: Vec<CurvePoint>,
    outcome: SimOutcome,
}

pub fn cmd_simulate_cascade(config: &mut RunConfig, args: &CascadeArgs) -> Result<Status> {
    if let Some(b) = &args.budgets {
        config.budgets = config::parse_budgets(b)?;
    }
    if let Some(v) = args.budget {
        config.budget = v;
    }
    if let Some(v) = args.strong_accuracy {
        config.strong_accuracy = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    let records = jsonl::read_records(&args.input, None)?;
    let policy = crate::apps::SimPolicy {
        mode: SimMode::Cascade,
        ..config.sim_policy()
    };
    let curve = cascade_curve(&records, &policy, &config.budgets)?;
    let labels: Vec<f64> = records.iter().map(|r| r.label().as_f64()).collect();
    let random_curve = random_selection_curve(&labels, policy.strong_accuracy, &config.budgets)?;
    let outcome = simulate_cascade(&records, &policy)?;
    for (c, r) in curve.iter().zip(&random_curve) {
        println!(
            "budget {:>6}: expected accuracy {:.4} (random selection {:.4})",
            c.budget, c.expected_accuracy, r.expected_accuracy
        );
    }
    println!(
        "sampled run at budget {}: accuracy {:.4} -> {:.4}",
        policy.budget, outcome.accuracy_before, outcome.accuracy_after
    );
    if let Some(path) = &args.curve {
        let mut buf = Vec::new();
        write_curve_csv(&curve, &mut buf)?;
        write_atomic(path, &buf)?;
    }
    if let Some(out) = &args.out {
        write_json(
            out,
            &CascadeOutput {
                strong_accuracy: policy.strong_accuracy,
                curve,
                random_curve,
                outcome,
            },
        )?;
    }
    Ok(Status::Success)
}

pub fn cmd_plot(args: &PlotArgs) -> Result<Status> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let data = svg::parse_plot_csv(&text)?;
    write_atomic(&args.out, data.to_svg().as_bytes())?;
    Ok(Status::Success)
}

pub fn cmd_generate(config: &mut RunConfig, args: &GenerateArgs) -> Result<Status> {
    if let Some(v) = args.dim {
        config.dim = v;
    }
    if let Some(v) = args.scale_n {
        config.scale_n = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    let scale = config.scale()?;
    let data = generate(&args.eta, args.count, config.dim, config.seed)?;
    let oracle = bayes_optimal_records(&data, scale)?;
    let records = match args.predictor {
        Predictor::Oracle => oracle,
        Predictor::Anti => {
            let mut flipped = oracle.iter().map(|r| 1.0 - r.confidence());
            confidence_records(&data, "anti_oracle", |_| Ok(flipped.next().unwrap_or(0.5)))?
        }
    };
    write_atomic(&args.out, jsonl::records_to_string(&records)?.as_bytes())?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    Ok(Status::Success)
}
