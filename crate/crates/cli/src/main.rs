use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use modereg::simgen::{self, ErrorCase, ScenarioSpec};
use modereg::summary::{render_table, summary_report, SummaryReport};
use modereg::window::WindowRule;
use modereg::{io, Chain};

mod fit;

#[derive(Parser)]
#[command(name = "modereg", version, about = "Bayesian linear mode regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a posterior and write chain dumps plus a JSON summary.
    Fit(FitArgs),
    /// Generate a simulation dataset.
    Simulate(SimulateArgs),
    /// Recompute the JSON summary from chain dumps.
    Summarize(SummarizeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Pbmr,
    Nbmr,
    Elbmr,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Pbmr => "pbmr",
            Method::Nbmr => "nbmr",
            Method::Elbmr => "elbmr",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    Empirical,
    Chebyshev,
    Silverman,
}

impl From<RuleArg> for WindowRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Empirical => WindowRule::Empirical,
            RuleArg::Chebyshev => WindowRule::Chebyshev,
            RuleArg::Silverman => WindowRule::Silverman,
        }
    }
}

/// One end of the σ prior interval: a number or a rule name.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Endpoint {
    Value(f64),
    Rule(WindowRule),
}

fn parse_endpoint(s: &str) -> Result<Endpoint> {
    if let Ok(v) = s.trim().parse::<f64>() {
        return Ok(Endpoint::Value(v));
    }
    Ok(Endpoint::Rule(s.parse::<WindowRule>()?))
}

fn parse_endpoints(s: &str) -> std::result::Result<(Endpoint, Endpoint), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    Ok((parse_endpoint(a).map_err(|e| e.to_string())?, parse_endpoint(b).map_err(|e| e.to_string())?))
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let lo = a.trim().parse::<f64>().map_err(|e| format!("`{a}`: {e}"))?;
    let hi = b.trim().parse::<f64>().map_err(|e| format!("`{b}`: {e}"))?;
    Ok((lo, hi))
}

#[derive(Args)]
pub struct FitArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column; all other columns are covariates.
    #[arg(long)]
    pub response: String,
    #[arg(long)]
    pub no_intercept: bool,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Fixed window half-width.
    #[arg(long, conflicts_with_all = ["sigma_rule", "sigma_prior"])]
    pub sigma: Option<f64>,
    /// Fixed window half-width from a rule of thumb.
    #[arg(long, value_enum, conflicts_with = "sigma_prior")]
    sigma_rule: Option<RuleArg>,
    /// Uniform prior on σ (pbmr); each end is a number or a rule name.
    /// Defaults to silverman,chebyshev.
    #[arg(long, value_parser = parse_endpoints)]
    pub sigma_prior: Option<(Endpoint, Endpoint)>,
    /// Apply window rules to the raw response instead of OLS residuals.
    #[arg(long)]
    pub raw_scale: bool,
    /// Kept draws per chain.
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 10_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 2)]
    pub chains: usize,
    /// Chain c is seeded with SEED + c.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Normal(0, SD²) coefficient priors; pbmr and elbmr default to flat,
    /// nbmr to SD = 100.
    #[arg(long)]
    pub beta_prior_sd: Option<f64>,
    /// Stick-breaking truncation level (nbmr).
    #[arg(long)]
    pub truncation: Option<usize>,
    /// Base-distribution endpoint d (nbmr); defaults to the chebyshev rule on
    /// OLS residuals, widened if needed to cover every OLS residual.
    #[arg(long)]
    pub dp_d: Option<f64>,
    /// Uniform prior on the concentration M (nbmr).
    #[arg(long, value_parser = parse_pair)]
    pub dp_m_prior: Option<(f64, f64)>,
    /// Also print a table of the summary.
    #[arg(long)]
    pub table: bool,
    /// Output prefix for PREFIX.summary.json and PREFIX.chain<c>.csv.
    #[arg(long)]
    pub out: PathBuf,
}

impl FitArgs {
    pub fn sigma_rule(&self) -> Option<WindowRule> {
        self.sigma_rule.map(Into::into)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    example: u8,
    /// Error distribution for example 1: normal, fisherz or contaminated.
    #[arg(long)]
    case: Option<ErrorCase>,
    /// Log-gamma shape for example 2.
    #[arg(long)]
    alpha: Option<f64>,
    /// Heteroscedasticity for example 2.
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Chain CSV dumps to pool.
    #[arg(required = true)]
    chains: Vec<PathBuf>,
    /// Method label recorded in the summary.
    #[arg(long, default_value = "unknown")]
    method: String,
    /// Seed recorded in the summary.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    table: bool,
}

fn write_json(path: &Path, report: &SummaryReport) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let spec = match args.example {
        1 => {
            if args.alpha.is_some() || args.v.is_some() {
                bail!("--alpha and --v apply only to --example 2");
            }
            let case = args.case.context("--example 1 requires --case {normal|fisherz|contaminated}")?;
            ScenarioSpec::<f64>::example1(case, args.n, args.seed)
        }
        _ => {
            if args.case.is_some() {
                bail!("--case applies only to --example 1");
            }
            let (Some(alpha), Some(v)) = (args.alpha, args.v) else {
                bail!("--example 2 requires --alpha and --v");
            };
            ScenarioSpec::example2(alpha, v, args.n, args.seed)
        }
    };
    let sim = simgen::simulate(&spec)?;
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    io::write_dataset(file, &sim.data)?;
    Ok(())
}

fn run_summarize(args: &SummarizeArgs) -> Result<()> {
    let chains = args
        .chains
        .iter()
        .map(|p| io::read_chain_path::<f64>(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<Chain<f64>>>>()?;
    let report = summary_report(&chains, &args.method, args.seed)?;
    match &args.out {
        Some(path) => write_json(path, &report)?,
        None => {
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
        }
    }
    if args.table {
        print!("{}", render_table(&report));
    }
    Ok(())
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Fit(args) => fit::run_fit(&args),
        Command::Simulate(args) => run_simulate(&args),
        Command::Summarize(args) => run_summarize(&args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
