//! `supply` command-line frontend.
//!
//! Exit codes: 0 success, 1 usage/I/O/parse error, 2 infeasible scenario.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::energy::EnergyParams;
use crate::error::{PlanError, Result};
use crate::grouping::ModeChoice;
use crate::report::{self, Diagnostic, PlanDocument};
use crate::rf_link::McsTable;
use crate::scenario::{self, PlannerConfig, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "supply", version, about = "Energy- and QoS-aware UAV access point planner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a single scenario file.
    Plan(PlanArgs),
    /// Generate and plan a batch of random scenarios.
    Batch(BatchArgs),
    /// Summarize a batch CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    Exact,
    Heuristic,
}

impl From<ModeArg> for ModeChoice {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => ModeChoice::Auto,
            ModeArg::Exact => ModeChoice::Exact,
            ModeArg::Heuristic => ModeChoice::Heuristic,
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// UAV parameter file (key = value).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// MCS table CSV (min_snr_db,aggregate_rate_mbps).
    #[arg(long)]
    pub mcs: Option<PathBuf>,
    /// SNR margin on top of every MCS threshold, dB.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Grouping solver.
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Plan document path; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Overrides the scenario's FAP altitude, m.
    #[arg(long)]
    pub altitude: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub gus: usize,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Side length of the square area, m.
    #[arg(long, default_value_t = 100.0)]
    pub side: f64,
    /// Channel capacity, Mbit/s.
    #[arg(long, default_value_t = 500.0)]
    pub capacity: f64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "50,90")]
    pub percentiles: Vec<f64>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

impl ModelArgs {
    fn config(&self) -> Result<PlannerConfig> {
        let mut cfg = PlannerConfig::default();
        if let Some(p) = &self.params {
            cfg.params = EnergyParams::from_path(p)?;
        }
        if let Some(p) = &self.mcs {
            cfg.table = McsTable::from_path(p)?;
        }
        if let Some(m) = self.margin {
            cfg.budget.snr_margin = m;
            cfg.budget.validate()?;
        }
        cfg.mode = self.mode.into();
        Ok(cfg)
    }
}

fn with_path(path: &Path, e: std::io::Error) -> PlanError {
    PlanError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| with_path(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| with_path(path, e))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Plan(a) => cmd_plan(a, stdout, stderr),
        Command::Batch(a) => cmd_batch(a, stdout),
        Command::Report(a) => cmd_report(a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn cmd_plan(a: &PlanArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let mut sc = Scenario::from_json(&read_file(&a.scenario)?)?;
    if let Some(z) = a.altitude {
        sc.altitude = z;
        sc.validate()?;
    }
    let cfg = a.model.config()?;
    match scenario::run_pipeline(&sc, &cfg) {
        Ok(plan) => {
            let doc = PlanDocument::new(&sc, plan);
            let json = doc.to_json() + "\n";
            match &a.out {
                Some(p) => write_file(p, &json)?,
                None => stdout.write_all(json.as_bytes())?,
            }
            if let Some(p) = &a.svg {
                write_file(p, report::plan_svg(&doc))?;
            }
            for w in &doc.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            Ok(EXIT_OK)
        }
        Err(e) if e.is_infeasible() => {
            let diag = Diagnostic::from_error(&sc.label, &e);
            let json = serde_json::to_string_pretty(&diag)? + "\n";
            let _ = writeln!(stderr, "infeasible: {e}");
            let _ = stderr.write_all(json.as_bytes());
            if let Some(p) = &a.out {
                write_file(p, &json)?;
            }
            Ok(EXIT_INFEASIBLE)
        }
        Err(e) => Err(e),
    }
}

fn cmd_batch(a: &BatchArgs, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = a.model.config()?;
    let rows = scenario::run_batch(a.gus, a.count as usize, a.seed, (a.side, a.side), a.capacity, &cfg)?;
    let mut buf = Vec::new();
    scenario::write_batch_csv(&rows, &mut buf)?;
    write_file(&a.out, buf)?;
    writeln!(
        stdout,
        "{} scenarios, mean FAPs {:.3}, written to {}",
        rows.len(),
        scenario::mean_faps(&rows),
        a.out.display()
    )?;
    Ok(EXIT_OK)
}

fn cmd_report(a: &ReportArgs, stdout: &mut dyn Write) -> Result<i32> {
    let text = read_file(&a.input)?;
    let rows = scenario::read_batch_csv(text.as_bytes())?;
    let stats = scenario::energy_ratio_stats(&rows, &a.percentiles)?;
    writeln!(stdout, "scenarios  {}", rows.len())?;
    writeln!(stdout, "mean_faps  {:.3}", scenario::mean_faps(&rows))?;
    writeln!(stdout, "percentile energy_ratio")?;
    for s in &stats {
        writeln!(stdout, "p{:<9} {:.4}", s.percentile, s.energy_ratio)?;
    }
    if let Some(p) = &a.svg {
        write_file(p, report::cdf_svg(&rows))?;
    }
    Ok(EXIT_OK)
}
