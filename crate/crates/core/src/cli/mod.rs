//! Command-line surface: `classify`, `verify-kernel` and `experiment`.
//!
//! Parameters come from an optional `--config` file (see [`params`]) and
//! are overridden by flags. Reports are JSON, written atomically to `--out`
//! or printed; run metadata goes to a sibling `<out>.meta.json` so the main
//! report stays byte-identical across runs. Exit codes: 0 decided or
//! passed, 2 inconclusive, 1 error or failed check.

mod commands;
pub mod params;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::criteria::{ClassifyOptions, DEAD_BAND};
use crate::error::{Error, Result};
use crate::heatkernel::KernelConstants;
use crate::report::{to_json, write_atomic, write_json};
use params::Params;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "heatlab", version, about = "Local existence laboratory for u_t - Δu = f(u)")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify f for L^q, L^1 or whole-space data.
    Classify(ClassifyArgs),
    /// Check the heat-kernel lower-bound constants on an (r, t) grid.
    VerifyKernel(VerifyArgs),
    /// Run a solver or data experiment.
    Experiment(ExperimentArgs),
}

macro_rules! pairs {
    ($s:expr; $($field:ident => $key:literal),* $(,)?) => {
        vec![$(($key, $s.$field.clone())),*]
    };
}

#[derive(Debug, Args)]
struct NonlinearityArgs {
    /// Expression in `s`, e.g. "s^2 + s".
    #[arg(long)]
    f: Option<String>,
    /// Built-in family: power, log_family, piecewise_power.
    #[arg(long)]
    builtin: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    p_low: Option<String>,
    #[arg(long)]
    p_high: Option<String>,
    #[arg(long)]
    knee: Option<String>,
}

impl NonlinearityArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        pairs!(self; f => "f", builtin => "builtin", p => "p", beta => "beta",
            p_low => "p_low", p_high => "p_high", knee => "knee")
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    out: Option<String>,
    /// CSV export path.
    #[arg(long)]
    csv: Option<String>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    f: NonlinearityArgs,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// bounded or whole_space.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    dead_band: Option<String>,
    #[command(flatten)]
    io: OutputArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    d: Option<String>,
    /// whole_space or dirichlet.
    #[arg(long)]
    variant: Option<String>,
    /// Comma-separated radii.
    #[arg(long)]
    r_grid: Option<String>,
    /// Comma-separated times; defaults to multiples of r^2.
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// Multiplies every constant; for falsification runs only.
    #[arg(long, hide = true)]
    inflate: Option<String>,
    #[command(flatten)]
    io: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ExperimentKind {
    Iterate,
    Simulate,
    LowerBound,
    Horizon,
    BlowupTrend,
    EquivalenceSuite,
}

impl ExperimentKind {
    fn name(self) -> &'static str {
        match self {
            ExperimentKind::Iterate => "iterate",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::LowerBound => "lower_bound",
            ExperimentKind::Horizon => "horizon",
            ExperimentKind::BlowupTrend => "blowup_trend",
            ExperimentKind::EquivalenceSuite => "equivalence_suite",
        }
    }
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    #[command(flatten)]
    f: NonlinearityArgs,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// Domain radius.
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    cells: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    /// Time horizon.
    #[arg(long = "T")]
    horizon: Option<String>,
    /// Supersolution factor.
    #[arg(long = "A")]
    a_factor: Option<String>,
    #[arg(long)]
    u0_l1: Option<String>,
    #[arg(long)]
    u0_radius: Option<String>,
    #[arg(long)]
    u0_amp: Option<String>,
    /// Truncation level, `a..b` for blowup_trend.
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    dt0: Option<String>,
    #[arg(long)]
    dt_max: Option<String>,
    #[arg(long)]
    adaptive: Option<String>,
    #[arg(long)]
    blowup_norm: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    /// certified or quadrature.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    ball_radius: Option<String>,
    #[arg(long)]
    amplitude: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    count: Option<String>,
    #[command(flatten)]
    io: OutputArgs,
}

impl ExperimentArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        let mut v = self.f.pairs();
        v.extend(pairs!(self;
            d => "d", q => "q", radius => "radius", cells => "cells", steps => "steps",
            horizon => "T", a_factor => "A", u0_l1 => "u0_l1", u0_radius => "u0_radius",
            u0_amp => "u0_amp", n => "N", epsilon => "epsilon", max_iter => "max_iter",
            tol => "tol", dt0 => "dt0", dt_max => "dt_max", adaptive => "adaptive",
            blowup_norm => "blowup_norm", variant => "variant", mode => "mode", mesh => "mesh",
            ball_radius => "ball_radius", amplitude => "amplitude", t => "t", delta => "delta",
            seed => "seed", count => "count",
        ));
        v
    }
}

/// Everything a report embeds for audit.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddedConstants {
    pub dead_band: f64,
    pub classify: ClassifyOptions,
    pub kernel: Vec<KernelConstants>,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    pub config: BTreeMap<String, String>,
    pub constants: EmbeddedConstants,
    pub result: serde_json::Value,
}

#[derive(Debug, Serialize)]
struct ErrorReport<'a> {
    command: &'a str,
    exit_code: i32,
    error: ErrorBody,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    code: &'static str,
    message: String,
}

#[derive(Debug, Serialize)]
struct Metadata {
    heatlab_version: &'static str,
    created_unix: u64,
    threads: Option<usize>,
}

/// What a command hands back before output.
pub(crate) struct Outcome {
    pub status: &'static str,
    pub exit_code: i32,
    pub constants: EmbeddedConstants,
    pub result: serde_json::Value,
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("HEATLAB_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                crate::par::init_threads(n);
                Ok(Some(n))
            }
            _ => Err(Error::config("HEATLAB_THREADS", format!("expected a positive integer, got `{v}`"))),
        },
    }
}

fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn emit(command: &str, params: &Params, out: Option<&str>, threads: Option<usize>, outcome: Outcome) -> Result<i32> {
    let report = Report {
        command: command.to_string(),
        status: outcome.status.to_string(),
        exit_code: outcome.exit_code,
        config: params
            .resolved()
            .into_iter()
            .filter(|(k, _)| k != "out" && k != "csv")
            .collect(),
        constants: outcome.constants,
        result: outcome.result,
    };
    match out {
        Some(path) => {
            let path = Path::new(path);
            write_json(path, &report)?;
            let created_unix = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            write_json(
                &meta_path(path),
                &Metadata {
                    heatlab_version: env!("CARGO_PKG_VERSION"),
                    created_unix,
                    threads,
                },
            )?;
        }
        None => print!("{}", to_json(&report)?),
    }
    Ok(outcome.exit_code)
}

fn execute(command: &Command) -> (String, Option<String>, Result<i32>) {
    let (name, config, out, pairs): (String, Option<&Path>, Option<String>, Vec<(&str, Option<String>)>) =
        match command {
            Command::Classify(a) => {
                let mut v = a.f.pairs();
                v.extend(pairs!(a; d => "d", q => "q", domain => "domain", dead_band => "dead_band"));
                v.extend(pairs!(a.io; out => "out", csv => "csv"));
                ("classify".into(), a.io.config.as_deref(), a.io.out.clone(), v)
            }
            Command::VerifyKernel(a) => {
                let mut v = pairs!(a; d => "d", variant => "variant", r_grid => "r_grid",
                    t_grid => "t_grid", mesh => "mesh", delta => "delta", inflate => "inflate");
                v.extend(pairs!(a.io; out => "out", csv => "csv"));
                ("verify-kernel".into(), a.io.config.as_deref(), a.io.out.clone(), v)
            }
            Command::Experiment(a) => {
                let mut v = a.pairs();
                v.extend(pairs!(a.io; out => "out", csv => "csv"));
                (
                    format!("experiment {}", a.kind.name()),
                    a.io.config.as_deref(),
                    a.io.out.clone(),
                    v,
                )
            }
        };
    let run = || -> Result<i32> {
        let threads = threads_from_env()?;
        let params = Params::load(config, pairs)?;
        let out = params.str("out").map(str::to_string);
        let csv = params.str("csv").map(str::to_string);
        let outcome = match command {
            Command::Classify(_) => commands::classify(&params, csv.as_deref())?,
            Command::VerifyKernel(_) => commands::verify_kernel(&params, csv.as_deref())?,
            Command::Experiment(a) => commands::experiment(a.kind, &params, csv.as_deref())?,
        };
        emit(&name, &params, out.as_deref(), threads, outcome)
    };
    let result = run();
    (name, out, result)
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let (name, out, result) = execute(&cli.command);
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error[{}]: {err}", err.code());
            if let Some(path) = out {
                let body = ErrorReport {
                    command: &name,
                    exit_code: EXIT_ERROR,
                    error: ErrorBody {
                        code: err.code(),
                        message: err.to_string(),
                    },
                };
                if let Ok(text) = to_json(&body) {
                    let _ = write_atomic(Path::new(&path), text.as_bytes());
                }
            }
            EXIT_ERROR
        }
    }
}

pub(crate) fn base_constants(kernel: Vec<KernelConstants>) -> EmbeddedConstants {
    EmbeddedConstants {
        dead_band: DEAD_BAND,
        classify: ClassifyOptions::default(),
        kernel,
        tolerances: BTreeMap::new(),
    }
}
