//! `lipbound`: optimal concentration-of-measure bounds from legacy data.
//!
//! Every subcommand reads a run config (TOML or JSON) naming the dataset,
//! domain and Lipschitz model, and writes a JSON report. Exit codes: 0 on
//! success, 1 when the data or constraints are infeasible, 2 on usage
//! errors.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{parse_pair, parse_shape, RunConfig, Shape};

#[derive(Parser)]
#[command(name = "lipbound", version, about)]
struct Cli {
    /// Run config, TOML or JSON.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Dataset CSV, overriding the config.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Report path; the report goes to stdout when absent.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true, env = "LIPBOUND_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check that the data admit a function with the given constants.
    Validate,
    /// Least upper bounds on the subdiameters, with gap size and error cap.
    Diameter {
        /// Coordinate index, or `all`.
        #[arg(long, default_value = "all")]
        k: String,
    },
    /// Bound on the failure probability at one threshold.
    Pof {
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, value_enum, default_value_t = Direction::Sup)]
        direction: Direction,
        /// Support shape such as `112`.
        #[arg(long, value_parser = parse_shape)]
        collapse: Option<Shape>,
    },
    /// Upper bound and Markov bound over a list of thresholds.
    PofCurve {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        thetas: Option<Vec<f64>>,
        #[arg(long, value_parser = parse_shape)]
        collapse: Option<Shape>,
    },
    /// Lower and upper envelopes at a point or on a grid.
    Envelope {
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            conflicts_with = "grid"
        )]
        at: Option<Vec<f64>>,
        /// Grid points per axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Maximum of the upper envelope and the Markov bound.
    Markov {
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Active-set solve that enforces only the observations that bind.
    ActiveSet {
        /// `pof` or `diameter:<k>`.
        #[arg(long, default_value = "pof")]
        objective: String,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, value_parser = parse_shape)]
        collapse: Option<Shape>,
        #[arg(long, value_enum, default_value_t = SelectionArg::GreatestChange)]
        selection: SelectionArg,
        /// Enforce one candidate per iteration instead of every tie.
        #[arg(long)]
        single_winner: bool,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Classify observations outside a region as redundant or not.
    Redundancy {
        /// `lo:hi` per coordinate, comma separated.
        #[arg(long, required = true, value_delimiter = ',', value_parser = parse_pair, allow_hyphen_values = true)]
        region: Vec<(f64, f64)>,
    },
    /// Lipschitz constants within bounds that minimize the gap size.
    FitLipschitz {
        /// `lo:hi` per coordinate, comma separated.
        #[arg(long, required = true, value_delimiter = ',', value_parser = parse_pair, allow_hyphen_values = true)]
        bounds: Vec<(f64, f64)>,
    },
    /// Upper bound re-solved with every Lipschitz constant scaled.
    Sweep {
        #[arg(long = "scale-L", required = true, value_delimiter = ',')]
        scale_l: Vec<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, value_parser = parse_shape)]
        collapse: Option<Shape>,
    },
    /// Re-run the command recorded in a report with its echoed config.
    Replay { report: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Diameter { .. } => "diameter",
            Command::Pof { .. } => "pof",
            Command::PofCurve { .. } => "pof-curve",
            Command::Envelope { .. } => "envelope",
            Command::Markov { .. } => "markov",
            Command::ActiveSet { .. } => "active-set",
            Command::Redundancy { .. } => "redundancy",
            Command::FitLipschitz { .. } => "fit-lipschitz",
            Command::Sweep { .. } => "sweep",
            Command::Replay { .. } => "replay",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sup,
    Inf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionArg {
    GreatestChange,
    Maximizers,
}

/// A failed run and its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<lipbound::Error> for Failure {
    fn from(e: lipbound::Error) -> Self {
        use lipbound::Error::*;
        let code = match e {
            InfeasibleData { .. }
            | EmptyEnvelope { .. }
            | NoFeasibleLipschitz { .. }
            | Infeasible(_) => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Command::Replay { report } = &cli.command {
        let old = report::Report::load(report)?;
        let command: Command = serde_json::from_value(old.args.clone())
            .map_err(|e| Failure::usage(format!("{}: bad args: {e}", report.display())))?;
        let out = cli.out.clone().or(old.config.output.clone());
        return report::execute(&command, old.config, out);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::usage("--config is required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(d) = cli.data {
        cfg.data = d;
    }
    if let Some(s) = cli.seed {
        cfg.solver.seed = s;
    }
    let out = cli.out.or(cfg.output.clone());
    report::execute(&cli.command, cfg, out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
