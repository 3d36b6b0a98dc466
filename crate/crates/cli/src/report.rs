use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lipbound::report::Trace;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::commands::{self, Outcome};
use crate::config::RunConfig;
use crate::{Command, Failure};

/// The JSON document every subcommand writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    /// Effective config, with the seed actually used.
    pub config: RunConfig,
    /// Subcommand and flags, enough to replay the run.
    pub args: Value,
    pub seed: u64,
    pub results: Value,
    pub witness: Value,
    pub warnings: Vec<String>,
    pub trace_path: Option<PathBuf>,
    pub wall_time_s: f64,
}

impl Report {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    }
}

/// `report.json` → `report.<suffix>`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Failure::usage(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn trace_csv(traces: &[(String, Trace)]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let many = traces.len() > 1;
    let err = |e: csv::Error| Failure::usage(format!("trace: {e}"));
    if many {
        w.write_record(["run", "generation", "best_value", "feasibility_residual"])
            .map_err(err)?;
    } else {
        w.write_record(["generation", "best_value", "feasibility_residual"])
            .map_err(err)?;
    }
    for (run, trace) in traces {
        for t in trace {
            let mut row = vec![
                t.generation.to_string(),
                t.best_value.to_string(),
                t.feasibility_residual.to_string(),
            ];
            if many {
                row.insert(0, run.clone());
            }
            w.write_record(&row).map_err(err)?;
        }
    }
    w.into_inner()
        .map_err(|e| Failure::usage(format!("trace: {e}")))
}

/// Runs `command` and writes its report (and trace, if any) next to `out`,
/// or prints the report when `out` is absent. Returns the exit code.
pub fn execute(command: &Command, config: RunConfig, out: Option<PathBuf>) -> Result<u8, Failure> {
    let start = Instant::now();
    let Outcome {
        results,
        witness,
        traces,
        mut warnings,
        tables,
        infeasible,
    } = commands::run(command, &config)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let mut trace_path = None;
    if let Some(out) = &out {
        if !traces.is_empty() {
            let p = sibling(out, "trace.csv");
            write_atomic(&p, &trace_csv(&traces)?)?;
            trace_path = Some(p);
        }
        for (suffix, bytes) in &tables {
            write_atomic(&sibling(out, suffix), bytes)?;
        }
    }
    if let Some(msg) = &infeasible {
        warnings.push(msg.clone());
    }
    let report = Report {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.solver.seed,
        config,
        args: serde_json::to_value(command).expect("commands serialize"),
        results,
        witness,
        warnings,
        trace_path,
        wall_time_s,
    };
    let mut json = serde_json::to_vec_pretty(&report).expect("reports serialize");
    json.push(b'\n');
    match &out {
        Some(p) => write_atomic(p, &json)?,
        None => std::io::stdout()
            .write_all(&json)
            .map_err(|e| Failure::usage(format!("stdout: {e}")))?,
    }
    if let Some(msg) = infeasible {
        eprintln!("infeasible: {msg}");
        return Ok(1);
    }
    Ok(0)
}
