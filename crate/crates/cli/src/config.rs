use std::path::{Path, PathBuf};

use lipbound::model::{BoxDomain, Dataset, Geometry, LipschitzSpec, ProblemSpec};
use lipbound::solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Problem description shared by every subcommand. Subcommand flags are
/// echoed separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// CSV of observations; relative paths resolve against the config file.
    pub data: PathBuf,
    /// `[lo, hi]` per input coordinate.
    pub domain: Vec<(f64, f64)>,
    pub lipschitz: Vec<f64>,
    #[serde(default)]
    pub tolerance: f64,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub thetas: Option<Vec<f64>>,
    #[serde(default)]
    pub support_shape: Option<Vec<u8>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl RunConfig {
    /// Reads TOML or JSON, chosen by extension and falling back to content.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        let json =
            path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        let mut cfg: Self = if json {
            serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        };
        if cfg.data.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.data = dir.join(&cfg.data);
            }
        }
        Ok(cfg)
    }

    pub fn domain(&self) -> Result<BoxDomain, Failure> {
        Ok(BoxDomain::new(&self.domain)?)
    }

    pub fn lip(&self) -> Result<LipschitzSpec, Failure> {
        Ok(LipschitzSpec::new(self.lipschitz.clone(), self.tolerance)?)
    }

    pub fn geometry(&self, data: Dataset) -> Result<Geometry, Failure> {
        Ok(Geometry::new(self.domain()?, self.lip()?, data)?)
    }

    pub fn spec(&self, data: Dataset, theta: f64) -> Result<ProblemSpec, Failure> {
        let m = self
            .m
            .ok_or_else(|| Failure::usage("the config needs a mean bound `m`"))?;
        Ok(ProblemSpec::from_geometry(self.geometry(data)?, m, theta)?)
    }

    pub fn shape(&self, flag: Option<&Shape>) -> Vec<u8> {
        flag.map(|s| &s.0)
            .or(self.support_shape.as_ref())
            .cloned()
            .unwrap_or_else(|| vec![2; self.domain.len()])
    }
}

/// Parsed observations plus notes worth surfacing in a report.
#[derive(Debug)]
pub struct Ingested {
    pub data: Dataset,
    pub warnings: Vec<String>,
}

/// Reads a CSV with a header row: an optional leading label column, then
/// `k` input columns and one output column.
pub fn ingest(path: &Path, domain: &BoxDomain) -> Result<Ingested, Failure> {
    let k = domain.dim();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        .clone();
    let labelled = match header.len() {
        n if n == k + 1 => false,
        n if n == k + 2 => true,
        n => {
            return Err(Failure::usage(format!(
                "{}: header has {n} columns, expected {} inputs and one output, optionally after a label column",
                path.display(),
                k
            )))
        }
    };
    let skip = usize::from(labelled);
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Failure::usage(format!("{}:{line}: {e}", path.display())))?;
        if row.len() != header.len() {
            return Err(Failure::usage(format!(
                "{}:{line}: {} fields, expected {}",
                path.display(),
                row.len(),
                header.len()
            )));
        }
        let nums = row
            .iter()
            .skip(skip)
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| Failure::usage(format!("{}:{line}: {e}", path.display())))?;
        for (j, (&v, b)) in nums.iter().zip(domain.bounds()).enumerate() {
            if !(b.lo..=b.hi).contains(&v) {
                return Err(Failure::usage(format!(
                    "{}:{line}: {} = {v} lies outside [{}, {}]",
                    path.display(),
                    &header[skip + j],
                    b.lo,
                    b.hi
                )));
            }
        }
        if labelled {
            labels.push(row[0].to_string());
        }
        values.push(nums[k]);
        points.push(nums[..k].to_vec());
    }
    let data = Dataset::new(points, values, labelled.then_some(labels))?;
    let warnings = data
        .duplicate_inputs()
        .into_iter()
        .map(|g| {
            let names: Vec<String> = g.iter().map(|&i| data.label(i)).collect();
            format!("observations {} share the same inputs", names.join(", "))
        })
        .collect();
    Ok(Ingested { data, warnings })
}

/// One `lo:hi` pair.
pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("{s:?}: expected lo:hi"))?;
    let lo = lo
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("{lo:?}: {e}"))?;
    let hi = hi
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("{hi:?}: {e}"))?;
    Ok((lo, hi))
}

/// Support size per coordinate, written like `112` or `1,1,2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Shape(pub Vec<u8>);

pub fn parse_shape(s: &str) -> Result<Shape, String> {
    s.chars()
        .filter(|c| *c != ',')
        .map(|c| match c {
            '1' => Ok(1),
            '2' => Ok(2),
            _ => Err(format!("support shape entries must be 1 or 2, got {c:?}")),
        })
        .collect::<Result<_, _>>()
        .map(Shape)
}
