use lipbound::diameter::{dhat, dhat_k_with_gamma, mcdiarmid_pof_bound, DiameterReport};
use lipbound::envelope::{fit_lipschitz, gap_size, markov_bound, markov_max, Envelope};
use lipbound::model::{worst_violation, BoxDomain, Dataset};
use lipbound::pof::{phat, theta_sweep, Bound, PofOptions, PofReport, PofStatus};
use lipbound::redundancy::{
    active_set_solve, is_redundant_sufficient, ActiveSetOptions, ActiveSetReport, Objective,
    Region, Selection,
};
use lipbound::report::Trace;
use serde_json::{json, Value};

use crate::config::{ingest, RunConfig};
use crate::{Command, Direction, Failure, SelectionArg};

/// What a subcommand produced, before it is wrapped into a report.
#[derive(Default)]
pub struct Outcome {
    pub results: Value,
    pub witness: Value,
    /// Named convergence traces.
    pub traces: Vec<(String, Trace)>,
    pub warnings: Vec<String>,
    /// Extra files written next to the report, by suffix.
    pub tables: Vec<(String, Vec<u8>)>,
    /// Set when the run should exit with the infeasibility code.
    pub infeasible: Option<String>,
}

/// Serializes `v` and drops its `trace` field, which goes to the trace CSV.
fn strip_trace<T: serde::Serialize>(v: &T) -> Value {
    let mut v = serde_json::to_value(v).expect("results serialize");
    if let Value::Object(map) = &mut v {
        map.remove("trace");
    }
    v
}

fn theta_of(flag: Option<f64>, cfg: &RunConfig) -> Result<f64, Failure> {
    flag.or(cfg.theta)
        .ok_or_else(|| Failure::usage("no threshold: pass --theta or set `theta` in the config"))
}

fn pof_results(r: &PofReport) -> Value {
    let mut v = strip_trace(r);
    if let Value::Object(map) = &mut v {
        map.remove("scenario");
    }
    v
}

fn pof_outcome(r: PofReport) -> Outcome {
    let mut o = Outcome {
        results: pof_results(&r),
        witness: serde_json::to_value(&r.scenario).expect("scenarios serialize"),
        traces: vec![(format!("theta={}", r.theta), r.trace.clone())],
        ..Default::default()
    };
    match r.status {
        PofStatus::Infeasible => {
            o.infeasible = Some("no scenario satisfies the constraints".into());
        }
        PofStatus::Unverified => {
            o.warnings
                .push("the best witness failed independent verification".into());
        }
        _ => {}
    }
    o
}

fn diameter_results(r: &DiameterReport) -> Value {
    let mut v = strip_trace(r);
    if let Value::Object(map) = &mut v {
        map.remove("maximizer");
    }
    v
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub fn run(command: &Command, cfg: &RunConfig) -> Result<Outcome, Failure> {
    cfg.solver.validate()?;
    let domain = cfg.domain()?;
    let ingested = ingest(&cfg.data, &domain)?;
    let mut out = dispatch(command, cfg, &domain, ingested.data)?;
    let mut warnings = ingested.warnings;
    warnings.append(&mut out.warnings);
    out.warnings = warnings;
    Ok(out)
}

fn dispatch(
    command: &Command,
    cfg: &RunConfig,
    domain: &BoxDomain,
    data: Dataset,
) -> Result<Outcome, Failure> {
    let solver = &cfg.solver;
    match command {
        Command::Validate => {
            let lip = cfg.lip()?;
            if lip.dim() != domain.dim() {
                return Err(Failure::usage(format!(
                    "{} Lipschitz constants for {} coordinates",
                    lip.dim(),
                    domain.dim()
                )));
            }
            let worst = worst_violation(&data, &lip)?;
            let mut o = Outcome {
                results: json!({
                    "observations": data.len(),
                    "lipschitz_feasible": worst.is_none(),
                }),
                witness: Value::Null,
                ..Default::default()
            };
            if let Some((i, j, violation)) = worst {
                let (a, b) = (data.label(i), data.label(j));
                o.witness = json!({
                    "i": i, "j": j, "labels": [a, b], "violation": violation,
                });
                o.infeasible = Some(format!(
                    "observations {a} and {b} violate the Lipschitz bound by {violation:.6e}"
                ));
            }
            Ok(o)
        }

        Command::Diameter { k } => {
            let g = cfg.geometry(data)?;
            let ks: Vec<usize> = if k == "all" {
                (0..g.dim()).collect()
            } else {
                let k: usize = k.parse().map_err(|_| {
                    Failure::usage(format!("--k must be `all` or an index, got {k:?}"))
                })?;
                vec![k]
            };
            let gap = gap_size(&g, solver);
            let gamma = gap.value.to_f64();
            let reports = ks
                .iter()
                .map(|&k| dhat_k_with_gamma(&g, k, gamma, solver))
                .collect::<Result<Vec<_>, _>>()?;
            let subs: Vec<f64> = reports.iter().map(|r| r.dhat_k).collect();
            let mut results = json!({
                "gamma": gap.value,
                "gamma_argmax": gap.argmax,
                "error_cap": 4.0 * gamma,
                "subdiameters": reports.iter().map(diameter_results).collect::<Vec<_>>(),
            });
            if ks.len() == g.dim() {
                let d = dhat(&subs);
                results["dhat"] = json!(d);
                if let (Some(m), Some(theta)) = (cfg.m, cfg.theta) {
                    results["mcdiarmid_bound"] = json!(mcdiarmid_pof_bound(m, theta, d));
                }
            }
            let mut traces: Vec<(String, Trace)> = vec![("gamma".to_string(), gap.trace.clone())];
            traces.extend(
                reports
                    .iter()
                    .map(|r| (format!("k={}", r.k), r.trace.clone())),
            );
            Ok(Outcome {
                results,
                witness: json!(reports.iter().map(|r| &r.maximizer).collect::<Vec<_>>()),
                traces,
                ..Default::default()
            })
        }

        Command::Pof {
            theta,
            direction,
            collapse,
        } => {
            let spec = cfg.spec(data, theta_of(*theta, cfg)?)?;
            let bound = match direction {
                Direction::Sup => Bound::Sup,
                Direction::Inf => Bound::Inf,
            };
            let r = phat(
                &spec,
                solver,
                &cfg.shape(collapse.as_ref()),
                bound,
                &PofOptions::default(),
            )?;
            Ok(pof_outcome(r))
        }

        Command::PofCurve { thetas, collapse } => {
            let mut thetas = thetas
                .clone()
                .or_else(|| cfg.thetas.clone())
                .ok_or_else(|| Failure::usage("no thresholds: pass --thetas or set `thetas`"))?;
            thetas.sort_by(f64::total_cmp);
            let spec = cfg.spec(data, thetas[0])?;
            let rows = theta_sweep(&spec, &thetas, solver, &cfg.shape(collapse.as_ref()))?;
            let csv = table(
                &["theta", "phat", "markov", "gap"],
                rows.iter()
                    .map(|r| {
                        [r.theta, r.phat, r.markov, r.gap]
                            .iter()
                            .map(f64::to_string)
                            .collect()
                    })
                    .collect(),
            );
            Ok(Outcome {
                results: json!({
                    "markov_max": rows.first().map(|r| r.report.markov_max),
                    "rows": rows.iter().map(|r| json!({
                        "theta": r.theta,
                        "phat": r.phat,
                        "markov": r.markov,
                        "gap": r.gap,
                        "status": r.report.status,
                        "stats": r.report.stats,
                    })).collect::<Vec<_>>(),
                }),
                witness: json!(rows.iter().map(|r| &r.report.scenario).collect::<Vec<_>>()),
                traces: rows
                    .iter()
                    .map(|r| (format!("theta={}", r.theta), r.report.trace.clone()))
                    .collect(),
                tables: vec![("curve.csv".into(), csv)],
                ..Default::default()
            })
        }

        Command::Envelope { at, grid } => {
            let g = cfg.geometry(data)?;
            let env = Envelope::of(&g);
            let points: Vec<Vec<f64>> = match (at, grid) {
                (Some(p), _) => vec![p.clone()],
                (None, Some(n)) => grid_points(domain, *n)?,
                (None, None) => return Err(Failure::usage("pass --at or --grid")),
            };
            let rows = points
                .iter()
                .map(|x| {
                    Ok(json!({
                        "x": x,
                        "lower": env.lower(x)?,
                        "upper": env.upper(x)?,
                    }))
                })
                .collect::<Result<Vec<_>, lipbound::Error>>()?;
            Ok(Outcome {
                results: json!({ "points": rows }),
                ..Default::default()
            })
        }

        Command::Markov { theta } => {
            let g = cfg.geometry(data)?;
            let r = markov_max(&g, solver);
            let mut results =
                json!({ "markov_max": r.value, "argmax": r.argmax, "stats": r.stats });
            if let (Some(m), Some(theta), Some(big_m)) =
                (cfg.m, theta.or(cfg.theta), r.value.finite())
            {
                results["theta"] = json!(theta);
                results["bound"] = json!(markov_bound(big_m, m, theta));
            }
            Ok(Outcome {
                results,
                witness: json!({ "x": r.argmax }),
                traces: vec![("markov".into(), r.trace)],
                ..Default::default()
            })
        }

        Command::ActiveSet {
            objective,
            theta,
            collapse,
            selection,
            single_winner,
            max_iterations,
        } => {
            let objective = if objective == "pof" {
                Objective::Pof(cfg.shape(collapse.as_ref()))
            } else if let Some(k) = objective.strip_prefix("diameter:") {
                Objective::Diameter(k.parse().map_err(|_| {
                    Failure::usage(format!("bad coordinate in --objective {objective:?}"))
                })?)
            } else {
                return Err(Failure::usage(format!(
                    "--objective must be `pof` or `diameter:<k>`, got {objective:?}"
                )));
            };
            let theta = match objective {
                Objective::Pof(_) => theta_of(*theta, cfg)?,
                Objective::Diameter(_) => theta.or(cfg.theta).unwrap_or(0.0),
            };
            let spec = match objective {
                Objective::Pof(_) => cfg.spec(data, theta)?,
                Objective::Diameter(_) => lipbound::model::ProblemSpec::from_geometry(
                    cfg.geometry(data)?,
                    cfg.m.unwrap_or(0.0),
                    theta,
                )?,
            };
            let options = ActiveSetOptions {
                selection: match selection {
                    SelectionArg::GreatestChange => Selection::GreatestChange,
                    SelectionArg::Maximizers => Selection::Maximizers,
                },
                single_winner: *single_winner,
                max_iterations: *max_iterations,
            };
            let r = active_set_solve(&spec, &objective, solver, &options)?;
            let labels = |s: &std::collections::BTreeSet<usize>| -> Vec<String> {
                s.iter().map(|&i| spec.data.label(i)).collect()
            };
            let (report, witness, trace) = match &r.report {
                ActiveSetReport::Pof(p) => (
                    pof_results(p),
                    serde_json::to_value(&p.scenario).expect("scenarios serialize"),
                    p.trace.clone(),
                ),
                ActiveSetReport::Diameter(d) => (
                    diameter_results(d),
                    serde_json::to_value(&d.maximizer).expect("maximizers serialize"),
                    d.trace.clone(),
                ),
            };
            let mut o = Outcome {
                results: json!({
                    "value": r.report.value(),
                    "enforced": labels(&r.state.enforced),
                    "excluded": spec.data.len() - r.state.enforced.len(),
                    "iterations": r.state.iteration,
                    "terminated": r.state.terminated,
                    "history": r.state.history,
                    "final": report,
                }),
                witness,
                traces: vec![("final".into(), trace)],
                ..Default::default()
            };
            if !r.state.terminated {
                o.warnings
                    .push("iteration cap reached with binding candidates left".into());
            }
            Ok(o)
        }

        Command::Redundancy { region } => {
            let lip = cfg.lip()?;
            cfg.geometry(data.clone())?;
            let v = Region::new(domain, BoxDomain::new(region)?)?;
            let inside = v.members(&data);
            if inside.is_empty() {
                return Err(Failure::usage("the region contains no observations"));
            }
            let data_in_v = data.subset(&inside);
            let rows = (0..data.len())
                .map(|i| {
                    let class = if inside.contains(&i) {
                        "in_region"
                    } else if is_redundant_sufficient(
                        &data.points()[i],
                        data.values()[i],
                        &v,
                        &data_in_v,
                        &lip,
                    )? {
                        "redundant"
                    } else {
                        "inconclusive"
                    };
                    Ok(json!({ "label": data.label(i), "class": class }))
                })
                .collect::<Result<Vec<_>, lipbound::Error>>()?;
            Ok(Outcome {
                results: json!({ "region": v.bounds, "observations": rows }),
                ..Default::default()
            })
        }

        Command::FitLipschitz { bounds } => {
            let g = lipbound::model::Geometry {
                domain: domain.clone(),
                lip: cfg.lip()?,
                data,
            };
            let r = fit_lipschitz(&g, bounds, solver)?;
            Ok(Outcome {
                results: strip_trace(&r),
                witness: json!({ "lipschitz": r.lip.constants }),
                traces: vec![("fit".into(), r.trace)],
                ..Default::default()
            })
        }

        Command::Sweep {
            scale_l,
            theta,
            collapse,
        } => {
            let spec = cfg.spec(data, theta_of(*theta, cfg)?)?;
            let shape = cfg.shape(collapse.as_ref());
            let mut rows = Vec::new();
            let mut witness = Vec::new();
            let mut traces = Vec::new();
            for &f in scale_l {
                let lip = spec.lip.scaled(f)?;
                if let Some((i, j, violation)) = worst_violation(&spec.data, &lip)? {
                    rows.push(json!({
                        "scale": f,
                        "lipschitz": lip.constants,
                        "feasible": false,
                        "violating_pair": [spec.data.label(i), spec.data.label(j)],
                        "violation": violation,
                    }));
                    witness.push(Value::Null);
                    continue;
                }
                let r = phat(
                    &spec.with_lip(lip.clone()),
                    solver,
                    &shape,
                    Bound::Sup,
                    &PofOptions::default(),
                )?;
                rows.push(json!({
                    "scale": f,
                    "lipschitz": lip.constants,
                    "feasible": true,
                    "phat": r.phat,
                    "status": r.status,
                    "markov": r.markov,
                    "markov_max": r.markov_max,
                }));
                witness.push(serde_json::to_value(&r.scenario).expect("scenarios serialize"));
                traces.push((format!("scale={f}"), r.trace));
            }
            Ok(Outcome {
                results: json!({ "rows": rows }),
                witness: Value::Array(witness),
                traces,
                ..Default::default()
            })
        }

        Command::Replay { .. } => Err(Failure::usage("replay cannot be nested")),
    }
}

fn grid_points(domain: &BoxDomain, n: usize) -> Result<Vec<Vec<f64>>, Failure> {
    let k = domain.dim();
    let n = n.max(2);
    let total = (n as f64).powi(k as i32);
    if total > 1e6 {
        return Err(Failure::usage(format!(
            "grid of {n}^{k} points is too large; use at most a million"
        )));
    }
    let mut out = vec![vec![]];
    for b in domain.bounds() {
        let axis: Vec<f64> = (0..n)
            .map(|i| b.lo + (b.hi - b.lo) * i as f64 / (n - 1) as f64)
            .collect();
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok(out)
}
