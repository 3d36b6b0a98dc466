//! Optimal bounds on the failure probability `μ[g ≤ θ]` over short
//! interpolants of the data and product measures with mean at least `m`.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{markov_bound, markov_max, MarkovBound};
use crate::error::{Error, Result};
use crate::model::{worst_violation, ProblemSpec, Scenario};
use crate::report::{SolveStats, Trace, TraceEntry};
use crate::solver::chain::apply_chain;
use crate::solver::{
    de_optimize, deb_better, pattern_polish, verify, Candidate, ChainContext, DeOptions, Direction,
    Encoding, ForcedFailure, PolishOptions, SolverConfig, Verification,
};

/// Which side of the probability is bounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Sup,
    Inf,
}

impl Bound {
    fn direction(self) -> Direction {
        match self {
            Bound::Sup => Direction::Maximize,
            Bound::Inf => Direction::Minimize,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PofStatus {
    /// A verified witness attains `phat`.
    Solved,
    /// No scenario with a failing atom is feasible, so `phat = 0`.
    FailureInfeasible,
    /// The constraints admit no scenario at all; `phat = 0` by convention.
    Infeasible,
    /// The best witness failed independent verification.
    Unverified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PofReport {
    pub direction: Bound,
    pub phat: f64,
    pub status: PofStatus,
    pub scenario: Option<Scenario>,
    pub theta: f64,
    pub m: f64,
    pub support_shape: Vec<u8>,
    /// Markov relaxation `(M - m)/(M - θ)`.
    pub markov: MarkovBound,
    pub markov_max: f64,
    pub verification: Option<Verification>,
    pub trace: Trace,
    pub stats: SolveStats,
}

/// Extra inputs for a probability solve.
#[derive(Clone, Debug, Default)]
pub struct PofOptions {
    /// Scenarios placed in the initial population.
    pub warm_start: Vec<Scenario>,
    /// Precomputed Markov maximum; computed when absent.
    pub markov_max: Option<f64>,
}

fn forced(config: &SolverConfig, k: usize, bound: Bound) -> bool {
    bound == Bound::Sup
        && match config.forced_failure {
            ForcedFailure::Auto => k == 1,
            ForcedFailure::On => true,
            ForcedFailure::Off => false,
        }
}

/// Upper bound `P̂ = sup μ[g ≤ θ]`. A collapsed `support_shape` searches a
/// subset of scenarios and so yields a lower estimate of the full value.
pub fn phat_sup(
    spec: &ProblemSpec,
    config: &SolverConfig,
    support_shape: &[u8],
) -> Result<PofReport> {
    phat(
        spec,
        config,
        support_shape,
        Bound::Sup,
        &PofOptions::default(),
    )
}

/// Lower bound `inf μ[g ≤ θ]` over the same feasible set.
pub fn phat_inf(
    spec: &ProblemSpec,
    config: &SolverConfig,
    support_shape: &[u8],
) -> Result<PofReport> {
    phat(
        spec,
        config,
        support_shape,
        Bound::Inf,
        &PofOptions::default(),
    )
}

/// Solves the reduced probability problem in the given direction. Every
/// restart runs to termination and the best verified-feasible result wins,
/// since a single run can stall in a poor basin of the position space.
pub fn phat(
    spec: &ProblemSpec,
    config: &SolverConfig,
    support_shape: &[u8],
    bound: Bound,
    options: &PofOptions,
) -> Result<PofReport> {
    config.validate()?;
    let k = spec.dim();
    if support_shape.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: support_shape.len(),
        });
    }
    if let Some((i, j, violation)) = worst_violation(&spec.data, &spec.lip)? {
        return Err(Error::InfeasibleData { i, j, violation });
    }
    let enc = Encoding::new(support_shape)?;
    let big_m = match options.markov_max {
        Some(v) => v,
        None => markov_max(spec, config).value.to_f64(),
    };
    let pinned = forced(config, k, bound).then_some(0);
    let ctx = ChainContext {
        geometry: spec,
        m: spec.m,
        theta: spec.theta,
        config,
        encoding: &enc,
        direction: bound.direction(),
        pinned,
    };
    let bounds = ctx.bounds();
    let f = |raw: &[f64], rng: &mut ChaCha8Rng| {
        let r = apply_chain(raw, &ctx, rng);
        Candidate {
            value: r.scenario.failure_probability(spec.theta),
            residual: r.residual,
            payload: r.scenario,
            evaluations: r.evaluations,
        }
    };
    let init: Vec<Vec<f64>> = options
        .warm_start
        .iter()
        .filter(|s| s.dim() == k)
        .map(|s| enc.encode(&enc.canonical(s)))
        .collect();

    let mut trace = Trace::new();
    let mut stats = SolveStats {
        seed: config.seed,
        ..Default::default()
    };
    let mut best: Option<(Vec<f64>, Candidate<Scenario>)> = None;
    for r in 0..config.restarts {
        let seed = config.restart_seed(r);
        let opts = DeOptions {
            npop: config.outer_npop,
            weight: config.de_weight,
            crossover: config.de_crossover,
            termination: config.outer_termination(),
            max_generations: config.max_generations,
            seed,
            direction: bound.direction(),
            feasibility_tol: 0.0,
        };
        let out = de_optimize(&f, &bounds, &init, &opts);
        let offset = trace.last().map_or(0, |t: &TraceEntry| t.generation + 1);
        trace.extend(out.trace.iter().map(|t| TraceEntry {
            generation: t.generation + offset,
            ..*t
        }));
        stats.generations += out.generations;
        stats.evaluations += out.evaluations;
        stats.restarts_used = r + 1;
        let mut cand = (out.best_raw, out.best);
        if cand.1.residual == 0.0 && config.polish {
            let scale: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
            let p = pattern_polish(
                &f,
                &bounds,
                &scale,
                cand.clone(),
                &PolishOptions {
                    initial_step: 0.05,
                    min_step: 1e-10,
                    max_evaluations: 20_000,
                    direction: bound.direction(),
                    feasibility_tol: 0.0,
                    seed,
                },
            );
            stats.evaluations += p.evaluations;
            let start = trace.last().map_or(0, |t| t.generation) + 1;
            for (g, (value, residual)) in (start..).zip(&p.steps) {
                trace.push(TraceEntry {
                    generation: g,
                    best_value: *value,
                    feasibility_residual: *residual,
                });
            }
            cand = (p.raw, p.best);
        }
        if best
            .as_ref()
            .is_none_or(|b| deb_better(&cand.1, &b.1, bound.direction(), 0.0))
        {
            best = Some(cand);
        }
    }
    stats.generations = trace.last().map_or(0, |t| t.generation);

    let (_, cand) = best.expect("at least one restart");
    let markov = markov_bound(big_m, spec.m, spec.theta);
    let base = PofReport {
        direction: bound,
        phat: 0.0,
        status: PofStatus::Infeasible,
        scenario: None,
        theta: spec.theta,
        m: spec.m,
        support_shape: support_shape.to_vec(),
        markov,
        markov_max: big_m,
        verification: None,
        trace,
        stats,
    };
    if cand.residual > 0.0 {
        let status = if pinned.is_some() {
            PofStatus::FailureInfeasible
        } else {
            PofStatus::Infeasible
        };
        return Ok(PofReport { status, ..base });
    }
    let v = verify(&cand.payload, spec, config);
    let status = if v.valid {
        PofStatus::Solved
    } else {
        PofStatus::Unverified
    };
    Ok(PofReport {
        phat: v.objective,
        status,
        scenario: Some(cand.payload),
        verification: Some(v),
        ..base
    })
}

/// Closed-form `P̂` for one observation on `[0, 1]`, evaluated case by
/// case after shifting `θ` to zero and reflecting `z` into `[0, 1/2]`.
/// The fifth case (failure impossible) is tested first so that it is not
/// shadowed by the fourth, whose guard also covers it.
pub fn phat_1d(z: f64, gz: f64, l: f64, m: f64, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::InvalidInput(format!("z = {z} outside [0, 1]")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidInput(format!("L must be positive, got {l}")));
    }
    let g = gz - theta;
    let m = m - theta;
    if g <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "closed form needs G(z) > θ, got G(z) - θ = {g}"
        )));
    }
    let z = if z > 0.5 { 1.0 - z } else { z };
    if (g - m).abs() > l * (1.0 - z) {
        return Err(Error::Infeasible(format!(
            "|G(z) - m| = {} exceeds L|1 - z| = {}",
            (g - m).abs(),
            l * (1.0 - z)
        )));
    }
    let mp = m.max(0.0);
    let pos = |v: f64| v.max(0.0);
    let p = if g > l * (1.0 - z).abs() {
        0.0
    } else if g <= l * z {
        pos(1.0 - mp / (l - (l * z - g)))
    } else if g <= l * (0.5 - z).abs() {
        pos(1.0 - mp / (l - (l * z + g)))
    } else if g <= l * (1.0 - 3.0 * z).abs() {
        pos(1.0 - 2.0 * mp / (l + (g - l * z)))
    } else if g > l * z.max(1.0 - 3.0 * z) {
        pos(1.0 - mp / (l * z + g))
    } else {
        return Err(Error::Contract(format!(
            "no case matches (z, G(z)) = ({z}, {g})"
        )));
    };
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub theta: f64,
    pub phat: f64,
    pub markov: f64,
    /// `markov - phat`.
    pub gap: f64,
    pub report: PofReport,
}

/// One upper-bound solve per threshold, each paired with the Markov bound.
pub fn theta_sweep(
    spec: &ProblemSpec,
    thetas: &[f64],
    config: &SolverConfig,
    support_shape: &[u8],
) -> Result<Vec<SweepEntry>> {
    if thetas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput(
            "thetas must be sorted ascending".into(),
        ));
    }
    let big_m = markov_max(spec, config).value.to_f64();
    let options = PofOptions {
        markov_max: Some(big_m),
        ..Default::default()
    };
    thetas
        .par_iter()
        .map(|&theta| {
            let report = phat(
                &spec.with_theta(theta),
                config,
                support_shape,
                Bound::Sup,
                &options,
            )?;
            Ok(SweepEntry {
                theta,
                phat: report.phat,
                markov: report.markov.value,
                gap: report.markov.value - report.phat,
                report,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoxDomain, Dataset, LipschitzSpec};

    fn spec1(z: f64, gz: f64, m: f64, theta: f64) -> ProblemSpec {
        ProblemSpec::new(
            BoxDomain::unit(1),
            LipschitzSpec::exact(vec![1.0]).unwrap(),
            Dataset::new(vec![vec![z]], vec![gz], None).unwrap(),
            m,
            theta,
        )
        .unwrap()
    }

    #[test]
    fn closed_form_cases() {
        let cases = [
            (0.375, 0.25, 3.0 / 7.0),
            (0.125, 0.25, 0.2),
            (0.125, 0.5, 3.0 / 11.0),
            (0.25, 0.5, 1.0 / 3.0),
            (0.375, 0.875, 0.0),
        ];
        for (z, g, want) in cases {
            let got = phat_1d(z, g, 1.0, 0.5, 0.0).unwrap();
            assert!((got - want).abs() < 1e-15, "({z}, {g}) -> {got}");
        }
    }

    #[test]
    fn closed_form_reflects_and_shifts() {
        let a = phat_1d(0.375, 0.25, 1.0, 0.5, 0.0).unwrap();
        let b = phat_1d(0.625, 1.25, 1.0, 1.5, 1.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn closed_form_rejects_bad_inputs() {
        assert!(phat_1d(0.3, -0.1, 1.0, 0.5, 0.0).is_err());
        assert!(matches!(
            phat_1d(0.0, 0.1, 1.0, 5.0, 0.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn first_reference_case_solves() {
        let r = phat_sup(
            &spec1(0.375, 0.25, 0.5, 0.0),
            &SolverConfig::default(),
            &[2],
        )
        .unwrap();
        assert_eq!(r.status, PofStatus::Solved);
        assert!((r.phat - 3.0 / 7.0).abs() < 1e-3, "{}", r.phat);
    }

    #[test]
    fn impossible_failure_is_zero() {
        let r = phat_sup(
            &spec1(0.375, 0.875, 0.5, 0.0),
            &SolverConfig::default(),
            &[2],
        )
        .unwrap();
        assert_eq!(r.status, PofStatus::FailureInfeasible);
        assert_eq!(r.phat, 0.0);
        assert_eq!(r.stats.restarts_used, 3);
    }

    #[test]
    fn inf_can_avoid_failure() {
        let r = phat_inf(
            &spec1(0.375, 0.25, 0.5, 0.0),
            &SolverConfig::default(),
            &[2],
        )
        .unwrap();
        assert_eq!(r.status, PofStatus::Solved);
        assert_eq!(r.phat, 0.0);
    }
}
