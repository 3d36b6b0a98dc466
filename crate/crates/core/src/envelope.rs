//! McShane envelopes of the data, the polygon objective of the diameter
//! problem, gap size, the Markov maximum and Lipschitz-constant fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{lipschitz_feasible, worst_violation, Dataset, Geometry, LipschitzSpec};
use crate::report::{Extended, SolveStats, Trace};
use crate::solver::{
    de_optimize, maximize_global, metric_scale, Candidate, DeOptions, Direction, SolverConfig,
};

/// Least and greatest values `Y⁻(x)`, `Y⁺(x)` that a short extension of
/// the data can take at `x`.
#[derive(Clone, Copy, Debug)]
pub struct Envelope<'a> {
    data: &'a Dataset,
    lip: &'a LipschitzSpec,
}

impl<'a> Envelope<'a> {
    pub fn new(data: &'a Dataset, lip: &'a LipschitzSpec) -> Self {
        Self { data, lip }
    }

    pub fn of(g: &'a Geometry) -> Self {
        Self::new(&g.data, &g.lip)
    }

    /// `min_z G(z) + d_L(x, z) + T`, or `+∞` without data.
    pub fn upper_f64(&self, x: &[f64]) -> f64 {
        self.data
            .points()
            .iter()
            .zip(self.data.values())
            .map(|(z, g)| g + self.lip.distance(x, z))
            .fold(f64::INFINITY, f64::min)
            + self.lip.tolerance
    }

    /// `max_z G(z) - d_L(x, z) - T`, or `-∞` without data.
    pub fn lower_f64(&self, x: &[f64]) -> f64 {
        self.data
            .points()
            .iter()
            .zip(self.data.values())
            .map(|(z, g)| g - self.lip.distance(x, z))
            .fold(f64::NEG_INFINITY, f64::max)
            - self.lip.tolerance
    }

    pub fn upper(&self, x: &[f64]) -> Result<Extended> {
        self.check(x)?;
        Ok(Extended::from_f64(self.upper_f64(x)))
    }

    pub fn lower(&self, x: &[f64]) -> Result<Extended> {
        self.check(x)?;
        Ok(Extended::from_f64(self.lower_f64(x)))
    }

    /// `[Y⁻(x), Y⁺(x)]`, failing when the interval is empty.
    pub fn interval(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check(x)?;
        let (lo, hi) = (self.lower_f64(x), self.upper_f64(x));
        if lo > hi {
            return Err(Error::EmptyEnvelope {
                point: x.to_vec(),
                lower: lo,
                upper: hi,
            });
        }
        Ok((lo, hi))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.lip.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.lip.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Maximum of `|y - y'|` over the feasible polygon at `(x, x')`, with the
/// corner attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonWitness {
    pub value: f64,
    pub y: f64,
    pub y_prime: f64,
}

fn polygon(lo: f64, hi: f64, lo_p: f64, hi_p: f64, reach: f64) -> PolygonWitness {
    // y above y': push y to its top, y' as low as the pair constraint allows.
    let down = (reach.min(hi - lo_p), hi, lo_p.max(hi - reach));
    // y below y': y at its bottom.
    let up = (reach.min(hi_p - lo), lo, hi_p.min(lo + reach));
    // Ties go to the corner with the smaller y.
    let (value, y, y_prime) = if down.0 > up.0 { down } else { up };
    PolygonWitness {
        value: value.max(0.0),
        y,
        y_prime,
    }
}

/// `A(x, x')`: the largest `|y - y'|` with `y ∈ [Y⁻(x), Y⁺(x)]`,
/// `y' ∈ [Y⁻(x'), Y⁺(x')]` and `|y - y'| ≤ d_L(x, x') + T`.
///
/// The maximum is `max(min(r, Y⁺(x) - Y⁻(x')), min(r, Y⁺(x') - Y⁻(x)))`
/// with `r = d_L(x, x') + T`. `x` and `x'` should differ only in
/// coordinate `k`; this is checked.
pub fn polygon_objective(
    env: &Envelope<'_>,
    x: &[f64],
    x_prime: &[f64],
    k: usize,
) -> Result<PolygonWitness> {
    if k >= env.lip.dim() {
        return Err(Error::InvalidInput(format!("coordinate {k} out of range")));
    }
    if let Some(j) = (0..x.len()).find(|&j| j != k && x.get(j) != x_prime.get(j)) {
        return Err(Error::Contract(format!(
            "points differ in coordinate {j}, expected only {k}"
        )));
    }
    let (lo, hi) = env.interval(x)?;
    let (lo_p, hi_p) = env.interval(x_prime)?;
    let reach = env.lip.distance(x, x_prime) + env.lip.tolerance;
    Ok(polygon(lo, hi, lo_p, hi_p, reach))
}

/// Unchecked variant used inside the optimizers.
pub(crate) fn polygon_value(env: &Envelope<'_>, x: &[f64], x_prime: &[f64]) -> PolygonWitness {
    let reach = env.lip.distance(x, x_prime) + env.lip.tolerance;
    polygon(
        env.lower_f64(x),
        env.upper_f64(x),
        env.lower_f64(x_prime),
        env.upper_f64(x_prime),
        reach,
    )
}

/// A supremum over the domain found by the global maximizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupReport {
    pub value: Extended,
    pub argmax: Vec<f64>,
    pub trace: Trace,
    pub stats: SolveStats,
}

/// `min_z d_L(x, z)`.
fn nearest_distance(data: &Dataset, lip: &LipschitzSpec, x: &[f64]) -> f64 {
    data.points()
        .iter()
        .map(|z| lip.distance(x, z))
        .fold(f64::INFINITY, f64::min)
}

/// Data points and box corners seed the search.
fn seeds(g: &Geometry) -> Vec<Vec<f64>> {
    let b = g.domain.as_pairs();
    let k = b.len();
    let mut out = Vec::new();
    if k <= 4 {
        for c in 0..(1usize << k) {
            out.push(
                (0..k)
                    .map(|j| if (c >> j) & 1 == 1 { b[j].1 } else { b[j].0 })
                    .collect(),
            );
        }
    }
    out
}

/// Gap size `Γ = sup_x min_z d_L(x, z)`; `+∞` without data. The value is
/// the best found, hence a lower estimate of the true supremum.
pub fn gap_size(g: &Geometry, config: &SolverConfig) -> SupReport {
    if g.data.is_empty() {
        return SupReport {
            value: Extended::PosInfinity,
            argmax: Vec::new(),
            trace: Vec::new(),
            stats: SolveStats {
                seed: config.seed,
                ..Default::default()
            },
        };
    }
    let bounds = g.domain.as_pairs();
    let scale = metric_scale(&g.lip.constants, &bounds);
    let f = |x: &[f64]| nearest_distance(&g.data, &g.lip, x);
    let out = maximize_global(&f, &bounds, &scale, &seeds(g), config);
    SupReport {
        value: Extended::Finite(out.value),
        argmax: out.x,
        trace: out.trace,
        stats: out.stats,
    }
}

/// `M = sup_x Y⁺(x)`, the largest value any short extension can take.
pub fn markov_max(g: &Geometry, config: &SolverConfig) -> SupReport {
    if g.data.is_empty() {
        return SupReport {
            value: Extended::PosInfinity,
            argmax: Vec::new(),
            trace: Vec::new(),
            stats: SolveStats {
                seed: config.seed,
                ..Default::default()
            },
        };
    }
    let bounds = g.domain.as_pairs();
    let scale = metric_scale(&g.lip.constants, &bounds);
    let env = Envelope::of(g);
    let f = |x: &[f64]| env.upper_f64(x);
    let mut init = seeds(g);
    init.extend(g.data.points().iter().cloned());
    let out = maximize_global(&f, &bounds, &scale, &init, config);
    SupReport {
        value: Extended::Finite(out.value),
        argmax: out.x,
        trace: out.trace,
        stats: out.stats,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovBound {
    pub value: f64,
    /// Set when `θ ≥ M`, where the bound carries no information.
    pub vacuous: bool,
}

/// `(M - m)/(M - θ)` clamped to `[0, 1]`.
pub fn markov_bound(big_m: f64, m: f64, theta: f64) -> MarkovBound {
    if theta >= big_m || big_m.is_infinite() {
        return MarkovBound {
            value: 1.0,
            vacuous: true,
        };
    }
    MarkovBound {
        value: ((big_m - m) / (big_m - theta)).clamp(0.0, 1.0),
        vacuous: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub lip: LipschitzSpec,
    pub gamma: f64,
    pub trace: Trace,
    pub stats: SolveStats,
}

/// Smallest `t ∈ [0, 1]` with `lo + t (hi - lo)` feasible, by bisection.
/// Feasible constants form an upward-closed set, so the segment crosses
/// the boundary at most once.
fn feasible_along(data: &Dataset, lo: &[f64], hi: &[f64], tol: f64) -> Vec<f64> {
    let at = |t: f64| -> Vec<f64> { lo.iter().zip(hi).map(|(a, b)| a + t * (b - a)).collect() };
    let ok = |l: &[f64]| {
        LipschitzSpec::new(l.to_vec(), tol)
            .and_then(|s| lipschitz_feasible(data, &s))
            .unwrap_or(false)
    };
    if ok(lo) {
        return lo.to_vec();
    }
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if ok(&at(mid)) {
            b = mid;
        } else {
            a = mid;
        }
    }
    at(b)
}

/// Feasible constants inside `bounds` that approximately minimize the gap
/// size. The problem is not convex; the result is the best found.
pub fn fit_lipschitz(
    g: &Geometry,
    bounds: &[(f64, f64)],
    config: &SolverConfig,
) -> Result<FitReport> {
    let k = g.dim();
    if bounds.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: bounds.len(),
        });
    }
    if bounds
        .iter()
        .any(|&(lo, hi)| !(lo >= 0.0 && hi >= lo && hi.is_finite()))
    {
        return Err(Error::InvalidInput(format!(
            "Lipschitz bounds must satisfy 0 <= lo <= hi < inf, got {bounds:?}"
        )));
    }
    let tol = g.lip.tolerance;
    let top: Vec<f64> = bounds.iter().map(|b| b.1).collect();
    let top_spec = LipschitzSpec::new(top.clone(), tol)?;
    if let Some((i, j, violation)) = worst_violation(&g.data, &top_spec)? {
        return Err(Error::NoFeasibleLipschitz { i, j, violation });
    }

    let inner = SolverConfig {
        outer_npop: 16,
        outer_ngen: 30,
        ..config.clone()
    };
    let gamma_of = |l: &[f64]| -> f64 {
        let spec = LipschitzSpec {
            constants: l.to_vec(),
            tolerance: tol,
        };
        gap_size(&g.with_lip(spec), &inner).value.to_f64()
    };
    let f = |raw: &[f64], _: &mut rand_chacha::ChaCha8Rng| {
        let l = feasible_along(&g.data, raw, &top, tol);
        let gamma = gamma_of(&l);
        Candidate {
            value: gamma,
            residual: 0.0,
            payload: l,
            evaluations: 1,
        }
    };
    let opts = DeOptions {
        npop: config.outer_npop,
        weight: config.de_weight,
        crossover: config.de_crossover,
        termination: config.outer_termination(),
        max_generations: config.max_generations.min(500),
        seed: config.seed,
        direction: Direction::Minimize,
        feasibility_tol: 0.0,
    };
    let lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let out = de_optimize(&f, bounds, &[lower], &opts);
    let lip = LipschitzSpec::new(out.best.payload.clone(), tol)?;
    debug_assert!(lipschitz_feasible(&g.data, &lip)?);
    let gamma = gap_size(&g.with_lip(lip.clone()), config).value.to_f64();
    Ok(FitReport {
        lip,
        gamma,
        trace: out.trace,
        stats: SolveStats {
            seed: config.seed,
            generations: out.generations,
            evaluations: out.evaluations,
            restarts_used: 1,
        },
    })
}
