//! The two-loop constrained optimizer: an outer differential-evolution
//! search over raw decision vectors and a constraint chain that maps every
//! raw vector to a feasible scenario before the objective sees it.

pub mod chain;
pub mod config;
pub mod de;
pub mod verify;

use rand_chacha::ChaCha8Rng;

pub use chain::{
    complete, feasibility_residual, impose_mean, impose_shortness, normalize_weights, ChainContext,
    Encoding, Repaired,
};
pub use config::{Direction, ForcedFailure, SolverConfig, Termination};
pub use de::{
    de_optimize, deb_better, pattern_polish, Candidate, DeOptions, DeOutcome, PolishOptions,
};
pub use verify::{verify, Verification};

use crate::report::{SolveStats, Trace, TraceEntry};

/// Deterministic 64-bit mix of `(seed, a, b)` (splitmix64 finalizer).
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(31);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Best point found by [`maximize_global`].
#[derive(Clone, Debug)]
pub struct GlobalMax {
    pub x: Vec<f64>,
    pub value: f64,
    pub trace: Trace,
    pub stats: SolveStats,
    /// Final-population members within `outer_tol` of the best value but
    /// away from `x`.
    pub alternatives: Vec<Vec<f64>>,
}

/// Unconstrained global maximization of `f` over a box: DE followed by a
/// pattern-search polish with per-coordinate step `scale[j]`.
pub fn maximize_global<F>(
    f: &F,
    bounds: &[(f64, f64)],
    scale: &[f64],
    init: &[Vec<f64>],
    config: &SolverConfig,
) -> GlobalMax
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let g = |x: &[f64], _: &mut ChaCha8Rng| Candidate::plain(f(x), ());
    let opts = DeOptions {
        npop: config.outer_npop,
        weight: config.de_weight,
        crossover: config.de_crossover,
        termination: config.outer_termination(),
        max_generations: config.max_generations,
        seed: config.seed,
        direction: Direction::Maximize,
        feasibility_tol: 0.0,
    };
    let out = de_optimize(&g, bounds, init, &opts);
    let mut x = out.best_raw.clone();
    let mut value = out.best.value;
    let mut trace = out.trace.clone();
    let mut evaluations = out.evaluations;
    let mut generations = out.generations;
    if config.polish {
        let p = pattern_polish(
            &g,
            bounds,
            scale,
            (out.best_raw.clone(), out.best.clone()),
            &PolishOptions {
                initial_step: 0.05,
                min_step: 1e-13,
                max_evaluations: 200_000,
                direction: Direction::Maximize,
                feasibility_tol: 0.0,
                seed: config.seed,
            },
        );
        evaluations += p.evaluations;
        if p.best.value > value {
            generations += 1;
            trace.push(TraceEntry {
                generation: generations,
                best_value: p.best.value,
                feasibility_residual: 0.0,
            });
            x = p.raw;
            value = p.best.value;
        }
    }
    let alternatives = near_optimal(&out.population, &x, value, config.outer_tol, bounds);
    GlobalMax {
        x,
        value,
        trace,
        stats: SolveStats {
            seed: config.seed,
            generations,
            evaluations,
            restarts_used: 1,
        },
        alternatives,
    }
}

/// Members of `population` scoring within `tol` of `value` whose position
/// differs from `x` by more than 1% of the box in some coordinate.
fn near_optimal<P>(
    population: &[(Vec<f64>, Candidate<P>)],
    x: &[f64],
    value: f64,
    tol: f64,
    bounds: &[(f64, f64)],
) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (raw, c) in population {
        if c.value < value - tol {
            continue;
        }
        let far = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .zip(bounds)
                .any(|((u, v), (lo, hi))| (u - v).abs() > 0.01 * (hi - lo))
        };
        if far(raw, x) && out.iter().all(|o| far(raw, o)) {
            out.push(raw.clone());
        }
    }
    out
}

/// Pattern steps aligned with the quasi-metric: `1/L_j` where `L_j > 0`.
pub fn metric_scale(constants: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    let diam: f64 = constants
        .iter()
        .zip(bounds)
        .map(|(l, (lo, hi))| l * (hi - lo))
        .sum();
    constants
        .iter()
        .zip(bounds)
        .map(|(&l, &(lo, hi))| {
            if l > 0.0 {
                // Normalized so a unit step spans the d_L-diameter.
                diam / l
            } else {
                hi - lo
            }
        })
        .collect()
}
