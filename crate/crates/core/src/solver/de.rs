//! Differential evolution (rand/1/bin) with feasibility-first ranking and a
//! compass-search polish.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Direction, Termination};
use super::mix_seed;
use crate::report::{Trace, TraceEntry};

/// Result of evaluating one raw vector.
#[derive(Clone, Debug)]
pub struct Candidate<P> {
    pub value: f64,
    /// Constraint violation left after repair; `<= feasibility_tol` counts as feasible.
    pub residual: f64,
    pub payload: P,
    /// Objective evaluations spent, including this one.
    pub evaluations: u64,
}

impl<P> Candidate<P> {
    pub fn plain(value: f64, payload: P) -> Self {
        Self {
            value,
            residual: 0.0,
            payload,
            evaluations: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DeOptions {
    pub npop: usize,
    pub weight: f64,
    pub crossover: f64,
    pub termination: Termination,
    pub max_generations: usize,
    pub seed: u64,
    pub direction: Direction,
    pub feasibility_tol: f64,
}

#[derive(Clone, Debug)]
pub struct DeOutcome<P> {
    pub best_raw: Vec<f64>,
    pub best: Candidate<P>,
    pub trace: Trace,
    pub generations: usize,
    pub evaluations: u64,
    pub population: Vec<(Vec<f64>, Candidate<P>)>,
}

/// Feasibility-first comparison: a feasible candidate beats an infeasible
/// one, two infeasible candidates compare by residual, two feasible ones by
/// value.
pub fn deb_better<P>(a: &Candidate<P>, b: &Candidate<P>, dir: Direction, tol: f64) -> bool {
    let fa = a.residual <= tol;
    let fb = b.residual <= tol;
    match (fa, fb) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.residual < b.residual,
        (true, true) => dir.better(a.value, b.value),
    }
}

fn clip(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if v.is_nan() {
        lo
    } else {
        v.clamp(lo, hi)
    }
}

fn reached<P>(c: &Candidate<P>, opts: &DeOptions) -> bool {
    match opts.termination {
        Termination::ValueToReach { target } => {
            c.residual <= opts.feasibility_tol
                && match opts.direction {
                    Direction::Minimize => c.value <= target,
                    Direction::Maximize => c.value >= target,
                }
        }
        Termination::ChangeOverGenerations { .. } => false,
    }
}

/// Runs DE over the box `bounds`. `f` maps a raw vector to a repaired,
/// evaluated candidate; the population keeps the raw vectors. `init`
/// members replace the first random members of generation 0.
///
/// Every candidate draws from its own RNG stream keyed by
/// `(seed, generation, index)`, so results do not depend on scheduling.
pub fn de_optimize<P, F>(
    f: &F,
    bounds: &[(f64, f64)],
    init: &[Vec<f64>],
    opts: &DeOptions,
) -> DeOutcome<P>
where
    P: Clone + Send + Sync,
    F: Fn(&[f64], &mut ChaCha8Rng) -> Candidate<P> + Sync,
{
    let n = bounds.len();
    let npop = opts.npop.max(4);
    let tol = opts.feasibility_tol;

    let initial: Vec<Vec<f64>> = (0..npop)
        .map(|i| {
            if let Some(v) = init.get(i) {
                v.iter().zip(bounds).map(|(&x, &b)| clip(x, b)).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, 0, i as u64));
                bounds
                    .iter()
                    .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                    .collect()
            }
        })
        .collect();

    let eval = |g: usize, i: usize, x: &[f64]| {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, g as u64 + 1, i as u64));
        f(x, &mut rng)
    };

    // Value-to-reach runs return the first hit in index order.
    let mut evaluations = 0u64;
    let mut population: Vec<(Vec<f64>, Candidate<P>)> = Vec::with_capacity(npop);
    if matches!(opts.termination, Termination::ValueToReach { .. }) {
        for (i, x) in initial.into_iter().enumerate() {
            let c = eval(0, i, &x);
            evaluations += c.evaluations;
            let hit = reached(&c, opts);
            population.push((x, c));
            if hit {
                let (best_raw, best) = population.pop().unwrap();
                let trace = vec![TraceEntry {
                    generation: 0,
                    best_value: best.value,
                    feasibility_residual: best.residual,
                }];
                return DeOutcome {
                    best_raw: best_raw.clone(),
                    best: best.clone(),
                    trace,
                    generations: 0,
                    evaluations,
                    population: vec![(best_raw, best)],
                };
            }
        }
    } else {
        population = initial
            .into_par_iter()
            .enumerate()
            .map(|(i, x)| {
                let c = eval(0, i, &x);
                (x, c)
            })
            .collect();
        evaluations += population.iter().map(|(_, c)| c.evaluations).sum::<u64>();
    }

    let best_index = |pop: &[(Vec<f64>, Candidate<P>)]| {
        let mut b = 0;
        for i in 1..pop.len() {
            if deb_better(&pop[i].1, &pop[b].1, opts.direction, tol) {
                b = i;
            }
        }
        b
    };

    let mut trace = Trace::new();
    let mut b = best_index(&population);
    trace.push(TraceEntry {
        generation: 0,
        best_value: population[b].1.value,
        feasibility_residual: population[b].1.residual,
    });

    let mut stall = 0usize;
    let mut generation = 0usize;
    while generation < opts.max_generations && !reached(&population[b].1, opts) {
        if let Termination::ChangeOverGenerations { ngen, .. } = opts.termination {
            if stall >= ngen {
                break;
            }
        }
        generation += 1;
        let g = generation;
        let trials: Vec<(Vec<f64>, Candidate<P>)> = (0..npop)
            .into_par_iter()
            .map(|i| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(mix_seed(opts.seed ^ 0xD1FF, g as u64, i as u64));
                let mut pick = |avoid: &[usize]| loop {
                    let r = rng.gen_range(0..npop);
                    if !avoid.contains(&r) {
                        break r;
                    }
                };
                let r1 = pick(&[i]);
                let r2 = pick(&[i, r1]);
                let r3 = pick(&[i, r1, r2]);
                let jrand = rng.gen_range(0..n.max(1));
                let target = &population[i].0;
                let trial: Vec<f64> = (0..n)
                    .map(|j| {
                        if j == jrand || rng.gen::<f64>() < opts.crossover {
                            let v = population[r1].0[j]
                                + opts.weight * (population[r2].0[j] - population[r3].0[j]);
                            clip(v, bounds[j])
                        } else {
                            target[j]
                        }
                    })
                    .collect();
                let c = eval(g, i, &trial);
                (trial, c)
            })
            .collect();

        let prev = population[b].1.clone();
        for (i, (x, c)) in trials.into_iter().enumerate() {
            evaluations += c.evaluations;
            // Ties go to the trial so plateaus can be crossed.
            if !deb_better(&population[i].1, &c, opts.direction, tol) {
                population[i] = (x, c);
            }
        }
        b = best_index(&population);
        let cur = &population[b].1;
        let improved = match opts.termination {
            Termination::ChangeOverGenerations { tol: ctol, .. } => {
                let pf = prev.residual <= tol;
                let cf = cur.residual <= tol;
                match (pf, cf) {
                    (false, true) => true,
                    (true, true) => opts.direction.gain(cur.value, prev.value) >= ctol,
                    (false, false) => prev.residual - cur.residual >= ctol,
                    (true, false) => false,
                }
            }
            Termination::ValueToReach { .. } => true,
        };
        stall = if improved { 0 } else { stall + 1 };
        trace.push(TraceEntry {
            generation: g,
            best_value: cur.value,
            feasibility_residual: cur.residual,
        });
    }

    let (best_raw, best) = population[b].clone();
    DeOutcome {
        best_raw,
        best,
        trace,
        generations: generation,
        evaluations,
        population,
    }
}

#[derive(Clone, Debug)]
pub struct PolishOptions {
    /// Initial step as a fraction of `scale`.
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evaluations: u64,
    pub direction: Direction,
    pub feasibility_tol: f64,
    pub seed: u64,
}

pub struct PolishOutcome<P> {
    pub raw: Vec<f64>,
    pub best: Candidate<P>,
    pub evaluations: u64,
    /// Best value after each accepted move.
    pub steps: Vec<(f64, f64)>,
}

/// Pattern directions: every non-zero sign vector for small `n`, the
/// `2n` coordinate directions otherwise.
fn pattern(n: usize) -> Vec<Vec<i8>> {
    if n <= 6 {
        let total = 3usize.pow(n as u32);
        (0..total)
            .filter_map(|mut c| {
                let d: Vec<i8> = (0..n)
                    .map(|_| {
                        let s = (c % 3) as i8 - 1;
                        c /= 3;
                        s
                    })
                    .collect();
                d.iter().any(|&s| s != 0).then_some(d)
            })
            .collect()
    } else {
        (0..n)
            .flat_map(|j| {
                [1i8, -1].into_iter().map(move |s| {
                    let mut d = vec![0i8; n];
                    d[j] = s;
                    d
                })
            })
            .collect()
    }
}

/// Opportunistic pattern search from `start`. Step `j` is `s * scale[j]`;
/// `s` halves after a full unsuccessful poll.
pub fn pattern_polish<P, F>(
    f: &F,
    bounds: &[(f64, f64)],
    scale: &[f64],
    start: (Vec<f64>, Candidate<P>),
    opts: &PolishOptions,
) -> PolishOutcome<P>
where
    P: Clone,
    F: Fn(&[f64], &mut ChaCha8Rng) -> Candidate<P>,
{
    let n = bounds.len();
    let dirs = pattern(n);
    let (mut x, mut cur) = start;
    let mut s = opts.initial_step;
    let mut evaluations = 0u64;
    let mut counter = 0u64;
    let mut steps = Vec::new();
    while s >= opts.min_step && evaluations < opts.max_evaluations {
        let mut moved = false;
        for d in &dirs {
            let y: Vec<f64> = (0..n)
                .map(|j| clip(x[j] + d[j] as f64 * s * scale[j], bounds[j]))
                .collect();
            if y == x {
                continue;
            }
            counter += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, u64::MAX, counter));
            let c = f(&y, &mut rng);
            evaluations += c.evaluations;
            if deb_better(&c, &cur, opts.direction, opts.feasibility_tol) {
                x = y;
                cur = c;
                moved = true;
                steps.push((cur.value, cur.residual));
                break;
            }
            if evaluations >= opts.max_evaluations {
                break;
            }
        }
        if !moved {
            s *= 0.5;
        }
    }
    PolishOutcome {
        raw: x,
        best: cur,
        evaluations,
        steps,
    }
}
