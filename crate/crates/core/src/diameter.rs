//! Optimal upper bounds on McDiarmid subdiameters and the resulting
//! concentration-of-measure certificates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{gap_size, polygon_value, Envelope};
use crate::error::{Error, Result};
use crate::model::{worst_violation, Geometry};
use crate::report::{SolveStats, Trace};
use crate::solver::{maximize_global, metric_scale, mix_seed, SolverConfig};

/// The extremizer `(x, y)`, `(x', y')` of the diameter problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Maximizer {
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
    pub y: f64,
    pub y_prime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterReport {
    pub k: usize,
    pub dhat_k: f64,
    pub maximizer: Maximizer,
    pub gamma: f64,
    /// `4Γ`, the largest possible excess of `dhat_k` over the true subdiameter.
    pub error_cap: f64,
    /// The final population held other near-optimal witnesses.
    pub non_unique: bool,
    pub trace: Trace,
    pub stats: SolveStats,
}

fn check(g: &Geometry, k: usize) -> Result<()> {
    if k >= g.dim() {
        return Err(Error::InvalidInput(format!(
            "coordinate {k} out of range for K = {}",
            g.dim()
        )));
    }
    if let Some((i, j, violation)) = worst_violation(&g.data, &g.lip)? {
        return Err(Error::InfeasibleData { i, j, violation });
    }
    Ok(())
}

/// `D̂_k` given a precomputed gap size.
pub fn dhat_k_with_gamma(
    g: &Geometry,
    k: usize,
    gamma: f64,
    config: &SolverConfig,
) -> Result<DiameterReport> {
    check(g, k)?;
    let env = Envelope::of(g);
    let kk = g.dim();
    let mut bounds = g.domain.as_pairs();
    bounds.push(bounds[k]);
    let mut l = g.lip.constants.clone();
    l.push(l[k]);
    let scale = metric_scale(&l, &bounds);
    let split = |raw: &[f64]| {
        let x = raw[..kk].to_vec();
        let mut xp = x.clone();
        xp[k] = raw[kk];
        (x, xp)
    };
    let f = |raw: &[f64]| {
        let (x, xp) = split(raw);
        polygon_value(&env, &x, &xp).value
    };
    // Both ends of coordinate k are natural starting points.
    let mid: Vec<f64> = g
        .domain
        .bounds()
        .iter()
        .map(|b| 0.5 * (b.lo + b.hi))
        .collect();
    let mut seed_pt = mid.clone();
    seed_pt[k] = bounds[k].0;
    seed_pt.push(bounds[k].1);
    let cfg = SolverConfig {
        seed: mix_seed(config.seed, 0xD1A, k as u64),
        ..config.clone()
    };
    let out = maximize_global(&f, &bounds, &scale, &[seed_pt], &cfg);
    let (x, x_prime) = split(&out.x);
    let w = polygon_value(&env, &x, &x_prime);
    Ok(DiameterReport {
        k,
        dhat_k: w.value,
        maximizer: Maximizer {
            x,
            x_prime,
            y: w.y,
            y_prime: w.y_prime,
        },
        gamma,
        error_cap: diameter_error_cap(gamma),
        non_unique: !out.alternatives.is_empty(),
        trace: out.trace,
        stats: out.stats,
    })
}

/// `D̂_k`: the largest oscillation in coordinate `k` of any short
/// extension of the data.
pub fn dhat_k(g: &Geometry, k: usize, config: &SolverConfig) -> Result<DiameterReport> {
    check(g, k)?;
    let gamma = gap_size(g, config).value.to_f64();
    dhat_k_with_gamma(g, k, gamma, config)
}

/// All `K` subdiameters, solved concurrently.
pub fn dhat_all(g: &Geometry, config: &SolverConfig) -> Result<Vec<DiameterReport>> {
    let gamma = gap_size(g, config).value.to_f64();
    (0..g.dim())
        .into_par_iter()
        .map(|k| dhat_k_with_gamma(g, k, gamma, config))
        .collect()
}

/// Root-sum-square of the subdiameters. An upper bound on the McDiarmid
/// diameter, though not in general the least one.
pub fn dhat(subdiameters: &[f64]) -> f64 {
    subdiameters.iter().map(|d| d * d).sum::<f64>().sqrt()
}

/// `4Γ`.
pub fn diameter_error_cap(gamma: f64) -> f64 {
    4.0 * gamma
}

/// `exp(-2 (m - θ)₊² / D²)`.
pub fn mcdiarmid_pof_bound(m: f64, theta: f64, d: f64) -> f64 {
    let margin = (m - theta).max(0.0);
    if margin == 0.0 {
        1.0
    } else if d == 0.0 {
        0.0
    } else {
        (-2.0 * margin * margin / (d * d)).exp()
    }
}

/// True when `(m - θ)₊ / D ≥ sqrt(ln sqrt(1/p*))`, i.e. the McDiarmid
/// bound is at most `p*`. Comparison is exact up to a relative `1e-12`.
pub fn certify(m: f64, theta: f64, d: f64, p_star: f64) -> Result<bool> {
    if !(p_star > 0.0 && p_star <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "p_star must lie in (0, 1], got {p_star}"
        )));
    }
    let margin = (m - theta).max(0.0);
    let need = (0.5 * (1.0 / p_star).ln()).sqrt();
    if d == 0.0 {
        return Ok(margin > 0.0 || need == 0.0);
    }
    Ok(margin / d >= need * (1.0 - 1e-12))
}

/// `(1 - m₊/D)₊`, the optimal single-coordinate McDiarmid bound.
pub fn optimal_mcdiarmid_k1(m: f64, d: f64) -> f64 {
    if d == 0.0 {
        return if m > 0.0 { 0.0 } else { 1.0 };
    }
    (1.0 - m.max(0.0) / d).max(0.0)
}
