//! Independent re-check of a scenario against every constraint. Shares no
//! code with the chain beyond the distance function.

use serde::{Deserialize, Serialize};

use super::config::SolverConfig;
use crate::model::ProblemSpec;
use crate::model::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub valid: bool,
    pub weight_sum: f64,
    pub mean: f64,
    /// `E[y] - m`; must be at least `-mean_tol`.
    pub mean_slack: f64,
    /// Largest `|y - G(z)| - d_L - T` over cube points and data.
    pub max_data_violation: f64,
    /// Largest `|y_ε - y_ε'| - d_L - T` over cube pairs.
    pub max_pair_violation: f64,
    /// Recomputed `μ[y ≤ θ]`.
    pub objective: f64,
    pub violations: Vec<String>,
}

fn bit(index: usize, dim: usize, k: usize) -> bool {
    (index >> (dim - 1 - k)) & 1 == 1
}

/// Recomputes weights, mean, shortness and objective from scratch. Cube
/// pairs at Hamming distance `h` may exceed the bound by `h · short_tol`,
/// the slack that edge-wise checks accumulate along a path.
pub fn verify(s: &Scenario, spec: &ProblemSpec, config: &SolverConfig) -> Verification {
    let mut violations = Vec::new();
    let k = spec.dim();
    let n = 1usize << k;
    let sizes_ok = s.x0.len() == k
        && s.x1.len() == k
        && s.p.len() == k
        && s.y.len() == n
        && s.support_shape.len() == k;
    if !sizes_ok {
        return Verification {
            valid: false,
            weight_sum: f64::NAN,
            mean: f64::NAN,
            mean_slack: f64::NAN,
            max_data_violation: f64::NAN,
            max_pair_violation: f64::NAN,
            objective: f64::NAN,
            violations: vec!["scenario dimensions do not match the problem".into()],
        };
    }

    for j in 0..k {
        if !(0.0..=1.0).contains(&s.p[j]) {
            violations.push(format!("weight p[{j}] = {} outside [0, 1]", s.p[j]));
        }
        if s.support_shape[j] == 1 && (s.x0[j] != s.x1[j] || s.p[j] != 1.0) {
            violations.push(format!(
                "coordinate {j} is collapsed but x0 != x1 or p != 1"
            ));
        }
    }
    if !spec.domain.contains(&s.x0) {
        violations.push("x0 outside the domain".into());
    }
    if !spec.domain.contains(&s.x1) {
        violations.push("x1 outside the domain".into());
    }

    let points: Vec<Vec<f64>> = (0..n)
        .map(|e| {
            (0..k)
                .map(|j| if bit(e, k, j) { s.x1[j] } else { s.x0[j] })
                .collect()
        })
        .collect();
    let weights: Vec<f64> = (0..n)
        .map(|e| {
            (0..k)
                .map(|j| if bit(e, k, j) { 1.0 - s.p[j] } else { s.p[j] })
                .product()
        })
        .collect();
    let weight_sum: f64 = weights.iter().sum();
    if (weight_sum - 1.0).abs() > 1e-12 || weights.iter().any(|&w| w < 0.0) {
        violations.push(format!("weights sum to {weight_sum}"));
    }
    let mean: f64 = weights.iter().zip(&s.y).map(|(w, y)| w * y).sum();
    let mean_slack = mean - spec.m;
    if mean_slack < -config.mean_tol {
        violations.push(format!("mean {mean} below m = {}", spec.m));
    }

    let lip = &spec.lip;
    let t = lip.tolerance;
    let tol = config.short_tol;
    let mut max_data_violation = f64::NEG_INFINITY;
    for (e, (x, y)) in points.iter().zip(&s.y).enumerate() {
        for (i, (z, g)) in spec
            .data
            .points()
            .iter()
            .zip(spec.data.values())
            .enumerate()
        {
            let v = (y - g).abs() - lip.distance(x, z) - t;
            max_data_violation = max_data_violation.max(v);
            if v > tol {
                violations.push(format!(
                    "corner {e:0k$b} and datum {} differ by {v:.3e} beyond d_L + T",
                    spec.data.label(i)
                ));
            }
        }
    }
    let mut max_pair_violation = f64::NEG_INFINITY;
    for a in 0..n {
        for b in (a + 1)..n {
            let v = (s.y[a] - s.y[b]).abs() - lip.distance(&points[a], &points[b]) - t;
            max_pair_violation = max_pair_violation.max(v);
            let h = (a ^ b).count_ones() as f64;
            if v > h * tol {
                let kind = if h == 1.0 { "edge" } else { "pair" };
                violations.push(format!(
                    "{kind} ({a:0k$b}, {b:0k$b}) violates shortness by {v:.3e}"
                ));
            }
        }
    }
    let objective = weights
        .iter()
        .zip(&s.y)
        .filter(|(_, &y)| y <= spec.theta)
        .map(|(w, _)| w)
        .sum::<f64>()
        .min(1.0);

    Verification {
        valid: violations.is_empty(),
        weight_sum,
        mean,
        mean_slack,
        max_data_violation,
        max_pair_violation,
        objective,
        violations,
    }
}
