//! Redundant and non-binding observations, and the active-set loop that
//! solves with a small enforced subset of a large dataset.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diameter::{dhat_k_with_gamma, DiameterReport, Maximizer};
use crate::envelope::{gap_size, markov_max};
use crate::error::{Error, Result};
use crate::model::{BoxDomain, Dataset, LipschitzSpec, ProblemSpec, Scenario};
use crate::pof::{phat, Bound, PofOptions, PofReport};
use crate::solver::SolverConfig;

/// A sub-box `V` of the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub bounds: BoxDomain,
}

impl Region {
    /// Checks that `bounds ⊆ domain`.
    pub fn new(domain: &BoxDomain, bounds: BoxDomain) -> Result<Self> {
        if bounds.dim() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                found: bounds.dim(),
            });
        }
        for (k, (v, d)) in bounds.bounds().iter().zip(domain.bounds()).enumerate() {
            if v.lo < d.lo || v.hi > d.hi {
                return Err(Error::InvalidInput(format!(
                    "region [{}, {}] leaves the domain [{}, {}] in coordinate {k}",
                    v.lo, v.hi, d.lo, d.hi
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.bounds.contains(x)
    }

    /// Indices of the observations inside the region.
    pub fn members(&self, data: &Dataset) -> Vec<usize> {
        (0..data.len())
            .filter(|&i| self.contains(&data.points()[i]))
            .collect()
    }
}

/// `P_{x,V}`: the point of `V` closest to `x`, by coordinate-wise clamping.
pub fn project(x: &[f64], v: &Region) -> Vec<f64> {
    v.bounds.clamp(x)
}

/// Sufficient condition for `(z0, G(z0))` to be redundant on `V`: some
/// `z'` and `z''` in `V` satisfy
/// `G(z') + d_L(z', p) ≤ G(z0) + d_L(z0, p)` and
/// `G(z'') - d_L(z'', p) ≥ G(z0) - d_L(z0, p)` with `p = P_{z0,V}`.
/// `false` is inconclusive. The tolerance `T` cancels from both sides.
pub fn is_redundant_sufficient(
    z0: &[f64],
    g0: f64,
    v: &Region,
    data_in_v: &Dataset,
    lip: &LipschitzSpec,
) -> Result<bool> {
    if v.contains(z0) {
        return Err(Error::Contract(
            "the tested observation lies inside the region, where it is always relevant".into(),
        ));
    }
    if data_in_v.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = project(z0, v);
    let d0 = lip.try_distance(z0, &p)?;
    let mut upper = false;
    let mut lower = false;
    for (z, &g) in data_in_v.points().iter().zip(data_in_v.values()) {
        let d = lip.try_distance(z, &p)?;
        upper |= g + d <= g0 + d0;
        lower |= g - d >= g0 - d0;
    }
    Ok(upper && lower)
}

/// Direct check of redundancy on a grid of `resolution` points per axis in
/// `V`, plus every observation inside `V`: at each grid point the feasible
/// interval of `data` must lie inside the cone of `z0`. Exponential in `K`;
/// meant as a test oracle.
pub fn is_redundant_definitional(
    z0: &[f64],
    g0: f64,
    v: &Region,
    data: &Dataset,
    lip: &LipschitzSpec,
    resolution: usize,
) -> Result<bool> {
    let k = v.bounds.dim();
    if k > 3 {
        return Err(Error::InvalidInput(format!(
            "the grid oracle supports K <= 3, got {k}"
        )));
    }
    let n = resolution.max(2);
    let axes: Vec<Vec<f64>> = v
        .bounds
        .bounds()
        .iter()
        .map(|b| {
            (0..n)
                .map(|i| b.lo + (b.hi - b.lo) * i as f64 / (n - 1) as f64)
                .collect()
        })
        .collect();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n.pow(k as u32));
    let mut idx = vec![0usize; k];
    loop {
        points.push((0..k).map(|j| axes[j][idx[j]]).collect());
        let mut j = k;
        loop {
            if j == 0 {
                break;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < n {
                break;
            }
            idx[j] = 0;
            if j == 0 {
                j = usize::MAX;
                break;
            }
        }
        if j == usize::MAX {
            break;
        }
    }
    points.extend(data.points().iter().filter(|z| v.contains(z)).cloned());

    let t = lip.tolerance;
    for x in &points {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (z, &g) in data.points().iter().zip(data.values()) {
            let d = lip.try_distance(x, z)?;
            lo = lo.max(g - d - t);
            hi = hi.min(g + d + t);
        }
        if lo > hi {
            continue;
        }
        let d0 = lip.try_distance(x, z0)?;
        let slack = 1e-12 * (1.0 + g0.abs() + d0);
        if lo < g0 - d0 - t - slack || hi > g0 + d0 + t + slack {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Both maximizer points are feasible for the new observation, so adding
/// it leaves `D̂_k` unchanged. `false` is inconclusive.
pub fn is_nonbinding_diameter(
    z0: &[f64],
    g0: f64,
    maximizer: &Maximizer,
    lip: &LipschitzSpec,
    short_tol: f64,
) -> bool {
    [
        (&maximizer.x, maximizer.y),
        (&maximizer.x_prime, maximizer.y_prime),
    ]
    .iter()
    .all(|(x, y)| (y - g0).abs() <= lip.distance(x, z0) + lip.tolerance + short_tol)
}

/// Every cube point of the witness is feasible for the new observation,
/// so adding it leaves `P̂` unchanged. `false` is inconclusive.
pub fn is_nonbinding_pof(
    z0: &[f64],
    g0: f64,
    scenario: &Scenario,
    lip: &LipschitzSpec,
    short_tol: f64,
) -> bool {
    scenario
        .points()
        .iter()
        .zip(&scenario.y)
        .all(|(x, y)| (y - g0).abs() <= lip.distance(x, z0) + lip.tolerance + short_tol)
}

/// Extreme value targeted by the active-set loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `D̂_k` for the given coordinate.
    Diameter(usize),
    /// Upper bound `P̂` with the given support shape.
    Pof(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub added: Vec<usize>,
    pub added_labels: Vec<String>,
    pub value: f64,
    /// Observations still possibly binding after this iteration.
    pub remaining: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSetState {
    pub enforced: BTreeSet<usize>,
    pub candidates: BTreeSet<usize>,
    pub iteration: usize,
    pub history: Vec<HistoryEntry>,
    /// False when the iteration cap stopped the loop early.
    pub terminated: bool,
}

/// Which scored candidates join the enforced set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Candidates whose addition lowers the bound the most.
    #[default]
    GreatestChange,
    /// Candidates whose addition leaves the bound highest.
    Maximizers,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActiveSetOptions {
    pub selection: Selection,
    /// Admit only the first selected candidate instead of every tied one.
    pub single_winner: bool,
    /// Iteration cap; defaults to the number of observations.
    pub max_iterations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ActiveSetReport {
    Diameter(DiameterReport),
    Pof(PofReport),
}

impl ActiveSetReport {
    pub fn value(&self) -> f64 {
        match self {
            ActiveSetReport::Diameter(r) => r.dhat_k,
            ActiveSetReport::Pof(r) => r.phat,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSetOutcome {
    pub report: ActiveSetReport,
    pub state: ActiveSetState,
}

struct Solver<'a> {
    spec: &'a ProblemSpec,
    objective: &'a Objective,
    config: &'a SolverConfig,
    gamma: f64,
    markov: f64,
}

impl Solver<'_> {
    fn solve(&self, subset: &[usize], warm: Option<&Scenario>) -> Result<ActiveSetReport> {
        let sub = self.spec.with_data(self.spec.data.subset(subset));
        match self.objective {
            Objective::Diameter(k) => Ok(ActiveSetReport::Diameter(dhat_k_with_gamma(
                &sub,
                *k,
                self.gamma,
                self.config,
            )?)),
            Objective::Pof(shape) => {
                let options = PofOptions {
                    warm_start: warm.into_iter().cloned().collect(),
                    markov_max: Some(self.markov),
                };
                Ok(ActiveSetReport::Pof(phat(
                    &sub,
                    self.config,
                    shape,
                    Bound::Sup,
                    &options,
                )?))
            }
        }
    }

    /// Observations outside `enforced` that the witness may violate.
    fn possibly_binding(
        &self,
        report: &ActiveSetReport,
        enforced: &BTreeSet<usize>,
    ) -> BTreeSet<usize> {
        let data = &self.spec.data;
        let lip = &self.spec.lip;
        let tol = self.config.short_tol;
        (0..data.len())
            .filter(|i| !enforced.contains(i))
            .filter(|&i| {
                let (z, g) = (&data.points()[i], data.values()[i]);
                match report {
                    ActiveSetReport::Diameter(r) => {
                        !is_nonbinding_diameter(z, g, &r.maximizer, lip, tol)
                    }
                    // Without a witness the value is already zero and
                    // further constraints cannot raise it.
                    ActiveSetReport::Pof(r) => r
                        .scenario
                        .as_ref()
                        .is_some_and(|s| !is_nonbinding_pof(z, g, s, lip, tol)),
                }
            })
            .collect()
    }
}

fn witness(report: &ActiveSetReport) -> Option<&Scenario> {
    match report {
        ActiveSetReport::Pof(r) => r.scenario.as_ref(),
        ActiveSetReport::Diameter(_) => None,
    }
}

/// Active-set loop: score every candidate by the extreme value with it
/// added to the enforced set, enforce the selected ones (ties within
/// `outer_tol`), re-solve, and keep as candidates only the observations
/// that the new witness may violate. Stops when none remain.
///
/// The default selection enforces the candidates that lower the bound the
/// most. [`Selection::Maximizers`] instead enforces those that leave it
/// highest, which adds the least informative point first and typically
/// enforces most of the data before the binding points arrive.
pub fn active_set_solve(
    spec: &ProblemSpec,
    objective: &Objective,
    config: &SolverConfig,
    options: &ActiveSetOptions,
) -> Result<ActiveSetOutcome> {
    let n = spec.data.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Objective::Diameter(k) = objective {
        if *k >= spec.dim() {
            return Err(Error::InvalidInput(format!("coordinate {k} out of range")));
        }
    }
    // Both are properties of the full dataset, reused across subsets.
    let gamma = match objective {
        Objective::Diameter(_) => gap_size(spec, config).value.to_f64(),
        Objective::Pof(_) => f64::NAN,
    };
    let markov = match objective {
        Objective::Pof(_) => markov_max(spec, config).value.to_f64(),
        Objective::Diameter(_) => f64::NAN,
    };
    let solver = Solver {
        spec,
        objective,
        config,
        gamma,
        markov,
    };
    let cap = options.max_iterations.unwrap_or(n);
    let mut state = ActiveSetState {
        enforced: BTreeSet::new(),
        candidates: (0..n).collect(),
        iteration: 0,
        history: Vec::new(),
        terminated: false,
    };
    let mut current: Option<ActiveSetReport> = None;

    while state.iteration < cap {
        state.iteration += 1;
        let warm = current.as_ref().and_then(witness);
        let candidates: Vec<usize> = state.candidates.iter().copied().collect();
        let scores: Vec<f64> = candidates
            .par_iter()
            .map(|&z| {
                let mut subset: Vec<usize> = state.enforced.iter().copied().collect();
                subset.push(z);
                subset.sort_unstable();
                solver.solve(&subset, warm).map(|r| r.value())
            })
            .collect::<Result<_>>()?;
        let pick = |s: f64| match options.selection {
            Selection::GreatestChange => -s,
            Selection::Maximizers => s,
        };
        let best = scores
            .iter()
            .map(|&s| pick(s))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut added: Vec<usize> = candidates
            .iter()
            .zip(&scores)
            .filter(|(_, &s)| pick(s) >= best - config.outer_tol)
            .map(|(&z, _)| z)
            .collect();
        if options.single_winner {
            added.truncate(1);
        }
        state.enforced.extend(added.iter().copied());
        let subset: Vec<usize> = state.enforced.iter().copied().collect();
        let report = solver.solve(&subset, warm)?;
        state.candidates = solver.possibly_binding(&report, &state.enforced);
        state.history.push(HistoryEntry {
            iteration: state.iteration,
            added_labels: added.iter().map(|&i| spec.data.label(i)).collect(),
            added,
            value: report.value(),
            remaining: state.candidates.len(),
        });
        current = Some(report);
        if state.candidates.is_empty() {
            state.terminated = true;
            break;
        }
    }
    Ok(ActiveSetOutcome {
        report: current.expect("at least one iteration"),
        state,
    })
}
