//! Raw-vector encoding of scenarios and the constraint chain
//! `C = C ∘ C″ ∘ C′` (normalize weights, impose mean, impose shortness).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{Direction, SolverConfig};
use super::de::{de_optimize, Candidate, DeOptions};
use crate::envelope::Envelope;
use crate::error::{Error, Result};
use crate::model::{BoxDomain, CubeIndex, Geometry, Scenario};

/// Layout of the raw decision vector for a given support shape:
/// `x0` (all `K` coordinates), `x1` and `p` (free coordinates only), then
/// one `y` per point of the reduced cube in [`CubeIndex`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoding {
    shape: Vec<u8>,
    free: Vec<usize>,
}

impl Encoding {
    pub fn new(shape: &[u8]) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&s| s != 1 && s != 2) {
            return Err(Error::InvalidInput(format!(
                "support shape must be a non-empty list of 1s and 2s, got {shape:?}"
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            free: (0..shape.len()).filter(|&k| shape[k] == 2).collect(),
        })
    }

    pub fn full(k: usize) -> Self {
        Self::new(&vec![2; k]).expect("valid shape")
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[u8] {
        &self.shape
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Number of distinct support points.
    pub fn atoms(&self) -> usize {
        1 << self.free.len()
    }

    pub fn len(&self) -> usize {
        self.dim() + 2 * self.free.len() + self.atoms()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn y_offset(&self) -> usize {
        self.dim() + 2 * self.free.len()
    }

    /// Position of corner `e` in the reduced cube.
    pub fn atom_of(&self, e: CubeIndex) -> usize {
        self.free
            .iter()
            .fold(0, |acc, &k| (acc << 1) | e.bit(k) as usize)
    }

    /// Representative full-cube corner of atom `a` (collapsed bits zero).
    pub fn corner_of(&self, a: usize) -> CubeIndex {
        let k = self.dim();
        let r = self.free.len();
        let mut index = 0;
        for (i, &f) in self.free.iter().enumerate() {
            if (a >> (r - 1 - i)) & 1 == 1 {
                index |= 1 << (k - 1 - f);
            }
        }
        CubeIndex::new(index, k)
    }

    pub fn bounds(&self, domain: &BoxDomain, y_box: (f64, f64)) -> Vec<(f64, f64)> {
        let b = domain.as_pairs();
        let mut out = b.clone();
        out.extend(self.free.iter().map(|&k| b[k]));
        out.extend(self.free.iter().map(|_| (0.0, 1.0)));
        out.extend((0..self.atoms()).map(|_| y_box));
        out
    }

    /// Builds the scenario without any repair. Collapsed coordinates get
    /// `x1 = x0` and `p = 1`; twin corners share their atom's value.
    pub fn decode(&self, raw: &[f64]) -> Scenario {
        let k = self.dim();
        let r = self.free.len();
        let x0 = raw[..k].to_vec();
        let mut x1 = x0.clone();
        let mut p = vec![1.0; k];
        for (i, &f) in self.free.iter().enumerate() {
            x1[f] = raw[k + i];
            p[f] = raw[k + r + i];
        }
        let ys = &raw[self.y_offset()..];
        let y = CubeIndex::all(k).map(|e| ys[self.atom_of(e)]).collect();
        Scenario {
            x0,
            x1,
            p,
            y,
            support_shape: self.shape.clone(),
        }
    }

    pub fn encode(&self, s: &Scenario) -> Vec<f64> {
        let mut out = s.x0.clone();
        out.extend(self.free.iter().map(|&f| s.x1[f]));
        out.extend(self.free.iter().map(|&f| s.p[f]));
        out.extend((0..self.atoms()).map(|a| s.y[self.corner_of(a).index]));
        out
    }

    /// Enforces the collapse on an arbitrary scenario.
    pub fn canonical(&self, s: &Scenario) -> Scenario {
        self.decode(&self.encode(s))
    }
}

/// Everything the chain needs besides the scenario itself.
#[derive(Clone, Copy, Debug)]
pub struct ChainContext<'a> {
    pub geometry: &'a Geometry,
    pub m: f64,
    pub theta: f64,
    pub config: &'a SolverConfig,
    pub encoding: &'a Encoding,
    /// Which objective the repair should favour when it lifts values.
    pub direction: Direction,
    /// Atom whose value is pinned to the failure threshold.
    pub pinned: Option<usize>,
}

impl ChainContext<'_> {
    fn env(&self) -> Envelope<'_> {
        Envelope::of(self.geometry)
    }

    /// Search box for raw `y` values: every feasible value lies within the
    /// data range widened by the domain diameter and `T`.
    pub fn y_box(&self) -> (f64, f64) {
        let g = self.geometry;
        let vals = g.data.values();
        let lo = vals.iter().copied().fold(self.m.min(self.theta), f64::min);
        let hi = vals.iter().copied().fold(self.m.max(self.theta), f64::max);
        let reach = g.lip.diameter_of(&g.domain) + g.lip.tolerance + self.config.short_tol;
        (lo - reach, hi + reach)
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.encoding.bounds(&self.geometry.domain, self.y_box())
    }

    /// Pinned value `min(θ, Y⁺(x))`.
    fn pin_value(&self, x: &[f64]) -> f64 {
        self.theta.min(self.env().upper_f64(x))
    }
}

/// Output of the shortness solver.
#[derive(Clone, Debug)]
pub struct Repaired {
    pub scenario: Scenario,
    /// Remaining violation; zero means every constraint holds.
    pub residual: f64,
    pub evaluations: u64,
}

/// `C′`: clamps each `p_k` into `[0, 1]`.
pub fn normalize_weights(s: &Scenario) -> Scenario {
    let mut out = s.clone();
    for p in &mut out.p {
        *p = if p.is_nan() { 1.0 } else { p.clamp(0.0, 1.0) };
    }
    out
}

/// `C″`: raises the values by a constant when the mean falls short of `m`.
/// With pinned atoms, only the remaining corners move, by
/// `(m - E)/W_free`.
pub fn impose_mean(s: &Scenario, m: f64, pinned: &[usize]) -> Scenario {
    let mut out = s.clone();
    let e = s.mean();
    if e >= m {
        return out;
    }
    let free: Vec<bool> = (0..s.y.len()).map(|i| !pinned.contains(&i)).collect();
    let w_free: f64 = s
        .corners()
        .zip(&free)
        .filter(|(_, &f)| f)
        .map(|(c, _)| s.weight(c))
        .sum();
    if w_free <= 0.0 {
        return out;
    }
    let shift = (m - e) / w_free;
    for (y, &f) in out.y.iter_mut().zip(&free) {
        if f {
            *y += shift;
        }
    }
    out
}

/// Shortness violations (data versus cube, and cube versus cube) summed as
/// `Σ max(0, |Δy| - d_L - T - short_tol)`. Without tolerance only cube
/// edges are needed; with `T > 0` every pair is checked, since paths no
/// longer compose.
pub fn shortness_residual(s: &Scenario, g: &Geometry, short_tol: f64) -> f64 {
    let lip = &g.lip;
    let t = lip.tolerance;
    let pts = s.points();
    let mut r = 0.0;
    for (x, &y) in pts.iter().zip(&s.y) {
        for (z, &gz) in g.data.points().iter().zip(g.data.values()) {
            r += ((y - gz).abs() - lip.distance(x, z) - t - short_tol).max(0.0);
        }
    }
    let n = pts.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if t == 0.0 && (i ^ j).count_ones() != 1 {
                continue;
            }
            r +=
                ((s.y[i] - s.y[j]).abs() - lip.distance(&pts[i], &pts[j]) - t - short_tol).max(0.0);
        }
    }
    r
}

/// Shortness residual plus the mean deficit beyond `mean_tol`.
pub fn feasibility_residual(s: &Scenario, ctx: &ChainContext<'_>) -> f64 {
    shortness_residual(s, ctx.geometry, ctx.config.short_tol)
        + (ctx.m - ctx.config.mean_tol - s.mean()).max(0.0)
}

/// Reduced view: one entry per distinct support point.
struct Atoms {
    x: Vec<Vec<f64>>,
    w: Vec<f64>,
    y: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Atoms {
    fn of(s: &Scenario, ctx: &ChainContext<'_>) -> Self {
        let enc = ctx.encoding;
        let env = ctx.env();
        let n = enc.atoms();
        let mut w = vec![0.0; n];
        for e in s.corners() {
            w[enc.atom_of(e)] += s.weight(e);
        }
        let x: Vec<Vec<f64>> = (0..n).map(|a| s.point(enc.corner_of(a))).collect();
        let y = (0..n).map(|a| s.y[enc.corner_of(a).index]).collect();
        let lo = x.iter().map(|p| env.lower_f64(p)).collect();
        let hi = x.iter().map(|p| env.upper_f64(p)).collect();
        Self { x, w, y, lo, hi }
    }

    fn mean(&self) -> f64 {
        self.w.iter().zip(&self.y).map(|(w, y)| w * y).sum()
    }

    fn write_back(&self, s: &Scenario, enc: &Encoding) -> Scenario {
        let mut out = s.clone();
        for e in s.corners() {
            out.y[e.index] = self.y[enc.atom_of(e)];
        }
        out
    }

    /// Largest values for `moving` atoms given data and `fixed` atoms.
    fn ceiling(&self, ctx: &ChainContext<'_>, moving: &[usize], fixed: &[usize]) -> Vec<f64> {
        let lip = &ctx.geometry.lip;
        moving
            .iter()
            .map(|&i| {
                let mut h = self.hi[i];
                for &j in fixed {
                    h = h.min(self.y[j] + lip.distance(&self.x[i], &self.x[j]) + lip.tolerance);
                }
                h.max(self.y[i])
            })
            .collect()
    }

    /// Moves `moving` atoms toward `ceiling` just far enough to reach mean
    /// `m`. Returns true when the target was met.
    fn lift(&mut self, moving: &[usize], ceiling: &[f64], m: f64) -> bool {
        let e = self.mean();
        if e >= m {
            return true;
        }
        let gain: f64 = moving
            .iter()
            .zip(ceiling)
            .map(|(&i, c)| self.w[i] * (c - self.y[i]))
            .sum();
        let t = if gain > 0.0 && e + gain >= m {
            (m - e) / gain
        } else {
            1.0
        };
        for (&i, c) in moving.iter().zip(ceiling) {
            self.y[i] += t * (c - self.y[i]);
        }
        t < 1.0 || e + gain >= m
    }
}

/// Deterministic repair: a sequential McShane clamp (pinned atom first,
/// then the reduced cube in order) against the data and every atom already
/// placed, followed by a mean-restoring lift toward the largest feasible
/// values. Atoms that the objective wants to keep are held fixed in a
/// first lift; a second lift moves every unpinned atom.
///
/// With positions and weights fixed, the second lift reaches the largest
/// achievable mean, so a remaining deficit certifies infeasibility.
pub fn repair(s: &Scenario, ctx: &ChainContext<'_>) -> Scenario {
    let lip = &ctx.geometry.lip;
    let mut a = Atoms::of(s, ctx);
    let n = a.y.len();
    let pinned: Vec<usize> = ctx.pinned.into_iter().collect();
    let order: Vec<usize> = pinned
        .iter()
        .copied()
        .chain((0..n).filter(|i| !pinned.contains(i)))
        .collect();
    for (pos, &i) in order.iter().enumerate() {
        if pinned.contains(&i) {
            continue;
        }
        let (mut lo, mut hi) = (a.lo[i], a.hi[i]);
        for &j in &order[..pos] {
            let r = lip.distance(&a.x[i], &a.x[j]) + lip.tolerance;
            lo = lo.max(a.y[j] - r);
            hi = hi.min(a.y[j] + r);
        }
        a.y[i] = if lo <= hi { a.y[i].clamp(lo, hi) } else { hi };
    }

    let unpinned: Vec<usize> = (0..n).filter(|i| !pinned.contains(i)).collect();
    let keep = |y: f64| match ctx.direction {
        Direction::Maximize => y <= ctx.theta,
        Direction::Minimize => y > ctx.theta,
    };
    let first: Vec<usize> = unpinned
        .iter()
        .copied()
        .filter(|&i| !keep(a.y[i]))
        .collect();
    let held: Vec<usize> = (0..n).filter(|i| !first.contains(i)).collect();
    let met = if first.is_empty() {
        a.mean() >= ctx.m
    } else {
        let c = a.ceiling(ctx, &first, &held);
        a.lift(&first, &c, ctx.m)
    };
    if !met {
        let c = a.ceiling(ctx, &unpinned, &pinned);
        a.lift(&unpinned, &c, ctx.m);
    }
    a.write_back(s, ctx.encoding)
}

/// Objective-aware completion of a feasible scenario with positions held.
/// For the upper bound, failing atoms rise to `min(θ, Y⁺)` and the others
/// to their ceiling given the failing ones; for the lower bound every atom
/// rises to `Y⁺`. Each free weight then moves to the better end of its
/// feasible range, which is exact coordinate-wise because objective and
/// mean are both affine in a single `p_k`. Returns `s` when the result
/// would not be feasible.
pub fn complete(s: &Scenario, ctx: &ChainContext<'_>) -> Scenario {
    let mut a = Atoms::of(s, ctx);
    if a.hi.iter().any(|h| !h.is_finite()) {
        return s.clone();
    }
    let n = a.y.len();
    let theta = ctx.theta;
    match ctx.direction {
        Direction::Maximize => {
            let fail: Vec<usize> = (0..n).filter(|&i| a.y[i] <= theta).collect();
            let rest: Vec<usize> = (0..n).filter(|&i| a.y[i] > theta).collect();
            for &i in &fail {
                a.y[i] = a.y[i].max(theta.min(a.hi[i]));
            }
            let c = a.ceiling(ctx, &rest, &fail);
            for (&i, c) in rest.iter().zip(c) {
                a.y[i] = c;
            }
        }
        Direction::Minimize => a.y.clone_from(&a.hi),
    }
    let mut out = a.write_back(s, ctx.encoding);

    let free = ctx.encoding.free();
    let objective = |c: &Scenario| c.failure_probability(theta);
    for _ in 0..=free.len() {
        let mut moved = false;
        for &k in free {
            let at = |t: f64| {
                let mut c = out.clone();
                c.p[k] = t;
                (objective(&c), c.mean())
            };
            let ((o0, m0), (o1, m1)) = (at(0.0), at(1.0));
            // Feasible part of [0, 1] for the affine mean m0 + (m1 - m0) t.
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let dm = m1 - m0;
            if dm > 0.0 {
                lo = lo.max((ctx.m - m0) / dm);
            } else if dm < 0.0 {
                hi = hi.min((ctx.m - m0) / dm);
            } else if m0 < ctx.m {
                continue;
            }
            if lo > hi {
                continue;
            }
            let target = if ctx.direction.better(o1, o0) {
                hi
            } else if ctx.direction.better(o0, o1) {
                lo
            } else {
                continue;
            };
            if target != out.p[k] {
                out.p[k] = target;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    if feasibility_residual(&out, ctx) > 0.0 || ctx.direction.better(objective(s), objective(&out))
    {
        return s.clone();
    }
    out
}

/// `C`: returns `s` unchanged when it already satisfies every constraint,
/// else applies the deterministic [`repair`]. In the default values-only
/// mode the repair is final: it always restores shortness and attains the
/// largest mean the positions allow. With `joint_inner` a failed repair
/// falls through to an inner DE over positions and values (value-to-reach
/// on the residual) seeded with the repaired scenario; its candidates pass
/// through `C′`, `C″` and the repair again.
pub fn impose_shortness(s: &Scenario, ctx: &ChainContext<'_>, rng: &mut ChaCha8Rng) -> Repaired {
    let r0 = feasibility_residual(s, ctx);
    if r0 == 0.0 {
        return Repaired {
            scenario: s.clone(),
            residual: 0.0,
            evaluations: 1,
        };
    }
    let fixed = repair(s, ctx);
    let r1 = feasibility_residual(&fixed, ctx);
    if r1 == 0.0 || !ctx.config.joint_inner {
        return Repaired {
            scenario: fixed,
            residual: r1,
            evaluations: 2,
        };
    }

    let cfg = ctx.config;
    let opts = DeOptions {
        npop: cfg.inner_npop,
        weight: cfg.de_weight,
        crossover: cfg.de_crossover,
        termination: cfg.inner_termination(),
        max_generations: cfg.inner_budget,
        seed: rng.gen(),
        direction: Direction::Minimize,
        feasibility_tol: 0.0,
    };
    let enc = ctx.encoding;
    let pinned: Vec<usize> = pinned_corners(ctx);
    // Positions and values move; weights stay.
    let p = s.p.clone();
    let bounds = ctx.bounds();
    let f = |raw: &[f64], _: &mut ChaCha8Rng| {
        let mut c = enc.decode(raw);
        c.p = p.clone();
        let c = pre_chain(&c, ctx, &pinned);
        let c = repair(&c, ctx);
        let r = feasibility_residual(&c, ctx);
        Candidate {
            value: r,
            residual: 0.0,
            payload: c,
            evaluations: 1,
        }
    };
    let out = de_optimize(&f, &bounds, &[enc.encode(&fixed)], &opts);
    Repaired {
        scenario: out.best.payload,
        residual: out.best.value,
        evaluations: 1 + out.evaluations,
    }
}

/// Full-cube indices of every corner belonging to the pinned atom.
fn pinned_corners(ctx: &ChainContext<'_>) -> Vec<usize> {
    match ctx.pinned {
        None => Vec::new(),
        Some(a) => CubeIndex::all(ctx.encoding.dim())
            .filter(|&e| ctx.encoding.atom_of(e) == a)
            .map(|e| e.index)
            .collect(),
    }
}

/// `C′`, the pin, then `C″`.
fn pre_chain(s: &Scenario, ctx: &ChainContext<'_>, pinned: &[usize]) -> Scenario {
    let mut c = normalize_weights(s);
    if let Some(&first) = pinned.first() {
        let v = ctx.pin_value(&c.point(CubeIndex::new(first, c.dim())));
        for &i in pinned {
            c.y[i] = v;
        }
    }
    impose_mean(&c, ctx.m, pinned)
}

/// Decodes a raw vector, boxes each value into its envelope (widened by
/// `short_tol`), and runs the whole chain.
pub fn apply_chain(raw: &[f64], ctx: &ChainContext<'_>, rng: &mut ChaCha8Rng) -> Repaired {
    let mut s = ctx.encoding.decode(raw);
    let env = ctx.env();
    let tol = ctx.config.short_tol;
    for e in s.corners().collect::<Vec<_>>() {
        let x = s.point(e);
        let (lo, hi) = (env.lower_f64(&x) - tol, env.upper_f64(&x) + tol);
        if lo <= hi {
            s.y[e.index] = s.y[e.index].clamp(lo, hi);
        }
    }
    let pinned = pinned_corners(ctx);
    let s = pre_chain(&s, ctx, &pinned);
    let mut r = impose_shortness(&s, ctx, rng);
    if ctx.config.complete && r.residual == 0.0 {
        r.scenario = complete(&r.scenario, ctx);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dataset, LipschitzSpec};
    use rand::SeedableRng;

    fn geom1(points: &[f64], values: &[f64]) -> Geometry {
        Geometry::new(
            BoxDomain::unit(1),
            LipschitzSpec::exact(vec![1.0]).unwrap(),
            Dataset::new(
                points.iter().map(|&p| vec![p]).collect(),
                values.to_vec(),
                None,
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn ctx<'a>(
        g: &'a Geometry,
        cfg: &'a SolverConfig,
        enc: &'a Encoding,
        m: f64,
    ) -> ChainContext<'a> {
        ChainContext {
            geometry: g,
            m,
            theta: 0.0,
            config: cfg,
            encoding: enc,
            direction: Direction::Maximize,
            pinned: None,
        }
    }

    #[test]
    fn encoding_roundtrip() {
        let enc = Encoding::new(&[1, 2, 2]).unwrap();
        assert_eq!(enc.len(), 3 + 4 + 4);
        let raw: Vec<f64> = (0..enc.len()).map(|i| i as f64 * 0.1).collect();
        let s = enc.decode(&raw);
        assert_eq!(s.x1[0], s.x0[0]);
        assert_eq!(s.p[0], 1.0);
        assert_eq!(enc.encode(&s), raw);
        // Twins share values.
        assert_eq!(s.y[0b000], s.y[0b100]);
        assert_eq!(s.y[0b011], s.y[0b111]);
    }

    #[test]
    fn weights_are_clamped() {
        let s = Scenario::new(vec![0.0], vec![1.0], vec![1.3], vec![0.0, 0.0]).unwrap();
        assert_eq!(normalize_weights(&s).p, vec![1.0]);
        let s = Scenario::new(vec![0.0], vec![1.0], vec![-0.2], vec![0.0, 0.0]).unwrap();
        assert_eq!(normalize_weights(&s).p, vec![0.0]);
        let s = Scenario::new(vec![0.0], vec![1.0], vec![0.4], vec![0.0, 0.0]).unwrap();
        assert_eq!(normalize_weights(&s), s);
    }

    #[test]
    fn mean_shift() {
        let s = Scenario::new(vec![0.0], vec![1.0], vec![0.5], vec![0.0, 0.0]).unwrap();
        assert_eq!(impose_mean(&s, 1.0, &[]).y, vec![1.0, 1.0]);
        let s = Scenario::new(vec![0.0], vec![1.0], vec![0.5], vec![1.0, 2.0]).unwrap();
        assert_eq!(impose_mean(&s, 1.5, &[]), s);
        let s = Scenario::new(vec![0.0], vec![1.0], vec![0.5], vec![0.0, 0.0]).unwrap();
        assert_eq!(impose_mean(&s, 1.0, &[0]).y, vec![0.0, 2.0]);
    }

    #[test]
    fn shortness_pulls_value_into_envelope() {
        let g = geom1(&[0.0], &[0.0]);
        let cfg = SolverConfig::default();
        let enc = Encoding::new(&[1]).unwrap();
        let c = ctx(&g, &cfg, &enc, -10.0);
        let s =
            Scenario::with_shape(vec![0.5], vec![0.5], vec![1.0], vec![2.0, 2.0], vec![1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = impose_shortness(&s, &c, &mut rng);
        assert_eq!(r.residual, 0.0);
        let y = r.scenario.y[0];
        assert!((-0.5..=0.5 + cfg.short_tol).contains(&y), "{y}");
    }

    #[test]
    fn short_scenario_is_untouched() {
        let g = geom1(&[0.0], &[0.0]);
        let cfg = SolverConfig::default();
        let enc = Encoding::full(1);
        let c = ctx(&g, &cfg, &enc, 0.0);
        let s = Scenario::new(vec![0.2], vec![0.6], vec![0.5], vec![0.1, 0.3]).unwrap();
        let r = impose_shortness(&s, &c, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(r.scenario, s);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn unreachable_mean_reports_residual() {
        let g = geom1(&[0.0], &[0.0]);
        let cfg = SolverConfig::default();
        let enc = Encoding::full(1);
        // Y⁺ never exceeds 1 on [0, 1].
        let c = ctx(&g, &cfg, &enc, 2.0);
        let s = Scenario::new(vec![0.2], vec![0.6], vec![0.5], vec![0.1, 0.3]).unwrap();
        let r = impose_shortness(
            &impose_mean(&s, 2.0, &[]),
            &c,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(r.residual > 0.0);
    }

    #[test]
    fn joint_inner_moves_positions() {
        let g = geom1(&[0.0], &[0.0]);
        let cfg = SolverConfig {
            joint_inner: true,
            ..SolverConfig::default()
        };
        let enc = Encoding::full(1);
        // Mean 0.9 needs the atom near x = 1.
        let c = ctx(&g, &cfg, &enc, 0.9);
        let s = Scenario::new(vec![0.1], vec![0.2], vec![0.5], vec![0.9, 0.9]).unwrap();
        let r = impose_shortness(&s, &c, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(r.residual, 0.0, "{:?}", r.scenario);
        assert!(r.scenario.mean() >= 0.9 - 1e-9);
    }

    #[test]
    fn repair_keeps_failing_atoms() {
        let g = geom1(&[0.375], &[0.25]);
        let cfg = SolverConfig::default();
        let enc = Encoding::full(1);
        let c = ctx(&g, &cfg, &enc, 0.5);
        let s = Scenario::new(vec![0.1], vec![1.0], vec![0.4], vec![-0.01, 0.2]).unwrap();
        let out = repair(&s, &c);
        assert_eq!(out.y[0], -0.01);
        assert!((out.mean() - 0.5).abs() < 1e-12);
        assert_eq!(feasibility_residual(&out, &c), 0.0);
    }
}
