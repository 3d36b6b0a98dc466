//! Domain types shared by every solver: the box domain, the weighted
//! ℓ¹ quasi-metric, legacy observations, the discrete cube of a product
//! measure, and the shortness checks that define feasibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidInput(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Product of `K` closed intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct BoxDomain {
    bounds: Vec<Interval>,
}

impl BoxDomain {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidInput(
                "domain needs at least one coordinate".into(),
            ));
        }
        let bounds = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bounds })
    }

    pub fn from_intervals(bounds: Vec<Interval>) -> Result<Self> {
        let pairs: Vec<_> = bounds.iter().map(|i| (i.lo, i.hi)).collect();
        Self::new(&pairs)
    }

    /// The unit cube `[0, 1]^k`.
    pub fn unit(k: usize) -> Self {
        Self {
            bounds: vec![Interval { lo: 0.0, hi: 1.0 }; k],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn as_pairs(&self) -> Vec<(f64, f64)> {
        self.bounds.iter().map(|i| (i.lo, i.hi)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.bounds.iter().zip(x).all(|(b, &v)| b.contains(v))
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        self.bounds
            .iter()
            .zip(x)
            .map(|(b, &v)| b.clamp(v))
            .collect()
    }

    /// Checks `x` against the box, naming the first offending coordinate.
    pub fn check_point(&self, index: usize, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        for (coordinate, (b, &value)) in self.bounds.iter().zip(x).enumerate() {
            if !b.contains(value) {
                return Err(Error::OutOfDomain {
                    index,
                    coordinate,
                    value,
                    lo: b.lo,
                    hi: b.hi,
                });
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<[f64; 2]>> for BoxDomain {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        let pairs: Vec<_> = v.iter().map(|p| (p[0], p[1])).collect();
        Self::new(&pairs)
    }
}

impl From<BoxDomain> for Vec<[f64; 2]> {
    fn from(d: BoxDomain) -> Self {
        d.bounds.iter().map(|i| [i.lo, i.hi]).collect()
    }
}

/// Per-coordinate Lipschitz constants plus an additive tolerance `T`.
///
/// Two valued points `(x, y)`, `(x', y')` are *short* when
/// `|y - y'| <= d_L(x, x') + T`, with `d_L(x, x') = Σ_k L_k |x_k - x'_k|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSpec {
    pub constants: Vec<f64>,
    #[serde(default)]
    pub tolerance: f64,
}

impl LipschitzSpec {
    pub fn new(constants: Vec<f64>, tolerance: f64) -> Result<Self> {
        if constants.is_empty() {
            return Err(Error::InvalidInput(
                "need at least one Lipschitz constant".into(),
            ));
        }
        if constants.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "Lipschitz constants must be finite and non-negative, got {constants:?}"
            )));
        }
        if !(tolerance.is_finite() && tolerance >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be finite and non-negative, got {tolerance}"
            )));
        }
        Ok(Self {
            constants,
            tolerance,
        })
    }

    /// Zero tolerance shorthand.
    pub fn exact(constants: Vec<f64>) -> Result<Self> {
        Self::new(constants, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.constants.len()
    }

    /// `d_L(x, x')`; errors when either point has the wrong length.
    pub fn try_distance(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        for len in [x.len(), x_prime.len()] {
            if len != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    found: len,
                });
            }
        }
        Ok(self.distance(x, x_prime))
    }

    /// `d_L(x, x')` without length checks (callers guarantee them).
    #[inline]
    pub fn distance(&self, x: &[f64], x_prime: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(x_prime.len(), self.dim());
        self.constants
            .iter()
            .zip(x.iter().zip(x_prime))
            .map(|(l, (a, b))| l * (a - b).abs())
            .sum()
    }

    /// Largest `d_L` distance between two points of `domain`.
    pub fn diameter_of(&self, domain: &BoxDomain) -> f64 {
        self.constants
            .iter()
            .zip(domain.bounds())
            .map(|(l, b)| l * b.width())
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.constants.iter().map(|l| l * factor).collect(),
            self.tolerance,
        )
    }
}

/// Anything that can be viewed as a list of valued points.
pub trait PointValues {
    fn len(&self) -> usize;
    fn point(&self, i: usize) -> &[f64];
    fn value(&self, i: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Plain list of valued points, e.g. a scenario with its probabilities
/// forgotten.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl Samples {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        Ok(Self { points, values })
    }
}

impl PointValues for Samples {
    fn len(&self) -> usize {
        self.points.len()
    }
    fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }
    fn value(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// Legacy observations `G|_O`. Duplicate inputs are kept as-is.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn new(
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(Error::InvalidInput(format!(
                    "{} points but {} labels",
                    points.len(),
                    l.len()
                )));
            }
        }
        if let Some(first) = points.first() {
            if let Some(bad) = points.iter().find(|p| p.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: bad.len(),
                });
            }
        }
        if values.iter().any(|v| !v.is_finite()) || points.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("non-finite observation".into()));
        }
        Ok(Self {
            points,
            values,
            labels,
        })
    }

    /// Builds a dataset and checks every point against `domain`.
    pub fn in_domain(
        domain: &BoxDomain,
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let ds = Self::new(points, values, labels)?;
        ds.check_domain(domain)?;
        Ok(ds)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn check_domain(&self, domain: &BoxDomain) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            domain.check_point(i, p)?;
        }
        Ok(())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Human-readable name of observation `i`: its label or `#i`.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => format!("#{i}"),
        }
    }

    /// Sub-dataset with the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            values: indices.iter().map(|&i| self.values[i]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    /// Copy with one extra observation appended.
    pub fn with_point(&self, point: Vec<f64>, value: f64, label: Option<String>) -> Self {
        let mut out = self.clone();
        let n = out.points.len();
        out.points.push(point);
        out.values.push(value);
        if let Some(l) = &mut out.labels {
            l.push(label.unwrap_or_else(|| format!("#{n}")));
        }
        out
    }

    /// Groups of indices that share identical input points (size ≥ 2).
    pub fn duplicate_inputs(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut seen = vec![false; self.len()];
        for i in 0..self.len() {
            if seen[i] {
                continue;
            }
            let group: Vec<usize> = (i..self.len())
                .filter(|&j| self.points[j] == self.points[i])
                .collect();
            for &j in &group {
                seen[j] = true;
            }
            if group.len() > 1 {
                groups.push(group);
            }
        }
        groups
    }
}

impl PointValues for Dataset {
    fn len(&self) -> usize {
        self.points.len()
    }
    fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }
    fn value(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// Vertex of the Hamming cube `{0,1}^K`.
///
/// Indices are ordered lexicographically with coordinate 0 as the most
/// significant bit, so `index` doubles as the position in any
/// cube-ordered list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CubeIndex {
    pub index: usize,
    pub dim: usize,
}

impl CubeIndex {
    pub fn new(index: usize, dim: usize) -> Self {
        debug_assert!(index < (1 << dim));
        Self { index, dim }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let index = bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize);
        Self {
            index,
            dim: bits.len(),
        }
    }

    /// `ε_k`.
    #[inline]
    pub fn bit(&self, k: usize) -> bool {
        (self.index >> (self.dim - 1 - k)) & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.dim).map(|k| self.bit(k)).collect()
    }

    pub fn flip(&self, k: usize) -> Self {
        Self {
            index: self.index ^ (1 << (self.dim - 1 - k)),
            dim: self.dim,
        }
    }

    pub fn hamming(&self, other: &Self) -> u32 {
        (self.index ^ other.index).count_ones()
    }

    /// All `2^K` vertices in order.
    pub fn all(dim: usize) -> impl Iterator<Item = CubeIndex> {
        (0..1usize << dim).map(move |index| CubeIndex { index, dim })
    }
}

/// Pairs `(ε, ε')`, `ε ≺ ε'`, differing in exactly one bit: the `K·2^{K-1}`
/// cube edges.
pub fn edge_pairs(dim: usize) -> Vec<(CubeIndex, CubeIndex)> {
    let mut out = Vec::with_capacity(dim << dim.saturating_sub(1));
    for e in CubeIndex::all(dim) {
        for k in 0..dim {
            if !e.bit(k) {
                out.push((e, e.flip(k)));
            }
        }
    }
    out.sort();
    out
}

/// Every unordered pair `ε ≺ ε'` of distinct vertices.
pub fn all_pairs(dim: usize) -> Vec<(CubeIndex, CubeIndex)> {
    let n = 1usize << dim;
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((CubeIndex::new(i, dim), CubeIndex::new(j, dim)));
        }
    }
    out
}

/// Points of the discrete cube with opposite corners `x0`, `x1`, in
/// [`CubeIndex`] order.
pub fn cube_points(x0: &[f64], x1: &[f64]) -> Vec<Vec<f64>> {
    let dim = x0.len();
    CubeIndex::all(dim)
        .map(|e| {
            (0..dim)
                .map(|k| if e.bit(k) { x1[k] } else { x0[k] })
                .collect()
        })
        .collect()
}

/// Product-measure weight of vertex `ε`: `Π_k p_k^{1-ε_k} (1-p_k)^{ε_k}`.
#[inline]
pub fn cube_weight(p: &[f64], e: CubeIndex) -> f64 {
    p.iter()
        .enumerate()
        .map(|(k, &pk)| if e.bit(k) { 1.0 - pk } else { pk })
        .product()
}

/// A candidate pair `(g, μ)`: a product measure on the cube spanned by
/// `x0`, `x1` with marginal weights `p` (mass `p_k` on `x0_k`), plus the
/// values `y` of `g` on the `2^K` cube points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub p: Vec<f64>,
    /// Values in [`CubeIndex`] order.
    pub y: Vec<f64>,
    /// Support size per marginal, 1 or 2. A 1 forces `x1_k = x0_k`, `p_k = 1`.
    pub support_shape: Vec<u8>,
}

impl Scenario {
    pub fn new(x0: Vec<f64>, x1: Vec<f64>, p: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let k = x0.len();
        let shape = vec![2; k];
        Self::with_shape(x0, x1, p, y, shape)
    }

    pub fn with_shape(
        x0: Vec<f64>,
        x1: Vec<f64>,
        p: Vec<f64>,
        y: Vec<f64>,
        support_shape: Vec<u8>,
    ) -> Result<Self> {
        let k = x0.len();
        if k == 0 {
            return Err(Error::InvalidInput("scenario needs K >= 1".into()));
        }
        for len in [x1.len(), p.len(), support_shape.len()] {
            if len != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: len,
                });
            }
        }
        if y.len() != 1 << k {
            return Err(Error::DimensionMismatch {
                expected: 1 << k,
                found: y.len(),
            });
        }
        if support_shape.iter().any(|&s| s != 1 && s != 2) {
            return Err(Error::InvalidInput(format!(
                "support shape entries must be 1 or 2, got {support_shape:?}"
            )));
        }
        Ok(Self {
            x0,
            x1,
            p,
            y,
            support_shape,
        })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn corners(&self) -> impl Iterator<Item = CubeIndex> {
        CubeIndex::all(self.dim())
    }

    pub fn weight(&self, e: CubeIndex) -> f64 {
        cube_weight(&self.p, e)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.corners().map(|e| self.weight(e)).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        cube_points(&self.x0, &self.x1)
    }

    pub fn point(&self, e: CubeIndex) -> Vec<f64> {
        (0..self.dim())
            .map(|k| if e.bit(k) { self.x1[k] } else { self.x0[k] })
            .collect()
    }

    /// `Σ_ε w(ε) r(ε)` for `r` given in cube order.
    pub fn expectation(&self, r: &[f64]) -> f64 {
        self.corners().zip(r).map(|(e, v)| self.weight(e) * v).sum()
    }

    /// `E_μ[g]`.
    pub fn mean(&self) -> f64 {
        self.expectation(&self.y)
    }

    /// `μ[g ≤ θ]` (closed event), capped at 1 against rounding in the
    /// weight products.
    pub fn failure_probability(&self, theta: f64) -> f64 {
        let ind: Vec<f64> = self
            .y
            .iter()
            .map(|&v| if v <= theta { 1.0 } else { 0.0 })
            .collect();
        self.expectation(&ind).min(1.0)
    }

    /// Forget the measure and keep the valued cube points.
    pub fn to_samples(&self) -> Samples {
        Samples {
            points: self.points(),
            values: self.y.clone(),
        }
    }

    /// Number of free decision variables for this support shape.
    pub fn decision_variable_count(&self) -> usize {
        decision_variable_count(&self.support_shape)
    }
}

/// `K` positions of `x0`, plus `x1` and `p` for each two-point marginal, plus
/// one value per distinct support point. For the full shape this is
/// `2K + 2^K + K`.
pub fn decision_variable_count(support_shape: &[u8]) -> usize {
    let k = support_shape.len();
    let free = support_shape.iter().filter(|&&s| s == 2).count();
    k + 2 * free + (1 << free)
}

/// Matrix with entries `|y_i - y'_j| - d_L(x_i, x'_j) - T`. Non-positive
/// entries are short pairs.
pub fn shortness_matrix<A, B>(a: &A, b: &B, lip: &LipschitzSpec) -> Result<Vec<Vec<f64>>>
where
    A: PointValues + ?Sized,
    B: PointValues + ?Sized,
{
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let mut row = Vec::with_capacity(b.len());
        for j in 0..b.len() {
            let d = lip.try_distance(a.point(i), b.point(j))?;
            row.push((a.value(i) - b.value(j)).abs() - d - lip.tolerance);
        }
        out.push(row);
    }
    Ok(out)
}

/// True iff every entry of the shortness matrix is at most `short_tol`.
pub fn is_short<A, B>(a: &A, b: &B, lip: &LipschitzSpec, short_tol: f64) -> Result<bool>
where
    A: PointValues + ?Sized,
    B: PointValues + ?Sized,
{
    Ok(shortness_matrix(a, b, lip)?
        .iter()
        .flatten()
        .all(|&v| v <= short_tol))
}

/// The worst violating pair of a collection against itself, if any entry
/// is positive.
pub fn worst_violation<A>(a: &A, lip: &LipschitzSpec) -> Result<Option<(usize, usize, f64)>>
where
    A: PointValues + ?Sized,
{
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let d = lip.try_distance(a.point(i), a.point(j))?;
            let v = (a.value(i) - a.value(j)).abs() - d - lip.tolerance;
            if v > 0.0 && worst.is_none_or(|w| v > w.2) {
                worst = Some((i, j, v));
            }
        }
    }
    Ok(worst)
}

/// `L ∈ Lip(G|_O)` with tolerance `T`.
pub fn lipschitz_feasible(data: &Dataset, lip: &LipschitzSpec) -> Result<bool> {
    if data.is_empty() {
        return Ok(true);
    }
    is_short(data, data, lip, 0.0)
}

/// Domain, Lipschitz model and observations, validated together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub domain: BoxDomain,
    pub lip: LipschitzSpec,
    pub data: Dataset,
}

impl Geometry {
    /// Checks dimensions, domain membership and shortness of the data.
    pub fn new(domain: BoxDomain, lip: LipschitzSpec, data: Dataset) -> Result<Self> {
        if lip.dim() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                found: lip.dim(),
            });
        }
        data.check_domain(&domain)?;
        if let Some((i, j, violation)) = worst_violation(&data, &lip)? {
            return Err(Error::InfeasibleData { i, j, violation });
        }
        Ok(Self { domain, lip, data })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn with_data(&self, data: Dataset) -> Self {
        Self {
            data,
            ..self.clone()
        }
    }

    pub fn with_lip(&self, lip: LipschitzSpec) -> Self {
        Self {
            lip,
            ..self.clone()
        }
    }
}

/// The full problem statement for the probability bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub geometry: Geometry,
    /// Lower bound on the mean output.
    pub m: f64,
    /// Failure threshold.
    pub theta: f64,
}

impl std::ops::Deref for ProblemSpec {
    type Target = Geometry;

    fn deref(&self) -> &Geometry {
        &self.geometry
    }
}

impl ProblemSpec {
    /// Validates dimensions, domain membership and data shortness.
    pub fn new(
        domain: BoxDomain,
        lip: LipschitzSpec,
        data: Dataset,
        m: f64,
        theta: f64,
    ) -> Result<Self> {
        Self::from_geometry(Geometry::new(domain, lip, data)?, m, theta)
    }

    pub fn from_geometry(geometry: Geometry, m: f64, theta: f64) -> Result<Self> {
        if !(m.is_finite() && theta.is_finite()) {
            return Err(Error::InvalidInput("m and theta must be finite".into()));
        }
        Ok(Self { geometry, m, theta })
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self {
            theta,
            ..self.clone()
        }
    }

    pub fn with_m(&self, m: f64) -> Self {
        Self { m, ..self.clone() }
    }

    pub fn with_data(&self, data: Dataset) -> Self {
        Self {
            geometry: self.geometry.with_data(data),
            ..self.clone()
        }
    }

    pub fn with_lip(&self, lip: LipschitzSpec) -> Self {
        Self {
            geometry: self.geometry.with_lip(lip),
            ..self.clone()
        }
    }
}
