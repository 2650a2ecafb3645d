//! Projection pairs `(v_j, w_j)` and the constructors used by the
//! applications: unit-vector selections, sensor neighbor schemes,
//! vectorized image filters and risk-class portfolio decompositions.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linproc::{InnovationSpec, LinearProcessSpec, ProcessFamily, DEFAULT_TOL};

/// Sparse weight vector stored as `(index, value)` pairs sorted by index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, f64)>", into = "Vec<(usize, f64)>")]
pub struct SparseVec {
    entries: Vec<(usize, f64)>,
}

impl TryFrom<Vec<(usize, f64)>> for SparseVec {
    type Error = Error;

    fn try_from(entries: Vec<(usize, f64)>) -> Result<Self> {
        Self::from_entries(entries)
    }
}

impl From<SparseVec> for Vec<(usize, f64)> {
    fn from(v: SparseVec) -> Self {
        v.entries
    }
}

impl SparseVec {
    /// Builds a vector from arbitrary-order entries. Zeros are dropped;
    /// repeated indices are rejected.
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        if let Some((i, x)) = entries.iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::param(format!("non-finite weight {x} at index {i}")));
        }
        entries.retain(|&(_, x)| x != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::param(format!("duplicate index {} in sparse vector", w[0].0)));
        }
        Ok(Self { entries })
    }

    pub fn unit(index: usize) -> Self {
        Self {
            entries: vec![(index, 1.0)],
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, &x)| (i, x))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        for &(i, x) in &self.entries {
            out[i] = x;
        }
        out
    }

    pub fn l1(&self) -> f64 {
        self.entries.iter().map(|(_, x)| x.abs()).sum()
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|&(i, _)| i)
    }

    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * x[i]).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_entries(self.entries.iter().map(|&(i, x)| (i, factor * x)).collect())
            .expect("scaling preserves validity for finite factors")
    }

    fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(i, x)| (i, f(x))).collect(),
        }
    }
}

/// `v' M w` for sparse `v`, `w`.
pub fn bilinear(v: &SparseVec, m: &DMatrix<f64>, w: &SparseVec) -> f64 {
    let mut acc = 0.0;
    for &(a, va) in v.entries() {
        let mut row = 0.0;
        for &(b, wb) in w.entries() {
            row += m[(a, b)] * wb;
        }
        acc += va * row;
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPair {
    pub label: String,
    pub v: SparseVec,
    pub w: SparseVec,
}

/// The `m` weighting pairs whose bilinear forms are monitored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProjectionSetFile")]
pub struct ProjectionSet {
    d: usize,
    pairs: Vec<ProjectionPair>,
}

#[derive(Deserialize)]
struct ProjectionSetFile {
    d: usize,
    pairs: Vec<ProjectionPair>,
}

impl TryFrom<ProjectionSetFile> for ProjectionSet {
    type Error = Error;

    fn try_from(f: ProjectionSetFile) -> Result<Self> {
        ProjectionSet::new(f.d, f.pairs)
    }
}

impl ProjectionSet {
    pub fn new(d: usize, pairs: Vec<ProjectionPair>) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("projection dimension must be at least 1"));
        }
        if pairs.is_empty() {
            return Err(Error::EmptyInput("projection set"));
        }
        for p in &pairs {
            for u in [&p.v, &p.w] {
                if let Some(i) = u.max_index().filter(|&i| i >= d) {
                    return Err(Error::IndexOutOfRange { index: i, dim: d });
                }
            }
        }
        Ok(Self { d, pairs })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[ProjectionPair] {
        &self.pairs
    }

    pub fn pair(&self, j: usize) -> &ProjectionPair {
        &self.pairs[j]
    }

    pub fn labels(&self) -> Vec<&str> {
        self.pairs.iter().map(|p| p.label.as_str()).collect()
    }

    /// The constant `C` bounding every `‖v_j‖₁` and `‖w_j‖₁`.
    pub fn l1_bound(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.v.l1().max(p.w.l1()))
            .fold(0.0, f64::max)
    }

    /// `v_j' M w_j` for every pair.
    pub fn bilinear_forms(&self, m: &DMatrix<f64>) -> Result<Vec<f64>> {
        if m.nrows() != self.d || m.ncols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: m.nrows().max(m.ncols()),
                context: "matrix against projection set",
            });
        }
        Ok(self.pairs.iter().map(|p| bilinear(&p.v, m, &p.w)).collect())
    }

    /// Reorder the pairs: output pair `j` is input pair `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.m()];
        for &j in order {
            if j >= self.m() || std::mem::replace(&mut seen[j], true) {
                return Err(Error::param("order is not a permutation of the pairs"));
            }
        }
        if order.len() != self.m() {
            return Err(Error::param("order is not a permutation of the pairs"));
        }
        Self::new(self.d, order.iter().map(|&j| self.pairs[j].clone()).collect())
    }

    /// Scale the `v` vector of pair `j`.
    pub fn with_scaled_v(&self, j: usize, factor: f64) -> Self {
        let mut out = self.clone();
        out.pairs[j].v = out.pairs[j].v.scaled(factor);
        out
    }

    /// Multiply every nonzero coordinate by `1 + r·s` with a fixed pattern
    /// `s ∈ [−1, 1]` drawn from `seed`, so the relative error is at most `r`.
    pub fn perturbed(&self, r: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pattern = || rng.random_range(-1.0..=1.0);
        let pairs = self
            .pairs
            .iter()
            .map(|p| ProjectionPair {
                label: p.label.clone(),
                v: p.v.map_values(|x| x * (1.0 + r * pattern())),
                w: p.w.map_values(|x| x * (1.0 + r * pattern())),
            })
            .collect();
        Self { d: self.d, pairs }
    }
}

/// `v_j = e_{i_j}`, `w_j = e_{k_j}` (0-based indices).
pub fn entry_selection(pairs: &[(usize, usize)], d: usize) -> Result<ProjectionSet> {
    for &(i, k) in pairs {
        for idx in [i, k] {
            if idx >= d {
                return Err(Error::IndexOutOfRange { index: idx, dim: d });
            }
        }
    }
    ProjectionSet::new(
        d,
        pairs
            .iter()
            .map(|&(i, k)| ProjectionPair {
                label: format!("({i},{k})"),
                v: SparseVec::unit(i),
                w: SparseVec::unit(k),
            })
            .collect(),
    )
}

/// All variances: pairs `(i, i)` for `i < d`.
pub fn diagonal(d: usize) -> Result<ProjectionSet> {
    let pairs: Vec<(usize, usize)> = (0..d).map(|i| (i, i)).collect();
    entry_selection(&pairs, d)
}

/// Covariances of every sensor with its `ell`-th neighbor.
pub fn neighbor_scheme(d: usize, ell: usize) -> Result<ProjectionSet> {
    if ell >= d {
        return Err(Error::param(format!("neighbor offset {ell} leaves no pairs in dimension {d}")));
    }
    let pairs: Vec<(usize, usize)> = (0..d - ell).map(|i| (i, i + ell)).collect();
    entry_selection(&pairs, d)
}

/// Sensor array whose readings are damped copies of the first sensor.
pub fn sensor_chain_spec(
    base_coeffs: Option<Vec<f64>>,
    dampings: Vec<f64>,
    rho: f64,
    innovations: InnovationSpec,
) -> Result<LinearProcessSpec> {
    LinearProcessSpec::build(
        ProcessFamily::SensorChain {
            base_coeffs,
            dampings,
            rho,
        },
        innovations,
        DEFAULT_TOL,
    )
}

/// Column-stacked filters as projections, `w_i = v_i`.
pub fn vech_projections(filters: &[DMatrix<f64>]) -> Result<ProjectionSet> {
    let first = filters.first().ok_or(Error::EmptyInput("filter list"))?;
    let shape = first.shape();
    let mut pairs = Vec::with_capacity(filters.len());
    for (i, f) in filters.iter().enumerate() {
        if f.shape() != shape {
            return Err(Error::param(format!(
                "filter {i} has shape {:?}, expected {:?}",
                f.shape(),
                shape
            )));
        }
        // nalgebra storage is column-major, so the slice is the column stack
        let v = SparseVec::from_dense(f.as_slice());
        pairs.push(ProjectionPair {
            label: format!("filter_{i}"),
            v: v.clone(),
            w: v,
        });
    }
    ProjectionSet::new(shape.0 * shape.1, pairs)
}

/// Indices sorted by ascending risk, split into `g` contiguous blocks with
/// the first `d mod g` blocks one element larger.
pub fn risk_groups(risks: &[f64], g: usize) -> Result<Vec<Vec<usize>>> {
    let d = risks.len();
    if g == 0 || g > d {
        return Err(Error::param(format!("group count {g} must lie in 1..={d}")));
    }
    if risks.iter().any(|r| !r.is_finite()) {
        return Err(Error::param("risks must be finite"));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| risks[a].total_cmp(&risks[b]).then(a.cmp(&b)));
    let (base, extra) = (d / g, d % g);
    let mut groups = Vec::with_capacity(g);
    let mut start = 0;
    for i in 0..g {
        let len = base + usize::from(i < extra);
        groups.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(groups)
}

/// Split a long-only portfolio into subportfolios of similar risk.
pub fn group_decompose(weights: &[f64], risks: &[f64], g: usize) -> Result<ProjectionSet> {
    if weights.len() != risks.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: risks.len(),
            context: "risks against weights",
        });
    }
    if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(Error::param(format!("weight {i} is negative or not a number: {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::param(format!("weights must sum to 1, got {total}")));
    }
    let groups = risk_groups(risks, g)?;
    let pairs = groups
        .iter()
        .enumerate()
        .map(|(i, members)| {
            let v = SparseVec::from_entries(members.iter().map(|&nu| (nu, weights[nu])).collect())
                .expect("group members are distinct");
            ProjectionPair {
                label: format!("group_{}", i + 1),
                v: v.clone(),
                w: v,
            }
        })
        .collect();
    ProjectionSet::new(weights.len(), pairs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    /// `Σ_ν |v_ν^(i) c_j^(ν)| = O(ρ^(j·i))`
    W1,
    /// `Σ_ν |v_ν^(i) c_j^(ν)| = O(ρ^(j+i))`
    W2,
}

impl Assumption {
    fn exponent(self, i: usize, j: usize) -> f64 {
        match self {
            Assumption::W1 => (i * j) as f64,
            Assumption::W2 => (i + j) as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayDiagnostic {
    pub assumption: Assumption,
    pub fitted_rho: f64,
    /// `sup s_ij / ρ^e(i,j)` over the scan grid at the fitted rate.
    pub max_ratio: f64,
    pub pass: bool,
}

/// Certify the geometric decay of the projected coefficients on the finite
/// grid `1 ≤ i ≤ m`, `1 ≤ j ≤ j_max`.
///
/// The bound is anchored at the smallest exponent with a nonzero projected
/// coefficient; the fitted rate is the smallest `ρ` for which that anchor
/// value times `ρ^(e − e₀)` dominates every other grid point.
pub fn check_decay(ps: &ProjectionSet, spec: &LinearProcessSpec, assumption: Assumption) -> Result<DecayDiagnostic> {
    if ps.d() != spec.d() {
        return Err(Error::DimensionMismatch {
            expected: spec.d(),
            found: ps.d(),
            context: "projection set against process",
        });
    }
    let abs_projected = |u: &SparseVec| -> Vec<f64> {
        let mut a = vec![0.0; spec.j_max() + 1];
        for &(nu, x) in u.entries() {
            for (aj, c) in a.iter_mut().zip(spec.coefficients(nu)) {
                *aj += (x * c).abs();
            }
        }
        a
    };
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (idx, pair) in ps.pairs().iter().enumerate() {
        let (sv, sw) = (abs_projected(&pair.v), abs_projected(&pair.w));
        for j in 1..=spec.j_max() {
            let s = sv[j].max(sw[j]);
            if s >= f64::MIN_POSITIVE {
                points.push((assumption.exponent(idx + 1, j), s));
            }
        }
    }
    let Some(e0) = points.iter().map(|p| p.0).min_by(f64::total_cmp) else {
        return Ok(DecayDiagnostic {
            assumption,
            fitted_rho: 0.0,
            max_ratio: 0.0,
            pass: true,
        });
    };
    let s0 = points
        .iter()
        .filter(|p| p.0 == e0)
        .map(|p| p.1)
        .fold(0.0, f64::max);
    let fitted_rho = points
        .iter()
        .filter(|p| p.0 > e0)
        .map(|&(e, s)| (s / s0).powf(1.0 / (e - e0)))
        .fold(0.0, f64::max);
    let max_ratio = if fitted_rho > 0.0 {
        points
            .iter()
            .map(|&(e, s)| s / fitted_rho.powf(e))
            .fold(0.0, f64::max)
    } else {
        s0
    };
    Ok(DecayDiagnostic {
        assumption,
        fitted_rho,
        max_ratio,
        pass: max_ratio.is_finite() && fitted_rho < 1.0,
    })
}

/// CLI-style scheme descriptor: `diag`, `neighbor:<ell>`, `entries:<file>`
/// or `groups:<g>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scheme {
    Diag,
    Neighbor(usize),
    Entries(String),
    Groups(usize),
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let count = |a: Option<&str>| -> Result<usize> {
            a.ok_or_else(|| Error::param(format!("scheme `{s}` needs an argument")))?
                .parse()
                .map_err(|_| Error::param(format!("scheme `{s}` has a non-integer argument")))
        };
        match head {
            "diag" if arg.is_none() => Ok(Scheme::Diag),
            "neighbor" => Ok(Scheme::Neighbor(count(arg)?)),
            "groups" => Ok(Scheme::Groups(count(arg)?)),
            "entries" => match arg {
                Some(path) if !path.is_empty() => Ok(Scheme::Entries(path.to_string())),
                _ => Err(Error::param("scheme `entries` needs a file path")),
            },
            _ => Err(Error::param(format!(
                "unknown scheme `{s}` (expected diag, neighbor:<ell>, entries:<file> or groups:<g>)"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Diag => write!(f, "diag"),
            Scheme::Neighbor(ell) => write!(f, "neighbor:{ell}"),
            Scheme::Entries(p) => write!(f, "entries:{p}"),
            Scheme::Groups(g) => write!(f, "groups:{g}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entry_selection_basics() {
        let ps = entry_selection(&[(0, 0)], 3).unwrap();
        assert_eq!(ps.pair(0).v.to_dense(3), vec![1.0, 0.0, 0.0]);
        assert_eq!(ps.pair(0).w.to_dense(3), vec![1.0, 0.0, 0.0]);
        assert_eq!(ps.l1_bound(), 1.0);

        let ps = entry_selection(&[(0, 1), (1, 2)], 3).unwrap();
        let m = DMatrix::from_fn(3, 3, |a, b| (10 * a + b) as f64);
        assert_eq!(ps.bilinear_forms(&m).unwrap(), vec![1.0, 12.0]);

        let ps = diagonal(4).unwrap();
        let forms = ps.bilinear_forms(&m.resize(4, 4, 0.5)).unwrap();
        assert_eq!(forms, vec![0.0, 11.0, 22.0, 0.5]);

        assert!(matches!(entry_selection(&[(0, 3)], 3), Err(Error::IndexOutOfRange { index: 3, dim: 3 })));
    }

    #[test]
    fn neighbor_scheme_sizes() {
        assert_eq!(neighbor_scheme(5, 0).unwrap().m(), 5);
        let ps = neighbor_scheme(5, 1).unwrap();
        assert_eq!(ps.m(), 4);
        assert_eq!(ps.pair(3).w, SparseVec::unit(4));
        assert!(neighbor_scheme(2, 2).is_err());
    }

    #[test]
    fn sensor_chain_products() {
        let spec = sensor_chain_spec(None, vec![0.5, 0.5], 0.5, InnovationSpec::default()).unwrap();
        for j in 0..10 {
            assert!((spec.coeff(2, j) - 0.25 * 0.5f64.powi(j as i32)).abs() < 1e-15);
        }
        let err = sensor_chain_spec(None, vec![0.9], 0.5, InnovationSpec::default());
        assert!(matches!(err, Err(Error::AssumptionViolation(_))));

        let spec = sensor_chain_spec(Some(vec![1.0]), vec![0.4, 0.3], 0.5, InnovationSpec::gaussian(2.0)).unwrap();
        let sigma = spec.population_covariance();
        assert!((sigma[(2, 2)] - 2.0 * (0.4f64 * 0.3).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn vech_stacks_columns() {
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let ps = vech_projections(&[f]).unwrap();
        assert_eq!(ps.d(), 4);
        assert_eq!(ps.pair(0).v.to_dense(4), vec![1.0, 0.0, 0.0, 0.0]);

        let g = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let h = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 5.0, 0.0, 0.0, 0.0]);
        let ps = vech_projections(&[g, h]).unwrap();
        assert_eq!(ps.pair(0).v.nnz(), 3);
        // column stacking: (0,0),(1,0),(0,1),(1,1),(0,2),(1,2)
        assert_eq!(ps.pair(0).v.to_dense(6), vec![1.0, 0.0, 2.0, 0.0, 0.0, 3.0]);
        assert_eq!(ps.labels(), vec!["filter_0", "filter_1"]);
        assert_eq!(ps.pair(1).w, ps.pair(1).v);

        let bad = vech_projections(&[DMatrix::zeros(2, 2), DMatrix::zeros(3, 2)]);
        assert!(bad.is_err());
    }

    #[test]
    fn group_decompose_examples() {
        let w = [0.25; 4];
        let risks = [4.0, 1.0, 3.0, 2.0];
        let ps = group_decompose(&w, &risks, 1).unwrap();
        assert_eq!(ps.m(), 1);
        assert_eq!(ps.pair(0).v.to_dense(4), w.to_vec());

        let ps = group_decompose(&w, &risks, 2).unwrap();
        assert_eq!(ps.pair(0).v.entries(), &[(1, 0.25), (3, 0.25)]);
        assert_eq!(ps.pair(1).v.entries(), &[(0, 0.25), (2, 0.25)]);
        assert_eq!(ps.pair(0).v.l1(), 0.5);

        assert!(group_decompose(&w, &risks, 5).is_err());
        assert!(group_decompose(&[1.5, -0.5], &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn uneven_groups_put_remainder_first() {
        let groups = risk_groups(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], 3).unwrap();
        assert_eq!(groups, vec![vec![0, 1, 2], vec![3, 4], vec![5, 6]]);
    }

    #[test]
    fn decay_ar_family_w1() {
        let spec = LinearProcessSpec::build(
            ProcessFamily::ArFamily { d: 6, rho: 0.6 },
            InnovationSpec::default(),
            DEFAULT_TOL,
        )
        .unwrap();
        let diag = check_decay(&diagonal(6).unwrap(), &spec, Assumption::W1).unwrap();
        assert!(diag.pass);
        assert!((diag.fitted_rho - 0.6).abs() < 1e-9, "{diag:?}");
    }

    #[test]
    fn decay_sensor_chain_w2() {
        let spec = sensor_chain_spec(None, vec![0.5; 9], 0.5, InnovationSpec::default()).unwrap();
        let diag = check_decay(&neighbor_scheme(10, 1).unwrap(), &spec, Assumption::W2).unwrap();
        assert!(diag.pass, "{diag:?}");
        assert!(diag.fitted_rho <= 0.5 + 1e-12);
    }

    #[test]
    fn decay_fails_without_decay() {
        let spec = LinearProcessSpec::build(
            ProcessFamily::Explicit {
                rho: 0.5,
                coefficients: vec![vec![1.0; 4], vec![1.0; 4]],
            },
            InnovationSpec::default(),
            DEFAULT_TOL,
        )
        .unwrap();
        let diag = check_decay(&diagonal(2).unwrap(), &spec, Assumption::W1).unwrap();
        assert!(!diag.pass, "{diag:?}");
        let diag = check_decay(&diagonal(2).unwrap(), &spec, Assumption::W2).unwrap();
        assert!(!diag.pass, "{diag:?}");
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("diag".parse::<Scheme>().unwrap(), Scheme::Diag);
        assert_eq!("neighbor:2".parse::<Scheme>().unwrap(), Scheme::Neighbor(2));
        assert_eq!("groups:3".parse::<Scheme>().unwrap(), Scheme::Groups(3));
        assert_eq!("entries:a.json".parse::<Scheme>().unwrap(), Scheme::Entries("a.json".into()));
        for bad in ["diagonal", "neighbor", "neighbor:x", "entries:", "groups:-1", "diag:1"] {
            assert!(bad.parse::<Scheme>().is_err(), "{bad}");
        }
    }

    #[test]
    fn json_encoding_uses_index_value_pairs() {
        let ps = entry_selection(&[(0, 1)], 2).unwrap();
        let json = serde_json::to_string(&ps).unwrap();
        assert_eq!(json, r#"{"d":2,"pairs":[{"label":"(0,1)","v":[[0,1.0]],"w":[[1,1.0]]}]}"#);
        let back: ProjectionSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ps);
        let bad = r#"{"d":2,"pairs":[{"label":"x","v":[[2,1.0]],"w":[[1,1.0]]}]}"#;
        assert!(serde_json::from_str::<ProjectionSet>(bad).is_err());
    }

    proptest! {
        #[test]
        fn decomposition_reconstructs_weights(
            raw in proptest::collection::vec(0.0f64..1.0, 1..30),
            risks_seed in proptest::collection::vec(0.1f64..10.0, 30),
            g_frac in 0.0f64..1.0,
        ) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let d = w.len();
            let risks = &risks_seed[..d];
            let g = 1 + ((d - 1) as f64 * g_frac) as usize;
            let ps = group_decompose(&w, risks, g).unwrap();
            let mut sum = vec![0.0; d];
            for p in ps.pairs() {
                for &(i, x) in p.v.entries() {
                    sum[i] += x;
                }
            }
            for (a, b) in sum.iter().zip(&w) {
                // each coordinate appears in exactly one group
                prop_assert_eq!(a, b);
            }
            let l1: f64 = ps.pairs().iter().map(|p| p.v.l1()).sum();
            prop_assert!((l1 - 1.0).abs() < 1e-9);
            prop_assert!(ps.l1_bound().is_finite());
        }
    }
}
