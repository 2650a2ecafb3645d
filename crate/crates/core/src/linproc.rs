//! Multivariate linear processes driven by a common i.i.d. innovation
//! sequence:
//!
//! ```text
//! Y_t^(ν) = Σ_{j ≥ 0} c_j^(ν) ε_{t−j},   ν = 1, …, d
//! ```
//!
//! Coefficient sequences decay geometrically and are truncated at a lag
//! `j_max` chosen so that the neglected tail is below a configured
//! tolerance.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projections::SparseVec;

/// Default truncation tolerance for generated coefficient families.
pub const DEFAULT_TOL: f64 = 1e-12;

fn default_moment_order() -> f64 {
    1.0
}

fn default_sigma2() -> f64 {
    1.0
}

/// Innovation law, parameterized so that the variance is set separately.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InnovationFamily {
    Gaussian,
    /// Student t with `df` degrees of freedom, rescaled to variance `sigma2`.
    ScaledT { df: f64 },
    /// Symmetric uniform law rescaled to variance `sigma2`.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub distribution: InnovationFamily,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    /// The δ of the `4 + δ` moment condition. Informational.
    #[serde(default = "default_moment_order")]
    pub moment_order: f64,
}

impl Default for InnovationSpec {
    fn default() -> Self {
        Self::gaussian(1.0)
    }
}

impl InnovationSpec {
    pub fn gaussian(sigma2: f64) -> Self {
        Self {
            distribution: InnovationFamily::Gaussian,
            sigma2,
            moment_order: default_moment_order(),
        }
    }

    pub fn scaled_t(df: f64, sigma2: f64) -> Self {
        Self {
            distribution: InnovationFamily::ScaledT { df },
            sigma2,
            moment_order: default_moment_order(),
        }
    }

    pub fn uniform(sigma2: f64) -> Self {
        Self {
            distribution: InnovationFamily::Uniform,
            sigma2,
            moment_order: default_moment_order(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::param(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.moment_order.is_finite() && self.moment_order > 0.0) {
            return Err(Error::param("moment_order must be positive"));
        }
        if let InnovationFamily::ScaledT { df } = self.distribution {
            if !(df.is_finite() && df > 4.0 + self.moment_order) {
                return Err(Error::param(format!(
                    "scaled-t needs df > 4 + δ = {}, got {df}",
                    4.0 + self.moment_order
                )));
            }
        }
        Ok(())
    }

    /// Fourth moment `E ε⁴`.
    pub fn gamma4(&self) -> f64 {
        let s4 = self.sigma2 * self.sigma2;
        match self.distribution {
            InnovationFamily::Gaussian => 3.0 * s4,
            InnovationFamily::ScaledT { df } => s4 * (3.0 + 6.0 / (df - 4.0)),
            InnovationFamily::Uniform => 1.8 * s4,
        }
    }

    pub(crate) fn sampler(&self) -> InnovationSampler {
        let sd = self.sigma2.sqrt();
        match self.distribution {
            InnovationFamily::Gaussian => InnovationSampler::Normal(sd),
            InnovationFamily::ScaledT { df } => {
                let t = StudentT::new(df).expect("df validated");
                InnovationSampler::T(t, sd * ((df - 2.0) / df).sqrt())
            }
            InnovationFamily::Uniform => {
                let half = (3.0 * self.sigma2).sqrt();
                InnovationSampler::Uniform(Uniform::new_inclusive(-half, half).expect("finite bounds"))
            }
        }
    }
}

pub(crate) enum InnovationSampler {
    Normal(f64),
    T(StudentT<f64>, f64),
    Uniform(Uniform<f64>),
}

impl InnovationSampler {
    #[inline]
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InnovationSampler::Normal(sd) => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            InnovationSampler::T(t, scale) => scale * t.sample(rng),
            InnovationSampler::Uniform(u) => u.sample(rng),
        }
    }
}

/// Coefficient family of a process, as read from and written to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProcessFamily {
    /// Coordinate ν (1-based) has `c_j = ρ^(ν·j)`.
    ArFamily { d: usize, rho: f64 },
    /// Two coordinates: the first supported on lags `0..k`, the second on
    /// lags `k−r..`, both with values `ρ^j`.
    RDependent { k: usize, r: usize, rho: f64 },
    /// Damped copies of a base coefficient sequence (defaults to `ρ^j`).
    SensorChain {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base_coeffs: Option<Vec<f64>>,
        dampings: Vec<f64>,
        rho: f64,
    },
    /// Per-coordinate coefficient table; `rho` is the claimed decay rate.
    Explicit { rho: f64, coefficients: Vec<Vec<f64>> },
}

/// JSON representation of a [`LinearProcessSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    #[serde(flatten)]
    pub family: ProcessFamily,
    #[serde(default)]
    pub innovations: InnovationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProcessSpec {
    family: ProcessFamily,
    innovations: InnovationSpec,
    tol: f64,
    rho: f64,
    j_max: usize,
    coeffs: Vec<Vec<f64>>,
    decay_const: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("decay rate must lie in (0, 1), got {rho}")))
    }
}

/// `ceil(log(tol) / log(rho))`.
pub fn default_j_max(rho: f64, tol: f64) -> usize {
    ((tol.ln() / rho.ln()).ceil().max(0.0)) as usize
}

fn trim_tail(mut c: Vec<f64>, tol: f64) -> Vec<f64> {
    while c.len() > 1 && c.last().is_some_and(|x| x.abs() < tol) {
        c.pop();
    }
    c
}

/// `c_j = ρ^(ν j)` for the coordinate with 1-based index `nu`.
pub fn ar_coefficients(rho: f64, nu: usize, j_max: usize) -> Vec<f64> {
    let base = rho.powi(nu as i32);
    (0..=j_max).map(|j| base.powi(j as i32)).collect()
}

impl LinearProcessSpec {
    pub fn from_file(file: SpecFile) -> Result<Self> {
        Self::build(file.family, file.innovations, file.tol.unwrap_or(DEFAULT_TOL))
    }

    pub fn to_file(&self) -> SpecFile {
        SpecFile {
            family: self.family.clone(),
            innovations: self.innovations.clone(),
            tol: (self.tol != DEFAULT_TOL).then_some(self.tol),
        }
    }

    pub fn build(family: ProcessFamily, innovations: InnovationSpec, tol: f64) -> Result<Self> {
        innovations.validate()?;
        if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
            return Err(Error::param(format!("truncation tolerance must lie in (0, 1), got {tol}")));
        }
        let (rho, coeffs) = match &family {
            ProcessFamily::ArFamily { d, rho } => {
                check_rho(*rho)?;
                if *d == 0 {
                    return Err(Error::param("dimension d must be at least 1"));
                }
                let j_max = default_j_max(*rho, tol);
                let coeffs = (1..=*d)
                    .map(|nu| trim_tail(ar_coefficients(*rho, nu, j_max), tol))
                    .collect();
                (*rho, coeffs)
            }
            ProcessFamily::RDependent { k, r, rho } => {
                check_rho(*rho)?;
                if *k == 0 {
                    return Err(Error::param("lag k must be at least 1"));
                }
                if r > k {
                    return Err(Error::param(format!("k − r must be nonnegative (k = {k}, r = {r})")));
                }
                let j_max = default_j_max(*rho, tol).max(*k);
                let first: Vec<f64> = (0..*k).map(|j| rho.powi(j as i32)).collect();
                let second: Vec<f64> = (0..=j_max)
                    .map(|j| if j < k - r { 0.0 } else { rho.powi(j as i32) })
                    .collect();
                (*rho, vec![first, trim_tail(second, tol)])
            }
            ProcessFamily::SensorChain { base_coeffs, dampings, rho } => {
                check_rho(*rho)?;
                let base = match base_coeffs {
                    Some(b) => b.clone(),
                    None => (0..=default_j_max(*rho, tol)).map(|j| rho.powi(j as i32)).collect(),
                };
                (*rho, sensor_chain_coefficients(&base, dampings, *rho)?)
            }
            ProcessFamily::Explicit { rho, coefficients } => {
                check_rho(*rho)?;
                if coefficients.is_empty() {
                    return Err(Error::param("explicit spec needs at least one coordinate"));
                }
                (*rho, coefficients.clone())
            }
        };
        for (nu, c) in coeffs.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::param(format!("coordinate {nu} has no coefficients")));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::param(format!("coordinate {nu} has non-finite coefficients")));
            }
        }
        let j_max = coeffs.iter().map(|c| c.len() - 1).max().unwrap_or(0);
        let decay_const = coeffs
            .iter()
            .flat_map(|c| c.iter().enumerate().map(|(j, x)| x.abs() / rho.powi(j as i32)))
            .fold(0.0_f64, f64::max);
        Ok(Self {
            family,
            innovations,
            tol,
            rho,
            j_max,
            coeffs,
            decay_const,
        })
    }

    pub fn d(&self) -> usize {
        self.coeffs.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn family(&self) -> &ProcessFamily {
        &self.family
    }

    pub fn innovations(&self) -> &InnovationSpec {
        &self.innovations
    }

    /// Replace the innovation law, keeping the coefficients.
    pub fn with_innovations(mut self, innovations: InnovationSpec) -> Result<Self> {
        innovations.validate()?;
        self.innovations = innovations;
        Ok(self)
    }

    /// The constant `C` with `sup_ν |c_j^(ν)| ≤ C ρ^j` over the stored lags.
    pub fn decay_const(&self) -> f64 {
        self.decay_const
    }

    /// Upper bound `C ρ^(J+1) / (1 − ρ)` on the neglected coefficient tail.
    pub fn tail_bound(&self) -> f64 {
        self.decay_const * self.rho.powi(self.j_max as i32 + 1) / (1.0 - self.rho)
    }

    /// Stored coefficients of coordinate `nu` (0-based), lags `0..len`.
    pub fn coefficients(&self, nu: usize) -> &[f64] {
        &self.coeffs[nu]
    }

    /// `c_j^(ν)` with zero beyond the stored support.
    pub fn coeff(&self, nu: usize, j: usize) -> f64 {
        self.coeffs[nu].get(j).copied().unwrap_or(0.0)
    }

    /// Coefficients `a_j = Σ_ν u_ν c_j^(ν)` of the projected series `u'Y_t`,
    /// for `j = 0..=j_max`.
    pub fn project(&self, u: &SparseVec) -> Vec<f64> {
        let mut a = vec![0.0; self.j_max + 1];
        for &(nu, weight) in u.entries() {
            for (aj, c) in a.iter_mut().zip(&self.coeffs[nu]) {
                *aj += weight * c;
            }
        }
        a
    }

    /// `Σ_νμ = σ² Σ_j c_j^(ν) c_j^(μ)`.
    pub fn population_covariance(&self) -> DMatrix<f64> {
        let d = self.d();
        let s2 = self.innovations.sigma2;
        let mut out = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let v: f64 = self.coeffs[a].iter().zip(&self.coeffs[b]).map(|(x, y)| x * y).sum();
                out[(a, b)] = s2 * v;
                out[(b, a)] = s2 * v;
            }
        }
        out
    }

    /// Simulate `n` observations with a burn-in of `j_max` innovations.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<TimeSeriesSample> {
        if n == 0 {
            return Err(Error::param("sample length n must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sample = self.simulate_with(n, &mut rng);
        sample.seed = Some(seed);
        Ok(sample)
    }

    /// Simulate from a caller-supplied RNG stream.
    pub fn simulate_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> TimeSeriesSample {
        let d = self.d();
        let burn = self.j_max;
        let sampler = self.innovations.sampler();
        let eps: Vec<f64> = (0..n + burn).map(|_| sampler.draw(rng)).collect();
        let mut values = vec![0.0; n * d];
        for (nu, c) in self.coeffs.iter().enumerate() {
            for t in 0..n {
                // eps[burn + t] is ε_t
                let head = burn + t;
                let mut acc = 0.0;
                for (j, cj) in c.iter().enumerate() {
                    acc += cj * eps[head - j];
                }
                values[t * d + nu] = acc;
            }
        }
        TimeSeriesSample {
            n,
            d,
            values,
            seed: None,
        }
    }
}

/// `c_j^(ν) = (Π_{k=2}^ν D_k) c_j^(1)`, requiring `0 < D_k ≤ ρ`.
pub(crate) fn sensor_chain_coefficients(base: &[f64], dampings: &[f64], rho: f64) -> Result<Vec<Vec<f64>>> {
    if base.is_empty() {
        return Err(Error::param("sensor chain needs a nonempty base coefficient sequence"));
    }
    let mut out = vec![base.to_vec()];
    let mut factor = 1.0;
    for (idx, &damp) in dampings.iter().enumerate() {
        if !(damp.is_finite() && damp > 0.0) {
            return Err(Error::param(format!("damping D_{} must be positive, got {damp}", idx + 2)));
        }
        if damp > rho {
            return Err(Error::AssumptionViolation(format!(
                "damping D_{} = {damp} exceeds decay rate ρ = {rho}",
                idx + 2
            )));
        }
        factor *= damp;
        out.push(base.iter().map(|c| factor * c).collect());
    }
    Ok(out)
}

/// An `n × d` block of observations stored row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesSample {
    n: usize,
    d: usize,
    values: Vec<f64>,
    pub seed: Option<u64>,
}

impl TimeSeriesSample {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput("time series sample"));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::param("sample dimension must be at least 1"));
        }
        let mut values = Vec::with_capacity(n * d);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                    context: "sample row length",
                });
            }
            if let Some(x) = row.iter().find(|x| !x.is_finite()) {
                return Err(Error::param(format!("non-finite value {x} at row {t}")));
            }
            values.extend(row);
        }
        Ok(Self {
            n,
            d,
            values,
            seed: None,
        })
    }

    /// Single-coordinate sample from a scalar series.
    pub fn from_series(z: &[f64]) -> Result<Self> {
        Self::from_rows(z.iter().map(|&x| vec![x]).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.d..(t + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, nu: usize) -> Vec<f64> {
        self.rows().map(|r| r[nu]).collect()
    }

    /// Multiply coordinate `nu` by `factor` in place.
    pub fn scale_coordinate(&mut self, nu: usize, factor: f64) {
        let d = self.d;
        for row in self.values.chunks_exact_mut(d) {
            row[nu] *= factor;
        }
    }

    /// `Y^(k) ← Y^(k) + θ Y^(i)` in place.
    pub fn mix_coordinate(&mut self, source: usize, target: usize, theta: f64) {
        let d = self.d;
        for row in self.values.chunks_exact_mut(d) {
            row[target] += theta * row[source];
        }
    }
}
