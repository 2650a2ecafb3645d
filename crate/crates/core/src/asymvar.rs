//! Asymptotic covariances `β_ik` of the projected sample covariances.
//!
//! Three routes are provided:
//!
//! * [`beta_analytic`] evaluates
//!   `β_ik = F_i F_k (E ε⁴ − σ⁴) + F_ik σ⁴` from the process coefficients,
//! * [`beta_bartlett`] estimates the long-run covariance of the product
//!   series `(v_j'Y_t)(w_j'Y_t)` with a triangular kernel,
//! * [`mc_oracle`] measures the covariance of the deviations by brute-force
//!   simulation and is the reference the analytic route is checked against.
//!
//! The lag ranges and the scale of `F_i` are carried in a [`Convention`].
//! [`Convention::CALIBRATED`] is the configuration that agrees with the
//! simulation oracle; [`Convention::AS_DISPLAYED`] keeps the literal
//! formula (factor 2 on `F_i`, inner sums from lag 1) for comparison.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covstat::{projected_sample_forms, DeviationResult};
use crate::error::{Error, Result};
use crate::exec;
use crate::linproc::{LinearProcessSpec, TimeSeriesSample};
use crate::matrix_serde;
use crate::projections::ProjectionSet;

/// Floor applied to diagonal entries before they are used for standardization.
pub const DIAG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convention {
    /// First lag `j` in `F_i = scale · Σ_j a_j b_j`.
    pub f_i_start: usize,
    pub f_i_scale: f64,
    /// First lag `j` of the inner sums in `F_ik` (the outer lag `l` starts at 1).
    pub f_ik_start: usize,
    /// `F_ik = Σ_l g_l g'_l` with `g_l = Σ_j (a_j b_{j+l} + b_j a_{j+l})` when set;
    /// otherwise the products are summed over a single common `j`.
    pub factored: bool,
}

impl Convention {
    pub const CALIBRATED: Convention = Convention {
        f_i_start: 0,
        f_i_scale: 1.0,
        f_ik_start: 0,
        factored: true,
    };

    pub const AS_DISPLAYED: Convention = Convention {
        f_i_start: 1,
        f_i_scale: 2.0,
        f_ik_start: 1,
        factored: false,
    };

    pub fn name(&self) -> &'static str {
        if *self == Self::CALIBRATED {
            "calibrated"
        } else if *self == Self::AS_DISPLAYED {
            "as_displayed"
        } else {
            "custom"
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "calibrated" => Ok(Self::CALIBRATED),
            "as_displayed" => Ok(Self::AS_DISPLAYED),
            _ => Err(Error::param(format!("unknown convention `{name}` (expected calibrated or as_displayed)"))),
        }
    }
}

impl Default for Convention {
    fn default() -> Self {
        Self::CALIBRATED
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSource {
    Analytic,
    Bartlett,
    McOracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymCovMatrix {
    #[serde(with = "matrix_serde")]
    pub beta: DMatrix<f64>,
    pub source: VarianceSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<Convention>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "matrix_serde::option")]
    pub mc_se: Option<DMatrix<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<usize>,
}

impl AsymCovMatrix {
    pub fn m(&self) -> usize {
        self.beta.nrows()
    }

    pub fn diag(&self) -> Vec<f64> {
        self.beta.diagonal().iter().copied().collect()
    }

    /// Diagonal floored at [`DIAG_FLOOR`], with the indices that were floored.
    pub fn standardization_diag(&self) -> (Vec<f64>, Vec<usize>) {
        let mut floored = Vec::new();
        let diag = self
            .diag()
            .into_iter()
            .enumerate()
            .map(|(j, b)| {
                if b > DIAG_FLOOR {
                    b
                } else {
                    floored.push(j);
                    DIAG_FLOOR
                }
            })
            .collect();
        (diag, floored)
    }

    /// Correlations `β_ik / (β_ii β_kk)^{1/2}`; zero where a variance vanishes.
    pub fn correlation(&self) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m, m, |i, k| {
            let s = (self.beta[(i, i)] * self.beta[(k, k)]).sqrt();
            if s > 0.0 {
                self.beta[(i, k)] / s
            } else {
                0.0
            }
        })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.beta + self.beta.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Projected coefficient sequences `(a_j, b_j)` of `(v_i'Y_t, w_i'Y_t)`.
fn projected(spec: &LinearProcessSpec, ps: &ProjectionSet) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if ps.d() != spec.d() {
        return Err(Error::DimensionMismatch {
            expected: spec.d(),
            found: ps.d(),
            context: "projection set against process",
        });
    }
    Ok(ps.pairs().iter().map(|p| (spec.project(&p.v), spec.project(&p.w))).collect())
}

fn check_index(ps: &ProjectionSet, i: usize) -> Result<()> {
    if i >= ps.m() {
        return Err(Error::IndexOutOfRange { index: i, dim: ps.m() });
    }
    Ok(())
}

fn f_i_from(a: &[f64], b: &[f64], conv: &Convention) -> f64 {
    conv.f_i_scale
        * a.iter()
            .zip(b)
            .skip(conv.f_i_start)
            .map(|(x, y)| x * y)
            .sum::<f64>()
}

/// The four products whose sum is `F_ik`, each a double sum over `l ≥ 1`
/// and `j` of products of projected coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourTerms {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl FourTerms {
    pub fn total(&self) -> f64 {
        self.f1 + self.f2 + self.f3 + self.f4
    }
}

fn four_terms_from(pi: &(Vec<f64>, Vec<f64>), pk: &(Vec<f64>, Vec<f64>), conv: &Convention) -> FourTerms {
    let (a, b) = (&pi.0, &pi.1);
    let (ak, bk) = (&pk.0, &pk.1);
    let len = a.len();
    let mut t = FourTerms {
        f1: 0.0,
        f2: 0.0,
        f3: 0.0,
        f4: 0.0,
    };
    for l in 1..len {
        let js = conv.f_ik_start..len - l;
        if conv.factored {
            let lagged = |x: &[f64], y: &[f64]| js.clone().map(|j| x[j] * y[j + l]).sum::<f64>();
            let (ab, ba) = (lagged(a, b), lagged(b, a));
            let (abk, bak) = (lagged(ak, bk), lagged(bk, ak));
            t.f1 += ab * abk;
            t.f2 += ab * bak;
            t.f3 += ba * abk;
            t.f4 += ba * bak;
        } else {
            for j in js {
                let jl = j + l;
                t.f1 += a[j] * b[jl] * ak[j] * bk[jl];
                t.f2 += a[j] * b[jl] * ak[jl] * bk[j];
                t.f3 += b[j] * a[jl] * ak[j] * bk[jl];
                t.f4 += b[j] * a[jl] * ak[jl] * bk[j];
            }
        }
    }
    t
}

/// `F_i = scale · Σ_{ν,μ} v_ν w_μ Σ_j c_j^(ν) c_j^(μ)`.
pub fn f_ni(spec: &LinearProcessSpec, ps: &ProjectionSet, i: usize, conv: &Convention) -> Result<f64> {
    check_index(ps, i)?;
    let p = ps.pair(i);
    Ok(f_i_from(&spec.project(&p.v), &spec.project(&p.w), conv))
}

pub fn f_nik_terms(spec: &LinearProcessSpec, ps: &ProjectionSet, i: usize, k: usize, conv: &Convention) -> Result<FourTerms> {
    check_index(ps, i)?;
    check_index(ps, k)?;
    let (pi, pk) = (ps.pair(i), ps.pair(k));
    let pi = (spec.project(&pi.v), spec.project(&pi.w));
    let pk = (spec.project(&pk.v), spec.project(&pk.w));
    Ok(four_terms_from(&pi, &pk, conv))
}

/// `F_ik = Σ_{l≥1} g_l g'_l` (factored) or
/// `Σ_{l≥1} Σ_j [a_j b_{j+l} + b_j a_{j+l}][a'_j b'_{j+l} + b'_j a'_{j+l}]`.
pub fn f_nik(spec: &LinearProcessSpec, ps: &ProjectionSet, i: usize, k: usize, conv: &Convention) -> Result<f64> {
    f_nik_terms(spec, ps, i, k, conv).map(|t| t.total())
}

/// `β_ik = F_i F_k (E ε⁴ − σ⁴) + F_ik σ⁴`.
pub fn beta_analytic(spec: &LinearProcessSpec, ps: &ProjectionSet, conv: &Convention) -> Result<AsymCovMatrix> {
    let proj = projected(spec, ps)?;
    let innov = spec.innovations();
    let s4 = innov.sigma2 * innov.sigma2;
    let excess = innov.gamma4() - s4;
    let f: Vec<f64> = proj.iter().map(|(a, b)| f_i_from(a, b, conv)).collect();
    let m = ps.m();
    let mut beta = DMatrix::zeros(m, m);
    for i in 0..m {
        for k in i..m {
            let fik = four_terms_from(&proj[i], &proj[k], conv).total();
            let v = f[i] * f[k] * excess + fik * s4;
            beta[(i, k)] = v;
            beta[(k, i)] = v;
        }
    }
    Ok(AsymCovMatrix {
        beta,
        source: VarianceSource::Analytic,
        convention: Some(*conv),
        mc_se: None,
        bandwidth: None,
    })
}

/// Hypothesized forms `v_j'Σ w_j = σ² Σ_j a_j b_j` under the process.
pub fn population_forms(spec: &LinearProcessSpec, ps: &ProjectionSet) -> Result<Vec<f64>> {
    let s2 = spec.innovations().sigma2;
    Ok(projected(spec, ps)?
        .iter()
        .map(|(a, b)| s2 * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .collect())
}

/// Sample covariance of the rows of `draws` with delete-one jackknife
/// standard errors for every entry.
pub fn covariance_with_jackknife(draws: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let reps = draws.len();
    let m = draws.first().map_or(0, Vec::len);
    let nf = reps as f64;
    let mut mean = vec![0.0; m];
    for row in draws {
        for (acc, x) in mean.iter_mut().zip(row) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= nf);
    let centered: Vec<Vec<f64>> = draws
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(x, mu)| x - mu).collect())
        .collect();
    let mut cov = DMatrix::zeros(m, m);
    let mut se = DMatrix::zeros(m, m);
    for i in 0..m {
        for k in i..m {
            let sxy: f64 = centered.iter().map(|r| r[i] * r[k]).sum();
            let c = sxy / (nf - 1.0);
            // leave-one-out covariance: (S − x_r y_r · N/(N−1)) / (N − 2)
            let loo: Vec<f64> = centered
                .iter()
                .map(|r| (sxy - r[i] * r[k] * nf / (nf - 1.0)) / (nf - 2.0))
                .collect();
            let loo_mean = loo.iter().sum::<f64>() / nf;
            let var = loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
            cov[(i, k)] = c;
            cov[(k, i)] = c;
            se[(i, k)] = var.sqrt();
            se[(k, i)] = var.sqrt();
        }
    }
    (cov, se)
}

/// Deviations `√n v_j'(Σ̂_n − Σ)w_j` of one simulated replication.
pub(crate) fn replicate_devs(
    spec: &LinearProcessSpec,
    ps: &ProjectionSet,
    null_forms: &[f64],
    n: usize,
    seed: u64,
    rep: usize,
) -> Vec<f64> {
    let mut rng = exec::replication_rng(seed, rep);
    let sample = spec.simulate_with(n, &mut rng);
    let hat = projected_sample_forms(&sample, ps).expect("dimensions checked by caller");
    DeviationResult::from_forms(&hat, null_forms, n).devs
}

/// Empirical covariance of the deviation vector over `reps` simulated samples.
pub fn mc_oracle(
    spec: &LinearProcessSpec,
    ps: &ProjectionSet,
    n: usize,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<AsymCovMatrix> {
    if reps < 100 {
        return Err(Error::param(format!("the simulation oracle needs at least 100 replications, got {reps}")));
    }
    if n == 0 {
        return Err(Error::param("sample length n must be at least 1"));
    }
    let null_forms = population_forms(spec, ps)?;
    let draws = exec::map_indexed(reps, workers, |rep| replicate_devs(spec, ps, &null_forms, n, seed, rep));
    let (beta, se) = covariance_with_jackknife(&draws);
    Ok(AsymCovMatrix {
        beta,
        source: VarianceSource::McOracle,
        convention: None,
        mc_se: Some(se),
        bandwidth: None,
    })
}

/// Default Bartlett bandwidth `ceil(n^{1/3})`.
pub fn default_bandwidth(n: usize) -> usize {
    (n as f64).cbrt().ceil() as usize
}

/// Minimum sample length accepted by [`beta_bartlett`].
pub const BARTLETT_MIN_N: usize = 30;

/// Long-run covariance of the product series `ξ_t^(j) = (v_j'Y_t)(w_j'Y_t)`
/// with triangular weights `1 − h/(b+1)` up to lag `b`.
pub fn beta_bartlett(sample: &TimeSeriesSample, ps: &ProjectionSet, bandwidth: Option<usize>) -> Result<AsymCovMatrix> {
    let n = sample.n();
    if n < BARTLETT_MIN_N {
        return Err(Error::SampleTooShort {
            required: BARTLETT_MIN_N,
            found: n,
        });
    }
    if sample.d() != ps.d() {
        return Err(Error::DimensionMismatch {
            expected: ps.d(),
            found: sample.d(),
            context: "sample dimension against projection set",
        });
    }
    let b = bandwidth.unwrap_or_else(|| default_bandwidth(n)).min(n - 1);
    let nf = n as f64;
    let xi: Vec<Vec<f64>> = ps
        .pairs()
        .iter()
        .map(|p| {
            let raw: Vec<f64> = sample.rows().map(|r| p.v.dot(r) * p.w.dot(r)).collect();
            let mean = raw.iter().sum::<f64>() / nf;
            raw.into_iter().map(|x| x - mean).collect()
        })
        .collect();
    let cross = |x: &[f64], y: &[f64], h: usize| -> f64 { x.iter().zip(&y[h..]).map(|(a, c)| a * c).sum::<f64>() / nf };
    let m = ps.m();
    let mut beta = DMatrix::zeros(m, m);
    for i in 0..m {
        for k in i..m {
            let mut acc = cross(&xi[i], &xi[k], 0);
            for h in 1..=b {
                let weight = 1.0 - h as f64 / (b as f64 + 1.0);
                acc += weight * (cross(&xi[i], &xi[k], h) + cross(&xi[k], &xi[i], h));
            }
            beta[(i, k)] = acc;
            beta[(k, i)] = acc;
        }
    }
    Ok(AsymCovMatrix {
        beta,
        source: VarianceSource::Bartlett,
        convention: None,
        mc_se: None,
        bandwidth: Some(b),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub c: f64,
    pub rho: f64,
}

impl DecayCertificate {
    /// Whether `|β_ik| ≤ C ρ^{|i−k|}` for all entries, up to relative rounding `rel`.
    pub fn covers(&self, beta: &DMatrix<f64>, rel: f64) -> bool {
        (0..beta.nrows()).all(|i| {
            (0..beta.ncols()).all(|k| beta[(i, k)].abs() <= self.c * self.rho.powi(i.abs_diff(k) as i32) * (1.0 + rel))
        })
    }
}

/// Geometric envelope `|β_ik| ≤ C ρ^{|i−k|}` with `C = max_i |β_ii|`.
pub fn decay_certificate(beta: &AsymCovMatrix) -> Result<DecayCertificate> {
    decay_certificate_with_cap(beta, 1.0)
}

/// As [`decay_certificate`] but allowing `C` up to `cap_factor · max_i |β_ii|`.
pub fn decay_certificate_with_cap(beta: &AsymCovMatrix, cap_factor: f64) -> Result<DecayCertificate> {
    let m = beta.m();
    if m < 3 {
        return Err(Error::param(format!("decay certificate needs m ≥ 3, got {m}")));
    }
    if !(cap_factor >= 1.0) {
        return Err(Error::param("cap factor must be at least 1"));
    }
    let envelope: Vec<f64> = (0..m)
        .map(|h| (0..m - h).map(|i| beta.beta[(i, i + h)].abs()).fold(0.0, f64::max))
        .collect();
    let c = cap_factor * envelope[0];
    if c == 0.0 {
        return if envelope.iter().all(|&x| x == 0.0) {
            Ok(DecayCertificate { c: 0.0, rho: 0.0 })
        } else {
            Err(Error::CertificateFailure("vanishing diagonal with nonzero off-diagonal entries".into()))
        };
    }
    let rho = envelope
        .iter()
        .enumerate()
        .skip(1)
        .map(|(h, &x)| (x / c).powf(1.0 / h as f64))
        .fold(0.0, f64::max);
    if rho >= 1.0 {
        return Err(Error::CertificateFailure(format!(
            "off-diagonal envelope does not decay below C = {c} (fitted rate {rho})"
        )));
    }
    Ok(DecayCertificate { c, rho })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BermanDiagnostic {
    /// `ρ_h = sup_{|i−k| ≥ h} |corr_ik|` for `h = 1..m`.
    pub rho_h: Vec<f64>,
    /// Partial sums of `ρ_h²`.
    pub partial_sums: Vec<f64>,
    /// Whether the second half of the partial sums adds at most 1% of the total.
    pub converged: bool,
}

pub fn berman_diagnostic(beta: &AsymCovMatrix) -> BermanDiagnostic {
    let corr = beta.correlation();
    let m = beta.m();
    let mut rho_h = vec![0.0; m.saturating_sub(1)];
    for h in (1..m).rev() {
        let at_h = (0..m - h).map(|i| corr[(i, i + h)].abs()).fold(0.0, f64::max);
        let beyond = rho_h.get(h).copied().unwrap_or(0.0);
        rho_h[h - 1] = at_h.max(beyond);
    }
    let partial_sums: Vec<f64> = rho_h
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r * r;
            Some(*acc)
        })
        .collect();
    let total = partial_sums.last().copied().unwrap_or(0.0);
    let half = partial_sums.len() / 2;
    let first_half = if half == 0 { 0.0 } else { partial_sums[half - 1] };
    let converged = total == 0.0 || (total - first_half) <= 0.01 * total;
    BermanDiagnostic {
        rho_h,
        partial_sums,
        converged,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityFit {
    pub levels: Vec<f64>,
    /// `max_ik |β̂_ik(r) − β_ik|` per level.
    pub deviations: Vec<f64>,
    /// Smallest `K` with deviation ≤ `K r` at every level.
    pub k: f64,
    /// Least-squares slope of log deviation against log `r`.
    pub slope: f64,
}

/// Sensitivity of the analytic covariances to multiplicative projection
/// errors of relative size `r`.
pub fn perturbation_sensitivity(
    spec: &LinearProcessSpec,
    ps: &ProjectionSet,
    levels: &[f64],
    seed: u64,
    conv: &Convention,
) -> Result<SensitivityFit> {
    if levels.len() < 2 || levels.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::param("need at least two perturbation levels in (0, 1)"));
    }
    let base = beta_analytic(spec, ps, conv)?;
    let deviations = levels
        .iter()
        .map(|&r| {
            let pert = beta_analytic(spec, &ps.perturbed(r, seed), conv)?;
            Ok((&pert.beta - &base.beta).abs().max())
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = levels
        .iter()
        .zip(&deviations)
        .map(|(r, d)| d / r)
        .fold(0.0, f64::max);
    let xs: Vec<f64> = levels.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = deviations.iter().map(|d| d.max(f64::MIN_POSITIVE).ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(SensitivityFit {
        levels: levels.to_vec(),
        deviations,
        k,
        slope: sxy / sxx,
    })
}
