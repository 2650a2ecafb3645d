//! Sample covariances, projected deviations and the max-type statistics.
//!
//! All second moments use the divisor `1/n`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linproc::TimeSeriesSample;
use crate::projections::ProjectionSet;

/// `(1/n) Σ_t Y_t Y_t'`, optionally after subtracting the sample mean.
pub fn sample_cov(sample: &TimeSeriesSample, center: bool) -> Result<DMatrix<f64>> {
    let (n, d) = (sample.n(), sample.d());
    if n == 0 {
        return Err(Error::EmptyInput("sample"));
    }
    let mean = if center {
        let mut m = vec![0.0; d];
        for row in sample.rows() {
            for (acc, x) in m.iter_mut().zip(row) {
                *acc += x;
            }
        }
        m.iter_mut().for_each(|x| *x /= n as f64);
        m
    } else {
        vec![0.0; d]
    };
    let mut out = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in sample.rows() {
        for ((c, x), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = x - m;
        }
        for a in 0..d {
            let ya = centered[a];
            for b in a..d {
                out[(a, b)] += ya * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = out[(a, b)] / n as f64;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// `v_j' Σ̂_n w_j = (1/n) Σ_t (v_j'Y_t)(w_j'Y_t)` without forming `Σ̂_n`.
pub fn projected_sample_forms(sample: &TimeSeriesSample, ps: &ProjectionSet) -> Result<Vec<f64>> {
    check_dim(sample, ps)?;
    let n = sample.n() as f64;
    Ok(ps
        .pairs()
        .iter()
        .map(|p| {
            let same = p.v == p.w;
            sample
                .rows()
                .map(|row| {
                    let a = p.v.dot(row);
                    if same {
                        a * a
                    } else {
                        a * p.w.dot(row)
                    }
                })
                .sum::<f64>()
                / n
        })
        .collect())
}

fn check_dim(sample: &TimeSeriesSample, ps: &ProjectionSet) -> Result<()> {
    if sample.d() != ps.d() {
        return Err(Error::DimensionMismatch {
            expected: ps.d(),
            found: sample.d(),
            context: "sample dimension against projection set",
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationResult {
    /// `D_nj = √n v_j'(Σ̂_n − Σ_n) w_j`.
    pub devs: Vec<f64>,
    /// `max_j |D_nj|`.
    pub t_n: f64,
    /// `max_j D_nj`.
    pub signed_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_devs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_t_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_signed_max: Option<f64>,
    pub n: usize,
    pub m: usize,
}

fn abs_max(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).fold(f64::NEG_INFINITY, f64::max)
}

fn signed_max(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl DeviationResult {
    /// Build from sample forms `v_j'Σ̂w_j` and hypothesized forms `v_j'Σ₀w_j`.
    pub fn from_forms(sample_forms: &[f64], null_forms: &[f64], n: usize) -> Self {
        let sqrt_n = (n as f64).sqrt();
        let devs: Vec<f64> = sample_forms
            .iter()
            .zip(null_forms)
            .map(|(hat, null)| sqrt_n * (hat - null))
            .collect();
        Self {
            t_n: abs_max(&devs),
            signed_max: signed_max(&devs),
            m: devs.len(),
            devs,
            std_devs: None,
            std_t_n: None,
            std_signed_max: None,
            n,
        }
    }

    /// Index of the pair attaining the (standardized, if available) absolute maximum.
    pub fn argmax_abs(&self) -> usize {
        let values = self.std_devs.as_deref().unwrap_or(&self.devs);
        values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (j, v)| if v.abs() > best.1 { (j, v.abs()) } else { best })
            .0
    }
}

/// Projected deviations of the sample covariance from `sigma0`.
pub fn deviations(sample: &TimeSeriesSample, sigma0: &DMatrix<f64>, ps: &ProjectionSet) -> Result<DeviationResult> {
    check_dim(sample, ps)?;
    check_symmetric(sigma0)?;
    let null_forms = ps.bilinear_forms(sigma0)?;
    let hat = projected_sample_forms(sample, ps)?;
    Ok(DeviationResult::from_forms(&hat, &null_forms, sample.n()))
}

/// Same as [`deviations`] but against the mean-centered sample covariance.
pub fn deviations_centered(sample: &TimeSeriesSample, sigma0: &DMatrix<f64>, ps: &ProjectionSet) -> Result<DeviationResult> {
    check_dim(sample, ps)?;
    check_symmetric(sigma0)?;
    let null_forms = ps.bilinear_forms(sigma0)?;
    let hat = ps.bilinear_forms(&sample_cov(sample, true)?)?;
    Ok(DeviationResult::from_forms(&hat, &null_forms, sample.n()))
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::param("hypothesized covariance must be square"));
    }
    for a in 0..m.nrows() {
        for b in 0..a {
            let (x, y) = (m[(a, b)], m[(b, a)]);
            if !(x.is_finite() && y.is_finite()) || (x - y).abs() > 1e-9 * x.abs().max(y.abs()).max(1.0) {
                return Err(Error::param(format!("hypothesized covariance is not symmetric at ({a},{b})")));
            }
        }
    }
    Ok(())
}

/// Divide each deviation by `β_jj^{1/2}` and recompute the maxima.
pub fn standardize(res: &DeviationResult, beta_diag: &[f64]) -> Result<DeviationResult> {
    if beta_diag.len() != res.m {
        return Err(Error::DimensionMismatch {
            expected: res.m,
            found: beta_diag.len(),
            context: "variance diagonal against deviations",
        });
    }
    if let Some((index, &value)) = beta_diag.iter().enumerate().find(|(_, b)| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::DegenerateVariance { index, value });
    }
    let std: Vec<f64> = res.devs.iter().zip(beta_diag).map(|(d, b)| d / b.sqrt()).collect();
    let mut out = res.clone();
    out.std_t_n = Some(abs_max(&std));
    out.std_signed_max = Some(signed_max(&std));
    out.std_devs = Some(std);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcfDeviationResult {
    pub gamma_hat: Vec<f64>,
    pub gamma0: Vec<f64>,
    /// `max_h |γ̂(h) − γ(h)|`.
    pub v_n: f64,
}

/// `γ̂(h) = (1/n) Σ_{t=1}^{n−h} Z_t Z_{t+h}` for `h = 0..=max_lag`.
pub fn sample_acf(z: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = z.len();
    if n == 0 {
        return Err(Error::EmptyInput("series"));
    }
    if max_lag >= n {
        return Err(Error::param(format!("maximal lag {max_lag} must be smaller than n = {n}")));
    }
    Ok((0..=max_lag)
        .map(|h| z.iter().zip(&z[h..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect())
}

pub fn acf_max_deviation(z: &[f64], gamma0: &[f64], max_lag: usize) -> Result<AcfDeviationResult> {
    if gamma0.len() != max_lag + 1 {
        return Err(Error::DimensionMismatch {
            expected: max_lag + 1,
            found: gamma0.len(),
            context: "hypothesized autocovariances",
        });
    }
    let gamma_hat = sample_acf(z, max_lag)?;
    let v_n = gamma_hat
        .iter()
        .zip(gamma0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(AcfDeviationResult {
        gamma_hat,
        gamma0: gamma0.to_vec(),
        v_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linproc::{InnovationSpec, LinearProcessSpec, ProcessFamily, DEFAULT_TOL};
    use crate::projections::{diagonal, entry_selection, neighbor_scheme};
    use proptest::prelude::*;

    fn white_noise(d: usize) -> LinearProcessSpec {
        let coefficients = (0..d).map(|nu| {
            let mut c = vec![0.0; nu + 1];
            c[nu] = 1.0;
            c
        });
        LinearProcessSpec::build(
            ProcessFamily::Explicit { rho: 0.5, coefficients: coefficients.collect() },
            InnovationSpec::default(),
            DEFAULT_TOL,
        )
        .unwrap()
    }

    #[test]
    fn single_observation_outer_product() {
        let s = TimeSeriesSample::from_rows(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let c = sample_cov(&s, false).unwrap();
        let mut e = DMatrix::zeros(3, 3);
        e[(0, 0)] = 1.0;
        assert_eq!(c, e);
    }

    #[test]
    fn constant_sample_centered_is_zero() {
        let s = TimeSeriesSample::from_rows(vec![vec![2.0, -1.0]; 7]).unwrap();
        assert_eq!(sample_cov(&s, true).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn white_noise_sample_cov_near_identity() {
        let n = 100_000;
        let s = white_noise(3).simulate(n, 42).unwrap();
        let c = sample_cov(&s, false).unwrap();
        // MC oracle: se of a variance estimate is sqrt(2/n), of a covariance sqrt(1/n)
        for a in 0..3 {
            for b in 0..3 {
                let target = if a == b { 1.0 } else { 0.0 };
                let se = if a == b { (2.0 / n as f64).sqrt() } else { (1.0 / n as f64).sqrt() };
                assert!((c[(a, b)] - target).abs() < 5.0 * se, "({a},{b}) = {}", c[(a, b)]);
            }
        }
    }

    #[test]
    fn self_comparison_is_zero() {
        let spec = LinearProcessSpec::build(ProcessFamily::ArFamily { d: 4, rho: 0.5 }, InnovationSpec::default(), DEFAULT_TOL)
            .unwrap();
        let s = spec.simulate(500, 3).unwrap();
        let hat = sample_cov(&s, false).unwrap();
        for ps in [diagonal(4).unwrap(), neighbor_scheme(4, 1).unwrap()] {
            let r = deviations(&s, &hat, &ps).unwrap();
            assert!(r.t_n < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn scalar_variance_reduction() {
        let z = [0.5, -1.0, 2.0, 0.25];
        let s = TimeSeriesSample::from_series(&z).unwrap();
        let sigma0 = DMatrix::from_element(1, 1, 1.5);
        let r = deviations(&s, &sigma0, &diagonal(1).unwrap()).unwrap();
        let gamma0_hat = sample_acf(&z, 0).unwrap()[0];
        assert!((r.devs[0] - 2.0 * (gamma0_hat - 1.5)).abs() < 1e-14);
        assert_eq!(r.t_n, r.devs[0].abs());
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let s = TimeSeriesSample::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        assert!(deviations(&s, &DMatrix::identity(3, 3), &diagonal(3).unwrap()).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(deviations(&s, &asym, &diagonal(2).unwrap()).is_err());
    }

    #[test]
    fn standardize_examples() {
        let r = DeviationResult::from_forms(&[1.0, 3.0, -2.0], &[0.0; 3], 4);
        let s = standardize(&r, &[1.0; 3]).unwrap();
        assert_eq!(s.std_devs.as_ref().unwrap(), &r.devs);
        let s4 = standardize(&r, &[4.0; 3]).unwrap();
        let halved: Vec<f64> = r.devs.iter().map(|d| d / 2.0).collect();
        assert_eq!(s4.std_devs.as_ref().unwrap(), &halved);
        assert_eq!(s.argmax_abs(), s4.argmax_abs());
        assert_eq!(s.std_t_n, Some(6.0));
        assert_eq!(s.std_signed_max, Some(6.0));
        assert!(matches!(standardize(&r, &[1.0, 0.0, 1.0]), Err(Error::DegenerateVariance { index: 1, .. })));
        assert!(standardize(&r, &[1.0]).is_err());
    }

    #[test]
    fn acf_examples() {
        let z = [1.0; 4];
        let r = acf_max_deviation(&z, &[1.0, 0.75], 1).unwrap();
        assert_eq!(r.gamma_hat, vec![1.0, 0.75]);
        assert_eq!(r.v_n, 0.0);
        assert!(acf_max_deviation(&z, &[0.0; 5], 4).is_err());

        let s = white_noise(1).simulate(100_000, 9).unwrap();
        let z = s.column(0);
        let r = acf_max_deviation(&z, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 5).unwrap();
        let se = (1.0 / 100_000f64).sqrt();
        assert!((r.gamma_hat[0] - 1.0).abs() < 5.0 * 2f64.sqrt() * se);
        for h in 1..=5 {
            assert!(r.gamma_hat[h].abs() < 5.0 * se);
        }
    }

    #[test]
    fn acf_lag_zero_matches_variance_pair() {
        let spec = LinearProcessSpec::build(ProcessFamily::ArFamily { d: 1, rho: 0.5 }, InnovationSpec::default(), DEFAULT_TOL)
            .unwrap();
        let s = spec.simulate(400, 1).unwrap();
        let g0 = 4.0 / 3.0;
        let r = deviations(&s, &DMatrix::from_element(1, 1, g0), &diagonal(1).unwrap()).unwrap();
        let acf = acf_max_deviation(&s.column(0), &[g0], 0).unwrap();
        assert!((r.devs[0].abs() / 20.0 - acf.v_n).abs() < 1e-12);
    }

    #[test]
    fn entry_selection_recovers_max_entry_deviation() {
        let spec = LinearProcessSpec::build(ProcessFamily::ArFamily { d: 3, rho: 0.5 }, InnovationSpec::default(), DEFAULT_TOL)
            .unwrap();
        let s = spec.simulate(900, 5).unwrap();
        let sigma = spec.population_covariance();
        let pairs = [(0, 0), (0, 1), (1, 2), (2, 2)];
        let r = deviations(&s, &sigma, &entry_selection(&pairs, 3).unwrap()).unwrap();
        let hat = sample_cov(&s, false).unwrap();
        let m_n = pairs.iter().map(|&(i, k)| (hat[(i, k)] - sigma[(i, k)]).abs()).fold(0.0, f64::max);
        assert!((r.t_n - 30.0 * m_n).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn bilinear_and_shift_properties(
            rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 5..20),
            lambda in -4.0f64..4.0,
            delta in -1.0f64..1.0,
        ) {
            let s = TimeSeriesSample::from_rows(rows).unwrap();
            let ps = entry_selection(&[(0, 1), (2, 2), (1, 0)], 3).unwrap();
            let sigma0 = DMatrix::identity(3, 3);
            let base = deviations(&s, &sigma0, &ps).unwrap();

            let scaled = deviations(&s, &sigma0, &ps.with_scaled_v(0, lambda)).unwrap();
            prop_assert!((scaled.devs[0] - lambda * base.devs[0]).abs() < 1e-9 * (1.0 + base.devs[0].abs()));

            let mut shift = DMatrix::zeros(3, 3);
            shift[(0, 1)] = delta;
            shift[(1, 0)] = delta;
            let moved = deviations(&s, &(&sigma0 + &shift), &ps).unwrap();
            let sqrt_n = (s.n() as f64).sqrt();
            prop_assert!((moved.devs[0] - (base.devs[0] - sqrt_n * delta)).abs() < 1e-9);
            prop_assert!((moved.devs[1] - base.devs[1]).abs() < 1e-12);

            prop_assert!(base.signed_max <= base.t_n);
            prop_assert_eq!(base.m, base.devs.len());
            prop_assert_eq!(base.t_n, base.devs.iter().map(|d| d.abs()).fold(0.0, f64::max));
        }
    }
}
