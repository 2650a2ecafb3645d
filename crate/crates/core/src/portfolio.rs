//! Minimum-variance portfolios in a one-factor model
//! `Σ = σ_M² b b' + diag(σ²)`.
//!
//! The global minimum-variance weights have the closed form
//! `w_ν ∝ σ_ν⁻² (1 − β_ν/β_LS)` and the long-only version replaces the
//! threshold by `β_LO` and clips assets above it to zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projections::{group_decompose, risk_groups, ProjectionSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneFactorModel {
    pub betas: Vec<f64>,
    /// Idiosyncratic variances `σ_ν²`.
    pub idio: Vec<f64>,
    pub sigma_m2: f64,
    #[serde(default)]
    pub r: f64,
}

impl OneFactorModel {
    pub fn new(betas: Vec<f64>, idio: Vec<f64>, sigma_m2: f64) -> Result<Self> {
        let model = Self {
            betas,
            idio,
            sigma_m2,
            r: 0.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            return Err(Error::EmptyInput("asset list"));
        }
        if self.betas.len() != self.idio.len() {
            return Err(Error::DimensionMismatch {
                expected: self.betas.len(),
                found: self.idio.len(),
                context: "idiosyncratic variances against betas",
            });
        }
        if let Some((i, b)) = self.betas.iter().enumerate().find(|(_, b)| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::param(format!("beta {i} must be finite and nonnegative, got {b}")));
        }
        if let Some((i, s)) = self.idio.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::param(format!("idiosyncratic variance {i} must be positive, got {s}")));
        }
        if !(self.sigma_m2.is_finite() && self.sigma_m2 >= 0.0) {
            return Err(Error::param(format!("factor variance must be nonnegative, got {}", self.sigma_m2)));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.betas.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.d();
        DMatrix::from_fn(d, d, |i, k| {
            self.sigma_m2 * self.betas[i] * self.betas[k] + if i == k { self.idio[i] } else { 0.0 }
        })
    }

    /// `Σ_{ν∈A} β_ν/σ_ν²` and `Σ_{ν∈A} β_ν²/σ_ν²` over the given assets.
    fn moments<I: Iterator<Item = usize>>(&self, assets: I) -> (f64, f64) {
        assets.fold((0.0, 0.0), |(s1, s2), nu| {
            let b = self.betas[nu];
            (s1 + b / self.idio[nu], s2 + b * b / self.idio[nu])
        })
    }

    /// `(σ_M⁻² + Σ_A β²/σ²) / Σ_A β/σ²`, infinite without factor exposure.
    fn threshold_over<I: Iterator<Item = usize>>(&self, assets: I) -> f64 {
        let (s1, s2) = self.moments(assets);
        if self.sigma_m2 == 0.0 || s1 == 0.0 {
            f64::INFINITY
        } else {
            (1.0 / self.sigma_m2 + s2) / s1
        }
    }
}

/// `Σ⁻¹ = S⁻¹ − b_r b_r' / (σ_M⁻² + b_r'b)` with `b_r = (β_ν/σ_ν²)_ν`.
pub fn sherman_morrison_inverse(model: &OneFactorModel) -> DMatrix<f64> {
    let d = model.d();
    let br: Vec<f64> = (0..d).map(|i| model.betas[i] / model.idio[i]).collect();
    let denom = if model.sigma_m2 == 0.0 {
        f64::INFINITY
    } else {
        1.0 / model.sigma_m2 + model.moments(0..d).1
    };
    DMatrix::from_fn(d, d, |i, k| {
        let s = if i == k { 1.0 / model.idio[i] } else { 0.0 };
        s - br[i] * br[k] / denom
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortfolioKind {
    Mvp,
    Lmvp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    pub w: Vec<f64>,
    pub kind: PortfolioKind,
    /// `β_LS` or `β_LO`; `None` stands for an infinite threshold.
    pub threshold_beta: Option<f64>,
    pub active_set: Vec<usize>,
    /// Normalizing constant of the raw weights, the variance of the portfolio.
    pub sigma_mvp2: f64,
}

impl PortfolioWeights {
    pub fn variance(&self, model: &OneFactorModel) -> f64 {
        let w = DVector::from_column_slice(&self.w);
        (w.transpose() * model.covariance() * &w)[(0, 0)]
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn normalized(model: &OneFactorModel, threshold: f64, clip: bool, kind: PortfolioKind) -> PortfolioWeights {
    // raw weights with σ_MVP² = 1, then divided by their sum
    let raw: Vec<f64> = (0..model.d())
        .map(|nu| {
            let b = if clip { model.betas[nu].min(threshold) } else { model.betas[nu] };
            let ratio = if threshold.is_finite() { b / threshold } else { 0.0 };
            (1.0 - ratio) / model.idio[nu]
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let active_set = w.iter().enumerate().filter(|(_, x)| **x > 0.0).map(|(i, _)| i).collect();
    PortfolioWeights {
        w,
        kind,
        threshold_beta: finite(threshold),
        active_set,
        sigma_mvp2: 1.0 / total,
    }
}

/// Long-short threshold `β_LS`.
pub fn mvp_threshold(model: &OneFactorModel) -> f64 {
    model.threshold_over(0..model.d())
}

/// Global minimum-variance portfolio `Σ⁻¹1 / 1'Σ⁻¹1`.
pub fn mvp_closed_form(model: &OneFactorModel) -> Result<PortfolioWeights> {
    model.validate()?;
    Ok(normalized(model, mvp_threshold(model), false, PortfolioKind::Mvp))
}

/// Smallest `β_LO` solving `β_LO = (σ_M⁻² + Σ_{β_i<β_LO} β_i²/σ_i²) / Σ_{β_i<β_LO} β_i/σ_i²`.
///
/// The active set only changes at the sorted betas, so the candidate
/// intervals `(β_(k), β_(k+1)]` are scanned in ascending order.
pub fn lmvp_threshold(model: &OneFactorModel) -> Result<f64> {
    model.validate()?;
    let d = model.d();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| model.betas[a].total_cmp(&model.betas[b]).then(a.cmp(&b)));
    let mut k = 0;
    while k < d {
        let level = model.betas[order[k]];
        while k < d && model.betas[order[k]] == level {
            k += 1;
        }
        let next = order.get(k).map_or(f64::INFINITY, |&nu| model.betas[nu]);
        let candidate = model.threshold_over(order[..k].iter().copied());
        if candidate > level && candidate <= next {
            return Ok(candidate);
        }
    }
    Err(Error::NoFixedPoint("no active set yields a consistent long-only threshold".into()))
}

/// Long-only minimum-variance weights `w_ν ∝ σ_ν⁻² (1 − min(β_ν, β_LO)/β_LO)`.
pub fn lmvp_weights(model: &OneFactorModel) -> Result<PortfolioWeights> {
    let threshold = lmvp_threshold(model)?;
    Ok(normalized(model, threshold, true, PortfolioKind::Lmvp))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderRestriction {
    pub delta: f64,
    pub rho: f64,
    /// Group index (1-based) of each asset.
    pub group_of: Vec<usize>,
    /// Largest `C` with `σ_ν² ≥ C ν^{1+δ} ρ^{−i}`, `ν` the 1-based risk rank.
    pub c_fit: f64,
    /// Whether `w_ν ≤ C⁻¹ σ_MVP² ν^{−(1+δ)} ρ^{i}` holds for every asset.
    pub weight_bound_holds: bool,
    /// Whether the asset labels are already in ascending risk order.
    pub order_consistent: bool,
    pub pass: bool,
}

/// Group a long-only portfolio into `g` risk classes and check the order
/// restriction that makes the group weights decay geometrically.
pub fn risk_class_groups(
    model: &OneFactorModel,
    weights: &PortfolioWeights,
    g: usize,
    delta: f64,
    rho: f64,
) -> Result<(ProjectionSet, OrderRestriction)> {
    model.validate()?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !(delta > 0.0) {
        return Err(Error::param(format!("delta must be positive, got {delta}")));
    }
    if weights.w.len() != model.d() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            found: weights.w.len(),
            context: "weights against model",
        });
    }
    let groups = risk_groups(&model.idio, g)?;
    let ps = group_decompose(&weights.w, &model.idio, g)?;
    let mut group_of = vec![0; model.d()];
    let mut rank_of = vec![0; model.d()];
    let mut rank = 0;
    for (i, members) in groups.iter().enumerate() {
        for &nu in members {
            rank += 1;
            group_of[nu] = i + 1;
            rank_of[nu] = rank;
        }
    }
    let envelope = |nu: usize| (rank_of[nu] as f64).powf(1.0 + delta) * rho.powi(-(group_of[nu] as i32));
    let c_fit = (0..model.d()).map(|nu| model.idio[nu] / envelope(nu)).fold(f64::INFINITY, f64::min);
    let weight_bound_holds = (0..model.d()).all(|nu| weights.w[nu] <= weights.sigma_mvp2 / (c_fit * envelope(nu)) * (1.0 + 1e-9));
    let order_consistent = rank_of.iter().enumerate().all(|(nu, &r)| r == nu + 1);
    Ok((
        ps,
        OrderRestriction {
            delta,
            rho,
            group_of,
            c_fit,
            weight_bound_holds,
            order_consistent,
            pass: c_fit > 0.0 && weight_bound_holds,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct_mvp(model: &OneFactorModel) -> Vec<f64> {
        let inv = model.covariance().try_inverse().unwrap();
        let ones = DVector::from_element(model.d(), 1.0);
        let x = &inv * &ones;
        let s = x.sum();
        x.iter().map(|v| v / s).collect()
    }

    fn random_model(rng: &mut ChaCha8Rng, d: usize) -> OneFactorModel {
        let betas = (0..d).map(|_| rng.random_range(0.0..2.5)).collect();
        let idio = (0..d).map(|_| rng.random_range(0.2..2.0)).collect();
        OneFactorModel::new(betas, idio, rng.random_range(0.1..2.0)).unwrap()
    }

    #[test]
    fn two_by_two_inverse() {
        let m = OneFactorModel::new(vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
        let inv = sherman_morrison_inverse(&m);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0]);
        assert!((inv - expected).abs().max() < 1e-15);
        let no_factor = OneFactorModel::new(vec![1.0, 2.0], vec![2.0, 4.0], 0.0).unwrap();
        let inv = sherman_morrison_inverse(&no_factor);
        assert_eq!(inv, DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25])));
    }

    #[test]
    fn inverse_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_model(&mut rng, 10);
        let resid = m.covariance() * sherman_morrison_inverse(&m) - DMatrix::identity(10, 10);
        assert!(resid.abs().max() < 1e-10);
    }

    #[test]
    fn mvp_examples() {
        let zero = OneFactorModel::new(vec![0.0, 0.0], vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(mvp_closed_form(&zero).unwrap().w, vec![0.5, 0.5]);
        let single = OneFactorModel::new(vec![1.3], vec![0.7], 2.0).unwrap();
        assert!((mvp_closed_form(&single).unwrap().w[0] - 1.0).abs() < 1e-15);
        let m = OneFactorModel::new(vec![0.5, 1.0, 1.5], vec![1.0; 3], 1.0).unwrap();
        let w = mvp_closed_form(&m).unwrap();
        for (a, b) in w.w.iter().zip(direct_mvp(&m)) {
            assert!((a - b).abs() < 1e-12);
        }
        let v = w.variance(&m);
        assert!((v - w.sigma_mvp2).abs() < 1e-12);
    }

    #[test]
    fn mvp_is_global_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(&mut rng, 8);
        let w = mvp_closed_form(&m).unwrap();
        let v = w.variance(&m);
        let cov = m.covariance();
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            if s.abs() < 1e-3 {
                continue;
            }
            let x = DVector::from_iterator(8, raw.iter().map(|r| r / s));
            assert!((x.transpose() * &cov * &x)[(0, 0)] >= v - 1e-12);
        }
    }

    #[test]
    fn equal_betas_give_mvp() {
        let m = OneFactorModel::new(vec![0.8; 5], vec![1.0, 2.0, 0.5, 1.5, 3.0], 1.2).unwrap();
        let lo = lmvp_weights(&m).unwrap();
        let ls = mvp_closed_form(&m).unwrap();
        assert_eq!(lo.w, ls.w);
        assert!(lo.threshold_beta.unwrap() > 0.8);
    }

    #[test]
    fn zero_betas_infinite_threshold() {
        let m = OneFactorModel::new(vec![0.0; 3], vec![1.0, 2.0, 4.0], 1.0).unwrap();
        assert_eq!(lmvp_threshold(&m).unwrap(), f64::INFINITY);
        let w = lmvp_weights(&m).unwrap();
        assert_eq!(w.threshold_beta, None);
        assert!((w.w[0] - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn high_beta_asset_excluded() {
        let m = OneFactorModel::new(vec![0.2, 0.4, 5.0], vec![1.0; 3], 1.0).unwrap();
        let w = lmvp_weights(&m).unwrap();
        assert_eq!(w.w[2], 0.0);
        assert_eq!(w.active_set, vec![0, 1]);
        assert!(w.w.iter().all(|x| *x >= 0.0));
        assert!((w.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.variance(&m) >= mvp_closed_form(&m).unwrap().variance(&m));
    }

    #[test]
    fn constructed_order_restriction() {
        let (delta, rho, g): (f64, f64, usize) = (0.5, 0.6, 4);
        let d = 12;
        let per = d / g;
        let idio: Vec<f64> = (1..=d)
            .map(|nu| (nu as f64).powf(1.0 + delta) * rho.powi(-(((nu - 1) / per + 1) as i32)))
            .collect();
        let m = OneFactorModel::new(vec![0.5; d], idio, 1.0).unwrap();
        let w = lmvp_weights(&m).unwrap();
        let (ps, diag) = risk_class_groups(&m, &w, g, delta, rho).unwrap();
        assert!((diag.c_fit - 1.0).abs() < 1e-12);
        assert!(diag.pass && diag.order_consistent);
        assert_eq!(ps.m(), g);
        let (one, _) = risk_class_groups(&m, &w, 1, delta, rho).unwrap();
        assert!((one.pair(0).v.l1() - 1.0).abs() < 1e-12);
    }
}
