//! Gumbel calibration of the maximum statistics.
//!
//! Under the null, `a_m⁻¹ (max_j |D_j|/β_jj^{1/2} − b_m)` is approximately
//! standard Gumbel, `G(z) = exp(−e^{−z})`; the signed maximum uses `c_m`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::covstat::DeviationResult;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteringVariant {
    /// `b_m = (2 log m)^{1/2} − (8 log m)^{−1/2}(log log m + 4π − 4)`,
    /// `c_m = (2 log m)^{−1/2} − ½(2 log m)^{−1/2}(log log m + 4π)`.
    Paper,
    /// Textbook centerings for maxima of `m` independent standard normals:
    /// `b_m = √(2L) − (log L + log π)/(2√(2L))` for `|X|`,
    /// `c_m = √(2L) − (log L + log 4π)/(2√(2L))` for `X`, with `L = log m`.
    #[default]
    Classical,
}

impl FromStr for CenteringVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "classical" => Ok(Self::Classical),
            _ => Err(Error::param(format!("unknown centering `{s}` (expected paper or classical)"))),
        }
    }
}

impl fmt::Display for CenteringVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Classical => "classical",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GumbelCalibration {
    pub m: usize,
    pub a_m: f64,
    pub b_m: f64,
    pub c_m: f64,
    pub variant: CenteringVariant,
    pub alpha: f64,
}

pub fn constants(m: usize, variant: CenteringVariant) -> Result<GumbelCalibration> {
    if m < 2 {
        return Err(Error::param(format!("Gumbel constants need m ≥ 2, got {m}")));
    }
    let l = (m as f64).ln();
    let ll = l.ln();
    let root = (2.0 * l).sqrt();
    let a_m = 1.0 / root;
    let (b_m, c_m) = match variant {
        CenteringVariant::Paper => (
            root - (ll + 4.0 * PI - 4.0) / (8.0 * l).sqrt(),
            a_m - 0.5 * a_m * (ll + 4.0 * PI),
        ),
        CenteringVariant::Classical => (
            root - (ll + PI.ln()) / (2.0 * root),
            root - (ll + (4.0 * PI).ln()) / (2.0 * root),
        ),
    };
    Ok(GumbelCalibration {
        m,
        a_m,
        b_m,
        c_m,
        variant,
        alpha: 0.05,
    })
}

impl GumbelCalibration {
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    /// `q_m = a_m G⁻¹(1 − α) + b_m`, the critical value of the standardized `T_n`.
    pub fn q_m(&self) -> f64 {
        self.a_m * gumbel_quantile(self.alpha).expect("alpha validated") + self.b_m
    }

    /// Critical value of the standardized signed maximum.
    pub fn q_m_signed(&self) -> f64 {
        self.a_m * gumbel_quantile(self.alpha).expect("alpha validated") + self.c_m
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub fn gumbel_cdf(z: f64) -> f64 {
    (-(-z).exp()).exp()
}

/// Upper tail `1 − G(z)`, accurate for large `z`.
pub fn gumbel_sf(z: f64) -> f64 {
    -(-(-z).exp()).exp_m1()
}

/// Upper-α quantile `G⁻¹(1 − α) = −log(−log(1 − α))`.
pub fn gumbel_quantile(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(-(-(-alpha).ln_1p()).ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    AbsMax,
    SignedMax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    /// `m (2 log m)^{1/2}`.
    pub lhs: f64,
    /// `n^{1/6}`.
    pub rhs: f64,
    pub holds: bool,
}

/// Advisory check of `m (2 log m)^{1/2} ≤ n^{1/6}`; never blocks a test.
pub fn growth_check(m: usize, n: usize) -> GrowthCheck {
    let lhs = m as f64 * (2.0 * (m as f64).ln()).sqrt();
    let rhs = (n as f64).powf(1.0 / 6.0);
    GrowthCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    /// Point estimate `v'Σ̂w`.
    pub center: f64,
    /// `β_jj^{1/2} / √n`, the unit in which the half-width is measured.
    pub scale: f64,
    pub q: f64,
}

impl Interval {
    /// Whether `value` lies outside the interval, decided in the same
    /// arithmetic as the test statistic so the two decisions agree exactly.
    pub fn excludes(&self, value: f64, n: usize, beta_jj: f64) -> bool {
        ((n as f64).sqrt() * (self.center - value)).abs() / beta_jj.sqrt() > self.q
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    pub m: usize,
    pub n: usize,
    pub statistic: f64,
    pub argmax: usize,
    pub normalized: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub critical_value: f64,
    pub centering: CenteringVariant,
    pub growth_check: GrowthCheck,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<Vec<Interval>>,
}

fn report(kind: TestKind, statistic: f64, argmax: usize, center: f64, q: f64, n: usize, cal: &GumbelCalibration) -> TestReport {
    let normalized = (statistic - center) / cal.a_m;
    TestReport {
        kind,
        m: cal.m,
        n,
        statistic,
        argmax,
        normalized,
        p_value: gumbel_sf(normalized),
        reject: statistic > q,
        alpha: cal.alpha,
        critical_value: q,
        centering: cal.variant,
        growth_check: growth_check(cal.m, n),
        ci: None,
    }
}

fn standardized(res: &DeviationResult, cal: &GumbelCalibration) -> Result<Vec<f64>> {
    let std = res.std_devs.clone().ok_or(Error::MissingStandardization)?;
    if std.len() != cal.m {
        return Err(Error::DimensionMismatch {
            expected: cal.m,
            found: std.len(),
            context: "standardized deviations against calibration m",
        });
    }
    Ok(std)
}

/// Two-sided test based on `max_j |D_j|/β_jj^{1/2}`.
pub fn test_abs_max(res: &DeviationResult, cal: &GumbelCalibration) -> Result<TestReport> {
    let std = standardized(res, cal)?;
    let (argmax, stat) = std
        .iter()
        .map(|x| x.abs())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, x)| if x > best.1 { (j, x) } else { best });
    Ok(report(TestKind::AbsMax, stat, argmax, cal.b_m, cal.q_m(), res.n, cal))
}

/// One-sided test against upward deviations, based on `max_j D_j/β_jj^{1/2}`.
pub fn test_signed_max(res: &DeviationResult, cal: &GumbelCalibration) -> Result<TestReport> {
    let std = standardized(res, cal)?;
    let (argmax, stat) = std
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, x)| if x > best.1 { (j, x) } else { best });
    Ok(report(TestKind::SignedMax, stat, argmax, cal.c_m, cal.q_m_signed(), res.n, cal))
}

/// Simultaneous intervals `v_j'Σ̂w_j ± β_jj^{1/2} q_m / √n`.
pub fn simultaneous_ci(sigma_hat_proj: &[f64], beta_diag: &[f64], cal: &GumbelCalibration, n: usize) -> Result<Vec<Interval>> {
    if sigma_hat_proj.len() != beta_diag.len() {
        return Err(Error::DimensionMismatch {
            expected: sigma_hat_proj.len(),
            found: beta_diag.len(),
            context: "variance diagonal against projected forms",
        });
    }
    if n == 0 {
        return Err(Error::param("sample length n must be at least 1"));
    }
    let q = cal.q_m();
    sigma_hat_proj
        .iter()
        .zip(beta_diag)
        .enumerate()
        .map(|(j, (&center, &b))| {
            if !(b > 0.0) {
                return Err(Error::DegenerateVariance { index: j, value: b });
            }
            let scale = b.sqrt() / (n as f64).sqrt();
            Ok(Interval {
                lower: center - q * scale,
                upper: center + q * scale,
                center,
                scale,
                q,
            })
        })
        .collect()
}
