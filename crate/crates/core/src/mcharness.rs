//! Seeded Monte Carlo experiments for the max-deviation tests.
//!
//! Replication `r` draws from its own ChaCha stream ([`exec::replication_rng`]),
//! and results are reduced in replication order, so a report depends only on
//! the plan — not on the number of workers.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymvar::{self, beta_analytic, mc_oracle, population_forms, Convention};
use crate::covstat::{projected_sample_forms, standardize, DeviationResult};
use crate::error::{Error, Result};
use crate::exec;
use crate::gumbel::{constants, gumbel_cdf, simultaneous_ci, test_abs_max, test_signed_max, CenteringVariant};
use crate::linproc::{LinearProcessSpec, SpecFile};
use crate::projections::{diagonal, neighbor_scheme, ProjectionSet, Scheme};

pub const MIN_REPS: usize = 100;
const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    NullGumbel,
    Size,
    Power,
    Coverage,
    BetaCalibration,
}

/// Departure from the null applied to each simulated sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Multiply the variance of one coordinate by `factor`.
    VarianceInflation { coordinate: usize, factor: f64 },
    /// `Y^(target) ← Y^(target) + θ Y^(source)`.
    CovarianceShift { source: usize, target: usize, theta: f64 },
}

impl Perturbation {
    fn validate(&self, d: usize) -> Result<()> {
        match *self {
            Perturbation::VarianceInflation { coordinate, factor } => {
                if coordinate >= d {
                    return Err(Error::IndexOutOfRange { index: coordinate, dim: d });
                }
                if !(factor > 0.0 && factor.is_finite()) {
                    return Err(Error::param(format!("inflation factor must be positive, got {factor}")));
                }
            }
            Perturbation::CovarianceShift { source, target, theta } => {
                for idx in [source, target] {
                    if idx >= d {
                        return Err(Error::IndexOutOfRange { index: idx, dim: d });
                    }
                }
                if source == target || !theta.is_finite() {
                    return Err(Error::param("covariance shift needs distinct coordinates and finite theta"));
                }
            }
        }
        Ok(())
    }

    fn apply(&self, sample: &mut crate::linproc::TimeSeriesSample) {
        match *self {
            Perturbation::VarianceInflation { coordinate, factor } => sample.scale_coordinate(coordinate, factor.sqrt()),
            Perturbation::CovarianceShift { source, target, theta } => sample.mix_coordinate(source, target, theta),
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenario: Scenario,
    pub spec: SpecFile,
    /// `diag` or `neighbor:<ell>`; ignored when `projections` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projections: Option<ProjectionSet>,
    pub n: usize,
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
    #[serde(default)]
    pub centering: CenteringVariant,
    #[serde(default)]
    pub signed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_seconds: Option<f64>,
    #[serde(default)]
    pub keep_raw: bool,
}

impl ExperimentPlan {
    pub fn new(scenario: Scenario, spec: SpecFile, ps: ProjectionSet, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            scenario,
            spec,
            scheme: None,
            projections: Some(ps),
            n,
            reps,
            alpha: default_alpha(),
            seed,
            centering: CenteringVariant::default(),
            signed: false,
            perturbation: None,
            workers: None,
            max_seconds: None,
            keep_raw: false,
        }
    }

    fn resolve(&self) -> Result<(LinearProcessSpec, ProjectionSet)> {
        let spec = LinearProcessSpec::from_file(self.spec.clone())?;
        let ps = match (&self.projections, &self.scheme) {
            (Some(ps), _) => ps.clone(),
            (None, Some(s)) => match s.parse::<Scheme>()? {
                Scheme::Diag => diagonal(spec.d())?,
                Scheme::Neighbor(ell) => neighbor_scheme(spec.d(), ell)?,
                other => {
                    return Err(Error::param(format!(
                        "scheme `{other}` needs external data; give the projections inline"
                    )))
                }
            },
            (None, None) => return Err(Error::param("plan needs either `scheme` or `projections`")),
        };
        if ps.d() != spec.d() {
            return Err(Error::DimensionMismatch {
                expected: spec.d(),
                found: ps.d(),
                context: "projection set against process",
            });
        }
        Ok((spec, ps))
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < MIN_REPS {
            return Err(Error::param(format!("reps must be at least {MIN_REPS}, got {}", self.reps)));
        }
        if self.n < 2 {
            return Err(Error::param(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        let (spec, ps) = self.resolve()?;
        if ps.m() < 2 && self.scenario != Scenario::BetaCalibration {
            return Err(Error::param("the max tests need at least two projection pairs"));
        }
        match (&self.perturbation, self.scenario) {
            (None, Scenario::Power) => return Err(Error::param("power scenario needs a perturbation")),
            (Some(p), _) => p.validate(spec.d())?,
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub count: usize,
    pub total: usize,
    pub rate: f64,
    /// 95% Wilson score interval.
    pub ci: [f64; 2],
}

impl RateEstimate {
    pub fn new(count: usize, total: usize) -> Self {
        let (k, nf) = (count as f64, total as f64);
        let p = k / nf;
        let z2 = WILSON_Z * WILSON_Z;
        let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
        let half = WILSON_Z / (1.0 + z2 / nf) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
        Self {
            count,
            total,
            rate: p,
            ci: [(centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub i: usize,
    pub k: usize,
    pub analytic: f64,
    pub oracle: f64,
    pub se: f64,
    /// `(analytic − oracle) / se`.
    pub z: f64,
    /// Same residual for the literal (as displayed) convention.
    pub z_as_displayed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub entries: Vec<CalibrationEntry>,
    pub max_abs_z: f64,
    pub max_abs_z_as_displayed: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_paper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_classical: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<RateEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<RateEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSummary>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    /// Standardized maximum (absolute or signed, per the plan).
    pub statistic: f64,
    pub normalized: f64,
    pub reject: bool,
    pub covered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub n: usize,
    pub m: usize,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub centering: CenteringVariant,
    pub signed: bool,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<Replication>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

/// Kolmogorov–Smirnov distance `sup_x |F̂_N(x) − F(x)|`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("sample for the KS distance"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max))
}

/// KS distance of the samples to the standard Gumbel law.
pub fn ks_gumbel(samples: &[f64]) -> Result<f64> {
    ks_distance(samples, gumbel_cdf)
}

/// `P(X ≥ k)` for `X ~ Bin(n, p)`.
pub fn binomial_upper_tail(k: usize, n: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    (k..=n)
        .map(|j| (ln_fact[n] - ln_fact[j] - ln_fact[n - j] + j as f64 * p.ln() + (n - j) as f64 * (-p).ln_1p()).exp())
        .sum::<f64>()
        .min(1.0)
}

struct Setup {
    spec: LinearProcessSpec,
    ps: ProjectionSet,
    null_forms: Vec<f64>,
    beta_diag: Vec<f64>,
}

fn replicate(plan: &ExperimentPlan, setup: &Setup, rep: usize) -> Result<(f64, f64, Replication)> {
    let mut rng = exec::replication_rng(plan.seed, rep);
    let mut sample = setup.spec.simulate_with(plan.n, &mut rng);
    if let Some(p) = &plan.perturbation {
        p.apply(&mut sample);
    }
    let hat = projected_sample_forms(&sample, &setup.ps)?;
    let res = standardize(&DeviationResult::from_forms(&hat, &setup.null_forms, plan.n), &setup.beta_diag)?;
    let cal = constants(setup.ps.m(), plan.centering)?.with_alpha(plan.alpha)?;
    let abs = test_abs_max(&res, &cal)?;
    let report = if plan.signed { test_signed_max(&res, &cal)? } else { abs.clone() };
    let intervals = simultaneous_ci(&hat, &setup.beta_diag, &cal, plan.n)?;
    let covered = intervals
        .iter()
        .zip(&setup.null_forms)
        .zip(&setup.beta_diag)
        .all(|((iv, &null), &b)| !iv.excludes(null, plan.n, b));
    // normalized statistic under each centering, for the KS comparison
    let alt = constants(setup.ps.m(), other(plan.centering))?;
    let alt_center = if plan.signed { alt.c_m } else { alt.b_m };
    let alt_norm = (report.statistic - alt_center) / alt.a_m;
    Ok((
        report.normalized,
        alt_norm,
        Replication {
            statistic: report.statistic,
            normalized: report.normalized,
            reject: report.reject,
            covered,
        },
    ))
}

fn other(v: CenteringVariant) -> CenteringVariant {
    match v {
        CenteringVariant::Paper => CenteringVariant::Classical,
        CenteringVariant::Classical => CenteringVariant::Paper,
    }
}

fn run_tests(plan: &ExperimentPlan, spec: LinearProcessSpec, ps: ProjectionSet, start: Instant) -> Result<(Summary, Vec<Replication>)> {
    let null_forms = population_forms(&spec, &ps)?;
    let beta = beta_analytic(&spec, &ps, &Convention::CALIBRATED)?;
    let beta_diag = beta.diag();
    if let Some((j, &b)) = beta_diag.iter().enumerate().find(|(_, b)| !(**b > asymvar::DIAG_FLOOR)) {
        return Err(Error::DegenerateVariance { index: j, value: b });
    }
    let setup = Setup {
        spec,
        ps,
        null_forms,
        beta_diag,
    };
    let limit = plan.max_seconds;
    let out = exec::try_map_indexed(plan.reps, plan.workers, |rep| {
        if let Some(max) = limit {
            if start.elapsed().as_secs_f64() > max {
                return Err(Error::ResourceCap(format!("experiment exceeded {max} s")));
            }
        }
        replicate(plan, &setup, rep)
    })?;
    let own: Vec<f64> = out.iter().map(|o| o.0).collect();
    let alt: Vec<f64> = out.iter().map(|o| o.1).collect();
    let raw: Vec<Replication> = out.into_iter().map(|o| o.2).collect();
    let (ks_own, ks_alt) = (ks_gumbel(&own)?, ks_gumbel(&alt)?);
    let (ks_paper, ks_classical) = match plan.centering {
        CenteringVariant::Paper => (ks_own, ks_alt),
        CenteringVariant::Classical => (ks_alt, ks_own),
    };
    let summary = Summary {
        ks_distance: Some(ks_own),
        ks_paper: Some(ks_paper),
        ks_classical: Some(ks_classical),
        rejection: Some(RateEstimate::new(raw.iter().filter(|r| r.reject).count(), raw.len())),
        coverage: Some(RateEstimate::new(raw.iter().filter(|r| r.covered).count(), raw.len())),
        calibration: None,
    };
    Ok((summary, raw))
}

fn run_calibration(plan: &ExperimentPlan, spec: &LinearProcessSpec, ps: &ProjectionSet) -> Result<Summary> {
    let oracle = mc_oracle(spec, ps, plan.n, plan.reps, plan.seed, plan.workers)?;
    let analytic = beta_analytic(spec, ps, &Convention::CALIBRATED)?;
    let literal = beta_analytic(spec, ps, &Convention::AS_DISPLAYED)?;
    let se = oracle.mc_se.as_ref().expect("oracle reports standard errors");
    let m = ps.m();
    let mut entries = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        for k in i..m {
            let s = se[(i, k)];
            let z = |b: f64| if s > 0.0 { (b - oracle.beta[(i, k)]) / s } else { 0.0 };
            entries.push(CalibrationEntry {
                i,
                k,
                analytic: analytic.beta[(i, k)],
                oracle: oracle.beta[(i, k)],
                se: s,
                z: z(analytic.beta[(i, k)]),
                z_as_displayed: z(literal.beta[(i, k)]),
            });
        }
    }
    let max_abs_z = entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
    let max_abs_z_as_displayed = entries.iter().map(|e| e.z_as_displayed.abs()).fold(0.0, f64::max);
    Ok(Summary {
        calibration: Some(CalibrationSummary {
            entries,
            max_abs_z,
            max_abs_z_as_displayed,
        }),
        ..Summary::default()
    })
}

/// Run a plan. `runtime_seconds` is the only field that varies between runs.
pub fn run(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let start = Instant::now();
    let (spec, ps) = plan.resolve()?;
    let m = ps.m();
    let (summary, raw) = match plan.scenario {
        Scenario::BetaCalibration => (run_calibration(plan, &spec, &ps)?, None),
        _ => {
            let (summary, raw) = run_tests(plan, spec, ps, start)?;
            (summary, plan.keep_raw.then_some(raw))
        }
    };
    if let Some(max) = plan.max_seconds {
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed > max {
            return Err(Error::ResourceCap(format!("experiment took {elapsed:.1} s, cap {max} s")));
        }
    }
    Ok(ExperimentReport {
        scenario: plan.scenario,
        n: plan.n,
        m,
        reps: plan.reps,
        alpha: plan.alpha,
        seed: plan.seed,
        centering: plan.centering,
        signed: plan.signed,
        summary,
        raw,
        runtime_seconds: Some(start.elapsed().as_secs_f64()),
    })
}

/// Raw replication statistics as CSV text.
pub fn raw_csv(report: &ExperimentReport) -> Option<String> {
    let raw = report.raw.as_ref()?;
    let mut out = String::from("rep,statistic,normalized,reject,covered\n");
    for (i, r) in raw.iter().enumerate() {
        out.push_str(&format!("{i},{},{},{},{}\n", r.statistic, r.normalized, r.reject, r.covered));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gumbel;
    use crate::linproc::{InnovationSpec, ProcessFamily};

    fn ar_plan(scenario: Scenario, d: usize, reps: usize) -> ExperimentPlan {
        let spec = SpecFile {
            family: ProcessFamily::ArFamily { d, rho: 0.5 },
            innovations: InnovationSpec::default(),
            tol: None,
        };
        let mut plan = ExperimentPlan::new(scenario, spec, diagonal(d).unwrap(), 300, reps, 11);
        plan.projections = None;
        plan.scheme = Some("diag".into());
        plan
    }

    #[test]
    fn ks_reference_cases() {
        assert_eq!(ks_distance(&[0.0], |x| if x < 0.0 { 0.0 } else { 0.5 }).unwrap(), 0.5);
        let median = gumbel::gumbel_quantile(0.5).unwrap();
        assert!((ks_gumbel(&[median]).unwrap() - 0.5).abs() < 1e-12);
        let n = 500;
        let grid: Vec<f64> = (0..n)
            .map(|i| gumbel::gumbel_quantile(1.0 - (i as f64 + 0.5) / n as f64).unwrap())
            .collect();
        assert!(ks_gumbel(&grid).unwrap() <= 1.0 / n as f64 + 1e-12);
        assert!(ks_gumbel(&[]).is_err());
    }

    #[test]
    fn ks_exact_draws() {
        use rand::Rng;
        let mut rng = exec::replication_rng(4, 0);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| -(-(rng.random::<f64>()).ln()).ln())
            .collect();
        let d = ks_gumbel(&draws).unwrap();
        assert!(d < 0.02, "{d}");
    }

    #[test]
    fn wilson_contains_rate() {
        for (k, n) in [(0, 100), (3, 100), (50, 100), (100, 100), (7, 2000)] {
            let r = RateEstimate::new(k, n);
            assert!(r.ci[0] <= r.rate && r.rate <= r.ci[1]);
            assert!(r.ci[0] >= 0.0 && r.ci[1] <= 1.0);
        }
    }

    #[test]
    fn binomial_tail() {
        assert_eq!(binomial_upper_tail(0, 10, 0.3), 1.0);
        assert!((binomial_upper_tail(1, 1, 0.3) - 0.3).abs() < 1e-15);
        // P(X ≥ 2) for Bin(3, 1/2) = 4/8
        assert!((binomial_upper_tail(2, 3, 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn plan_validation() {
        let mut plan = ar_plan(Scenario::Size, 3, 50);
        assert!(run(&plan).is_err());
        plan.reps = 100;
        plan.scenario = Scenario::Power;
        assert!(run(&plan).is_err());
        plan.perturbation = Some(Perturbation::VarianceInflation { coordinate: 3, factor: 2.0 });
        assert!(matches!(run(&plan), Err(Error::IndexOutOfRange { .. })));
        plan.scheme = Some("entries:x.json".into());
        assert!(plan.validate().is_err());
    }

    #[test]
    fn deterministic_across_workers() {
        let mut plan = ar_plan(Scenario::Size, 4, 120);
        plan.keep_raw = true;
        let reports: Vec<_> = [1, 2, 8]
            .into_iter()
            .map(|w| {
                plan.workers = Some(w);
                let mut r = run(&plan).unwrap();
                r.runtime_seconds = None;
                serde_json::to_string(&r).unwrap()
            })
            .collect();
        assert_eq!(reports[0], reports[1]);
        assert_eq!(reports[0], reports[2]);
    }

    #[test]
    fn coverage_matches_rejection() {
        let mut plan = ar_plan(Scenario::Coverage, 4, 200);
        plan.alpha = 0.3;
        let r = run(&plan).unwrap();
        let rej = r.summary.rejection.unwrap();
        let cov = r.summary.coverage.unwrap();
        assert_eq!(rej.count + cov.count, plan.reps);
    }

    #[test]
    fn plan_json_round_trip() {
        let mut plan = ar_plan(Scenario::Power, 4, 100);
        plan.perturbation = Some(Perturbation::CovarianceShift { source: 0, target: 1, theta: 0.5 });
        let text = serde_json::to_string(&plan).unwrap();
        let back: ExperimentPlan = serde_json::from_str(&text).unwrap();
        assert_eq!(back, plan);
    }
}
