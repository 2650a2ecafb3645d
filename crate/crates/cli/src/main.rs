use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use covmax::asymvar::{self, beta_analytic, beta_bartlett, mc_oracle, AsymCovMatrix, Convention};
use covmax::covstat::{acf_max_deviation, deviations, projected_sample_forms, standardize, DeviationResult};
use covmax::gumbel::{constants, simultaneous_ci, test_abs_max, test_signed_max, CenteringVariant, TestReport};
use covmax::linproc::{LinearProcessSpec, SpecFile, TimeSeriesSample};
use covmax::mcharness::{self, ExperimentPlan};
use covmax::portfolio::{lmvp_weights, mvp_closed_form, risk_class_groups, OneFactorModel};
use covmax::projections::{diagonal, entry_selection, group_decompose, neighbor_scheme, ProjectionSet, Scheme};
use covmax::Error;

#[derive(Parser)]
#[command(name = "covmax", version, about = "Max-type deviation tests for projected sample covariances")]
struct Cli {
    /// Omit the `meta` block (timestamps, runtimes) from JSON output.
    #[arg(long, global = true)]
    no_meta: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a sample from a process spec and write it as CSV.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Asymptotic covariance matrix of the projected deviations.
    Variance(VarianceArgs),
    /// Max-deviation test of a sample against a hypothesized covariance.
    Test(TestArgs),
    /// Max-deviation test of sample autocovariances of a univariate series.
    AcfTest {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        gamma0: PathBuf,
        #[arg(long)]
        maxlag: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Centering::Classical)]
        centering: Centering,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimum-variance and long-only minimum-variance portfolios.
    Portfolio {
        #[arg(long)]
        model: PathBuf,
        /// Emit risk-class group projections for `g` groups.
        #[arg(long)]
        groups: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment plan.
    Mc {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Write per-replication statistics as CSV.
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Analytic,
    Bartlett,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum Centering {
    Paper,
    Classical,
}

impl From<Centering> for CenteringVariant {
    fn from(c: Centering) -> Self {
        match c {
            Centering::Paper => CenteringVariant::Paper,
            Centering::Classical => CenteringVariant::Classical,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Calibrated,
    AsDisplayed,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Calibrated => Convention::CALIBRATED,
            ConventionArg::AsDisplayed => Convention::AS_DISPLAYED,
        }
    }
}

#[derive(Args)]
struct ProjectionArgs {
    /// Projection set JSON.
    #[arg(long, conflicts_with = "scheme")]
    proj: Option<PathBuf>,
    /// `diag`, `neighbor:<ell>`, `entries:<file>` or `groups:<g>` (needs --model).
    #[arg(long)]
    scheme: Option<String>,
    /// One-factor model used by `groups:<g>`.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct VarianceArgs {
    #[arg(long, value_enum)]
    source: Source,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    sample: Option<PathBuf>,
    #[command(flatten)]
    projections: ProjectionArgs,
    #[arg(long, value_enum, default_value_t = ConventionArg::Calibrated)]
    convention: ConventionArg,
    #[arg(long)]
    bandwidth: Option<usize>,
    /// Sample length per oracle replication.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    /// Add the decay certificate and Berman diagnostic.
    #[arg(long)]
    diagnostics: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    sample: PathBuf,
    /// Hypothesized covariance matrix as CSV rows.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    sigma0: Option<PathBuf>,
    /// Process spec whose population covariance is the null.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    projections: ProjectionArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    signed: bool,
    #[arg(long, value_enum, default_value_t = Centering::Classical)]
    centering: Centering,
    /// Variance source; defaults to analytic with --spec and bartlett otherwise.
    #[arg(long, value_enum)]
    variance: Option<Source>,
    #[arg(long)]
    bandwidth: Option<usize>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::IndexOutOfRange { .. }
            | Error::EmptyInput(_)
            | Error::SampleTooShort { .. }
            | Error::MissingStandardization => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| validation(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| validation(format!("{}: {e}", path.display())))
}

/// Numeric CSV rows with an optional header line.
fn read_table(path: &Path) -> CliResult<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| validation(format!("{}: line {line}: {e}", path.display())))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => {
                if let Some(first) = rows.first() {
                    if values.len() != first.len() {
                        return Err(validation(format!(
                            "{}: line {line}: expected {} fields, found {}",
                            path.display(),
                            first.len(),
                            values.len()
                        )));
                    }
                }
                rows.push(values);
            }
            Err(_) if line == 1 => header = Some(record.iter().map(String::from).collect()),
            Err(_) => return Err(validation(format!("{}: line {line}: non-numeric field", path.display()))),
        }
    }
    if let (Some(h), Some(first)) = (&header, rows.first()) {
        if h.len() != first.len() {
            return Err(validation(format!(
                "{}: line 2: expected {} fields, found {}",
                path.display(),
                h.len(),
                first.len()
            )));
        }
    }
    if rows.is_empty() {
        return Err(validation(format!("{}: no data rows", path.display())));
    }
    Ok((header, rows))
}

fn read_sample(path: &Path) -> CliResult<TimeSeriesSample> {
    let (header, mut rows) = read_table(path)?;
    if header.as_ref().and_then(|h| h.first()).is_some_and(|h| h == "t") {
        for r in rows.iter_mut() {
            r.remove(0);
        }
    }
    Ok(TimeSeriesSample::from_rows(rows)?)
}

fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let (_, rows) = read_table(path)?;
    covmax::matrix_serde::from_rows(&rows).map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let (header, rows) = read_table(path)?;
    let col = if header.as_ref().and_then(|h| h.first()).is_some_and(|h| h == "t") { 1 } else { 0 };
    if rows[0].len() != col + 1 {
        return Err(validation(format!("{}: expected a single data column", path.display())));
    }
    Ok(rows.into_iter().map(|r| r[col]).collect())
}

fn load_spec(path: &Path) -> CliResult<LinearProcessSpec> {
    let file: SpecFile = read_json(path)?;
    Ok(LinearProcessSpec::from_file(file)?)
}

fn resolve_projections(args: &ProjectionArgs, d: usize) -> CliResult<ProjectionSet> {
    if let Some(path) = &args.proj {
        let ps: ProjectionSet = read_json(path)?;
        if ps.d() != d {
            return Err(validation(format!("{}: projections have dimension {}, data has {d}", path.display(), ps.d())));
        }
        return Ok(ps);
    }
    let scheme: Scheme = args
        .scheme
        .as_deref()
        .ok_or_else(|| validation("either --proj or --scheme is required"))?
        .parse()?;
    Ok(match scheme {
        Scheme::Diag => diagonal(d)?,
        Scheme::Neighbor(ell) => neighbor_scheme(d, ell)?,
        Scheme::Entries(file) => {
            let pairs: Vec<(usize, usize)> = read_json(Path::new(&file))?;
            entry_selection(&pairs, d)?
        }
        Scheme::Groups(g) => {
            let path = args.model.as_ref().ok_or_else(|| validation("scheme groups:<g> needs --model"))?;
            let model: OneFactorModel = read_json(path)?;
            model.validate()?;
            if model.d() != d {
                return Err(validation(format!("{}: model has {} assets, data has {d}", path.display(), model.d())));
            }
            group_decompose(&lmvp_weights(&model)?.w, &model.idio, g)?
        }
    })
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(validation(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn with_meta<T: Serialize>(value: &T, no_meta: bool, command: &str) -> CliResult<Value> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    if !no_meta {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        if let Value::Object(map) = &mut v {
            map.insert(
                "meta".into(),
                json!({"command": command, "version": env!("CARGO_PKG_VERSION"), "generated_unix": now}),
            );
        }
    }
    Ok(v)
}

fn emit(value: &Value, out: Option<&Path>, print: bool) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))? + "\n";
    if let Some(path) = out {
        fs::write(path, &text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    if print {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn simulate(spec: &Path, n: usize, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let spec = load_spec(spec)?;
    let sample = spec.simulate(n, seed)?;
    let mut text = String::from("t");
    for nu in 1..=sample.d() {
        text.push_str(&format!(",y{nu}"));
    }
    text.push('\n');
    for (t, row) in sample.rows().enumerate() {
        text.push_str(&(t + 1).to_string());
        for x in row {
            text.push_str(&format!(",{x:?}"));
        }
        text.push('\n');
    }
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
            println!("wrote {} observations of dimension {} to {}", sample.n(), sample.d(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct VarianceReport {
    m: usize,
    labels: Vec<String>,
    #[serde(flatten)]
    beta: AsymCovMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    berman: Option<asymvar::BermanDiagnostic>,
}

fn variance(args: &VarianceArgs, no_meta: bool) -> CliResult<()> {
    let conv: Convention = args.convention.into();
    let (beta, ps) = match args.source {
        Source::Analytic | Source::Oracle => {
            let spec = load_spec(args.spec.as_ref().ok_or_else(|| validation("--spec is required for this source"))?)?;
            let ps = resolve_projections(&args.projections, spec.d())?;
            let beta = if matches!(args.source, Source::Analytic) {
                beta_analytic(&spec, &ps, &conv)?
            } else {
                mc_oracle(&spec, &ps, args.n, args.reps, args.seed, args.workers)?
            };
            (beta, ps)
        }
        Source::Bartlett => {
            let sample = read_sample(args.sample.as_ref().ok_or_else(|| validation("--sample is required for bartlett"))?)?;
            let ps = resolve_projections(&args.projections, sample.d())?;
            (beta_bartlett(&sample, &ps, args.bandwidth)?, ps)
        }
    };
    let (certificate, berman) = if args.diagnostics {
        let cert = match asymvar::decay_certificate(&beta) {
            Ok(c) => json!({"c": c.c, "rho": c.rho, "covers": c.covers(&beta.beta, 1e-9)}),
            Err(e) => json!({"error": e.to_string()}),
        };
        (Some(cert), Some(asymvar::berman_diagnostic(&beta)))
    } else {
        (None, None)
    };
    let report = VarianceReport {
        m: ps.m(),
        labels: ps.labels().into_iter().map(String::from).collect(),
        beta,
        certificate,
        berman,
    };
    let value = with_meta(&report, no_meta, "variance")?;
    emit(&value, args.out.as_deref(), args.out.is_none())?;
    if args.out.is_some() {
        println!("variance matrix for {} pairs written", report.m);
    }
    Ok(())
}

#[derive(Serialize)]
struct TestOutput {
    labels: Vec<String>,
    deviations: DeviationResult,
    variance_source: &'static str,
    report: TestReport,
}

fn verdict(r: &TestReport, labels: &[String]) -> String {
    format!(
        "{} test over m = {} pairs, n = {}: statistic {:.4} (pair {}), normalized {:.4}, p-value {:.4e} -> {} at alpha = {}{}",
        match r.kind {
            covmax::gumbel::TestKind::AbsMax => "abs-max",
            covmax::gumbel::TestKind::SignedMax => "signed-max",
        },
        r.m,
        r.n,
        r.statistic,
        labels.get(r.argmax).map_or("?", String::as_str),
        r.normalized,
        r.p_value,
        if r.reject { "REJECT" } else { "do not reject" },
        r.alpha,
        if r.growth_check.holds { "" } else { "\nnote: m is large relative to n^(1/6); the Gumbel approximation may be rough" }
    )
}

fn test(args: &TestArgs, no_meta: bool) -> CliResult<()> {
    check_alpha(args.alpha)?;
    let sample = read_sample(&args.sample)?;
    let ps = resolve_projections(&args.projections, sample.d())?;
    let spec = args.spec.as_deref().map(load_spec).transpose()?;
    let null_cov = match (&spec, &args.sigma0) {
        (Some(spec), _) => spec.population_covariance(),
        (None, Some(path)) => read_matrix(path)?,
        (None, None) => return Err(validation("either --sigma0 or --spec is required")),
    };
    if null_cov.nrows() != sample.d() || null_cov.ncols() != sample.d() {
        return Err(validation(format!(
            "null covariance is {}x{}, sample dimension is {}",
            null_cov.nrows(),
            null_cov.ncols(),
            sample.d()
        )));
    }
    let source = args.variance.unwrap_or(if spec.is_some() { Source::Analytic } else { Source::Bartlett });
    let (beta, source_name) = match (source, &spec) {
        (Source::Analytic, Some(spec)) => (beta_analytic(spec, &ps, &Convention::CALIBRATED)?, "analytic"),
        (Source::Analytic | Source::Oracle, None) => return Err(validation("analytic and oracle variances need --spec")),
        (Source::Oracle, Some(spec)) => (mc_oracle(spec, &ps, sample.n(), 1000, 0, None)?, "oracle"),
        (Source::Bartlett, _) => (beta_bartlett(&sample, &ps, args.bandwidth)?, "bartlett"),
    };
    let (diag, floored) = beta.standardization_diag();
    if !floored.is_empty() {
        eprintln!("warning: variances of pairs {floored:?} were floored at {}", asymvar::DIAG_FLOOR);
    }
    let res = standardize(&deviations(&sample, &null_cov, &ps)?, &diag)?;
    let cal = constants(ps.m(), args.centering.into())?.with_alpha(args.alpha)?;
    let mut report = if args.signed { test_signed_max(&res, &cal)? } else { test_abs_max(&res, &cal)? };
    if !args.signed {
        report.ci = Some(simultaneous_ci(&projected_sample_forms(&sample, &ps)?, &diag, &cal, sample.n())?);
    }
    let labels: Vec<String> = ps.labels().into_iter().map(String::from).collect();
    let line = verdict(&report, &labels);
    let out = TestOutput {
        labels,
        deviations: res,
        variance_source: source_name,
        report,
    };
    let value = with_meta(&out, no_meta, "test")?;
    emit(&value, args.out.as_deref(), args.json)?;
    if !args.json {
        println!("{line}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn acf_test(
    series: &Path,
    gamma0: &Path,
    maxlag: usize,
    alpha: f64,
    centering: Centering,
    json_out: bool,
    out: Option<&Path>,
    no_meta: bool,
) -> CliResult<()> {
    check_alpha(alpha)?;
    if maxlag == 0 {
        return Err(validation("--maxlag must be at least 1"));
    }
    let z = read_vector(series)?;
    let g0 = read_vector(gamma0)?;
    let acf = acf_max_deviation(&z, &g0, maxlag)?;
    // lag-embedded sample (Z_t, Z_{t−1}, …, Z_{t−L}) for the long-run variances
    let rows: Vec<Vec<f64>> = (maxlag..z.len()).map(|t| (0..=maxlag).map(|h| z[t - h]).collect()).collect();
    let embedded = TimeSeriesSample::from_rows(rows)?;
    let pairs: Vec<(usize, usize)> = (0..=maxlag).map(|h| (0, h)).collect();
    let ps = entry_selection(&pairs, maxlag + 1)?;
    let beta = beta_bartlett(&embedded, &ps, None)?;
    let (diag, _) = beta.standardization_diag();
    let raw = DeviationResult::from_forms(&acf.gamma_hat, &acf.gamma0, z.len());
    let res = standardize(&raw, &diag)?;
    let cal = constants(ps.m(), centering.into())?.with_alpha(alpha)?;
    let report = test_abs_max(&res, &cal)?;
    let labels: Vec<String> = (0..=maxlag).map(|h| format!("lag_{h}")).collect();
    let line = verdict(&report, &labels);
    let value = with_meta(
        &json!({"acf": acf, "deviations": res, "variance_source": "bartlett", "report": report}),
        no_meta,
        "acf-test",
    )?;
    emit(&value, out, json_out)?;
    if !json_out {
        println!("{line}");
    }
    Ok(())
}

fn portfolio(model: &Path, groups: Option<usize>, delta: f64, rho: f64, out: Option<&Path>, no_meta: bool) -> CliResult<()> {
    let model: OneFactorModel = read_json(model)?;
    model.validate()?;
    let mvp = mvp_closed_form(&model)?;
    let lmvp = lmvp_weights(&model)?;
    let mut value = json!({
        "mvp": mvp,
        "lmvp": lmvp,
        "mvp_variance": mvp.variance(&model),
        "lmvp_variance": lmvp.variance(&model),
    });
    if let Some(g) = groups {
        let (ps, restriction) = risk_class_groups(&model, &lmvp, g, delta, rho)?;
        value["projections"] = serde_json::to_value(&ps).map_err(|e| CliError::Runtime(e.to_string()))?;
        value["order_restriction"] = serde_json::to_value(&restriction).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let value = with_meta(&value, no_meta, "portfolio")?;
    emit(&value, out, out.is_none())?;
    if out.is_some() {
        println!(
            "long-only portfolio holds {} of {} assets (threshold beta {})",
            lmvp.active_set.len(),
            model.d(),
            lmvp.threshold_beta.map_or("infinite".into(), |b| format!("{b:.6}"))
        );
    }
    Ok(())
}

fn mc(plan: &Path, workers: Option<usize>, raw: Option<&Path>, out: Option<&Path>, no_meta: bool) -> CliResult<()> {
    let mut plan: ExperimentPlan = read_json(plan)?;
    if workers.is_some() {
        plan.workers = workers;
    }
    if raw.is_some() {
        plan.keep_raw = true;
    }
    plan.validate()?;
    let mut report = mcharness::run(&plan)?;
    if let (Some(path), Some(text)) = (raw, mcharness::raw_csv(&report)) {
        fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    if no_meta {
        report.runtime_seconds = None;
    }
    let value = with_meta(&report, no_meta, "mc")?;
    emit(&value, out, out.is_none())?;
    if out.is_some() {
        println!("{:?} experiment with {} replications finished", report.scenario, report.reps);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let no_meta = cli.no_meta;
    match cli.command {
        Command::Simulate { spec, n, seed, out } => simulate(&spec, n, seed, out.as_deref()),
        Command::Variance(args) => variance(&args, no_meta),
        Command::Test(args) => test(&args, no_meta),
        Command::AcfTest {
            series,
            gamma0,
            maxlag,
            alpha,
            centering,
            json,
            out,
        } => acf_test(&series, &gamma0, maxlag, alpha, centering, json, out.as_deref(), no_meta),
        Command::Portfolio {
            model,
            groups,
            delta,
            rho,
            out,
        } => portfolio(&model, groups, delta, rho, out.as_deref(), no_meta),
        Command::Mc { plan, workers, raw, out } => mc(&plan, workers, raw.as_deref(), out.as_deref(), no_meta),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
