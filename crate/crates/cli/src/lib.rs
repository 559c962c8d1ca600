//! Argument parsing, orchestration and report rendering for the
//! `counterfactual` binary.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use counterfactual::counterfactual::EffectKind;
use counterfactual::inference::{EffectInference, InferenceOptions, Scheme};
use counterfactual::regress::CensoringOptions;
use counterfactual::{infer, AnalysisRequest, ColumnRoles, Error, FitOptions, InferenceReport, Method, Mode};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "COUNTERFACTUAL_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "counterfactual",
    version,
    about = "Counterfactual distributions and quantile effects with bootstrap inference"
)]
struct Args {
    /// CSV file with a header row
    #[arg(long)]
    input: PathBuf,
    /// Outcome column
    #[arg(long)]
    outcome: String,
    /// Covariate columns (comma separated; the intercept is added)
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Observation weight column
    #[arg(long)]
    weights: Option<String>,
    /// Binary column defining the reference (0) and counterfactual (1) groups
    #[arg(long)]
    group: Option<String>,
    /// Also fit group 1 and report the structure effect
    #[arg(long)]
    treatment: bool,
    /// Report structure, composition and total effects (implies --treatment)
    #[arg(long)]
    decomposition: bool,
    /// Counterfactual covariates are a transformation of the same units
    #[arg(long)]
    transformation: bool,
    /// Counterfactual covariate columns, one per covariate in the same order
    #[arg(long, value_delimiter = ',')]
    counterfactual_vars: Vec<String>,
    /// Quantile indexes at which effects are reported
    #[arg(long, value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
    /// qr, loc, locsca, cqr, cox, logit, probit or lpm
    #[arg(long, default_value = "qr")]
    method: String,
    /// Tail trimming of the quantile-regression grid
    #[arg(long, default_value_t = 0.005)]
    trimming: f64,
    /// Number of regressions approximating the conditional distribution
    #[arg(long, default_value_t = 100)]
    nreg: usize,
    /// Scale covariates of the location-scale model
    #[arg(long, value_delimiter = ',')]
    scale_vars: Vec<String>,
    /// Counterfactual scale covariates of the location-scale model
    #[arg(long, value_delimiter = ',')]
    counterfactual_scale_vars: Vec<String>,
    /// Censoring indicator column (1 = censored), for cqr
    #[arg(long)]
    censoring: Option<String>,
    /// The censoring indicator marks right-censored outcomes
    #[arg(long)]
    right: bool,
    #[arg(long, default_value_t = 3)]
    nsteps: usize,
    #[arg(long, default_value_t = 0.1)]
    firstc: f64,
    #[arg(long, default_value_t = 0.05)]
    secondc: f64,
    /// Point estimates only
    #[arg(long)]
    noboot: bool,
    /// Exponential-multiplier bootstrap instead of resampling
    #[arg(long)]
    weightedboot: bool,
    #[arg(long, default_value_t = 8)]
    seed: u64,
    /// Interquartile-range standard errors
    #[arg(long)]
    robust: bool,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Lower end of the quantile range used by bands and tests
    #[arg(long, default_value_t = 0.1)]
    first: f64,
    /// Upper end of the quantile range used by bands and tests
    #[arg(long, default_value_t = 0.9)]
    last: f64,
    /// Constants c tested as QE(tau) = c (0 is always tested)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    cons_test: Vec<f64>,
    /// Do not print the effect and test tables
    #[arg(long)]
    no_printdeco: bool,
    /// Run bootstrap replications on several threads
    #[arg(long)]
    parallel: bool,
    /// Worker threads (implies --parallel; default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for curves.csv, tests.csv and report.txt
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub roles: ColumnRoles,
    pub method: Method,
    pub quantiles: Vec<f64>,
    pub treatment: bool,
    pub decomposition: bool,
    pub transformation: bool,
    pub trimming: f64,
    pub nreg: usize,
    pub right: bool,
    pub nsteps: usize,
    pub firstc: f64,
    pub secondc: f64,
    pub noboot: bool,
    pub weightedboot: bool,
    pub seed: u64,
    pub robust: bool,
    pub reps: usize,
    pub alpha: f64,
    pub first: f64,
    pub last: f64,
    pub cons_test: Vec<f64>,
    pub printdeco: bool,
    pub parallel: bool,
    pub workers: usize,
    pub output_dir: PathBuf,
    /// Adjustments made while validating the flags.
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn mode(&self) -> Mode {
        if self.roles.group.is_some() {
            Mode::Group {
                treatment: self.treatment,
                decomposition: self.decomposition,
            }
        } else {
            Mode::Counterfactual {
                transformation: self.transformation,
            }
        }
    }

    pub fn request(&self) -> AnalysisRequest<f64> {
        AnalysisRequest {
            mode: self.mode(),
            method: self.method,
            quantiles: self.quantiles.clone(),
            options: FitOptions {
                trimming: self.trimming,
                nreg: self.nreg,
                censoring: CensoringOptions {
                    right: self.right,
                    nsteps: self.nsteps,
                    firstc: self.firstc,
                    secondc: self.secondc,
                },
            },
        }
    }

    pub fn inference_options(&self) -> InferenceOptions<f64> {
        InferenceOptions {
            bootstrap: counterfactual::BootstrapOptions {
                scheme: if self.weightedboot {
                    Scheme::Weighted
                } else {
                    Scheme::Empirical
                },
                reps: self.reps,
                seed: self.seed,
                workers: self.workers,
                unit_multipliers: false,
            },
            noboot: self.noboot,
            robust: self.robust,
            alpha: self.alpha,
            first: self.first,
            last: self.last,
            cons_test: self.cons_test.clone(),
        }
    }
}

#[derive(Debug)]
pub enum ParseError {
    /// Help, version or a malformed command line.
    Usage(clap::Error),
    Invalid(String),
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseError::Usage(e) => write!(f, "{e}"),
            ParseError::Invalid(m) => write!(f, "error [cli]: {m}"),
        }
    }
}

impl std::error::Error for ParseError {}

pub fn parse_args<I, S>(argv: I) -> Result<RunConfig, ParseError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let a = Args::try_parse_from(argv).map_err(ParseError::Usage)?;
    let invalid = |m: String| Err(ParseError::Invalid(m));
    let method: Method = a.method.parse().map_err(|e: Error| ParseError::Invalid(e.to_string()))?;
    let mut warnings = Vec::new();

    let mut treatment = a.treatment;
    if a.decomposition && !treatment {
        treatment = true;
        warnings.push("--decomposition requires --treatment; treatment enabled".to_string());
    }
    match (&a.group, a.counterfactual_vars.is_empty()) {
        (Some(_), false) => return invalid("--group and --counterfactual-vars are mutually exclusive".into()),
        (None, true) => return invalid("give either --group or --counterfactual-vars".into()),
        _ => {}
    }
    if a.group.is_none() && (treatment || a.decomposition) {
        return invalid("--treatment and --decomposition need --group".into());
    }
    if a.transformation && a.counterfactual_vars.is_empty() {
        return invalid("--transformation needs --counterfactual-vars".into());
    }
    if !a.counterfactual_vars.is_empty() && a.counterfactual_vars.len() != a.covariates.len() {
        return invalid(format!(
            "--counterfactual-vars must name exactly as many columns as --covariates ({} vs {})",
            a.counterfactual_vars.len(),
            a.covariates.len()
        ));
    }
    let quantiles = a.quantiles.unwrap_or_else(|| (1..=9).map(|k| k as f64 / 10.0).collect());
    if quantiles.is_empty() || quantiles.iter().any(|&t| t.is_nan() || t <= 0.0 || t >= 1.0) {
        return invalid("--quantiles must lie in (0, 1)".into());
    }
    if quantiles.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("--quantiles must be strictly increasing".into());
    }
    if !(a.first > 0.0 && a.first < a.last && a.last < 1.0) {
        return invalid(format!("need 0 < first < last < 1, got first = {}, last = {}", a.first, a.last));
    }
    if a.reps == 0 {
        return invalid("--reps must be at least 1".into());
    }
    if !a.noboot && a.reps < 2 {
        return invalid("bootstrap standard errors need --reps of at least 2".into());
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return invalid("--alpha must lie in (0, 1)".into());
    }
    if !(a.trimming > 0.0 && a.trimming < 0.5) {
        return invalid("--trimming must lie in (0, 0.5)".into());
    }
    if a.nreg == 0 {
        return invalid("--nreg must be at least 1".into());
    }
    if a.censoring.is_some() != (method == Method::Cqr) {
        return invalid("--censoring is required by cqr and used by no other method".into());
    }
    if method != Method::Locsca && !(a.scale_vars.is_empty() && a.counterfactual_scale_vars.is_empty()) {
        return invalid("scale variables are only used by --method locsca".into());
    }
    if a.nsteps < 3 {
        return invalid("--nsteps must be at least 3".into());
    }
    for (name, v) in [("firstc", a.firstc), ("secondc", a.secondc)] {
        if !(0.0..1.0).contains(&v) {
            return invalid(format!("--{name} must lie in [0, 1)"));
        }
    }
    let parallel = a.parallel || a.workers.is_some();
    let workers = match a.workers {
        Some(0) => return invalid("--workers must be at least 1".into()),
        Some(n) => n,
        None if parallel => std::thread::available_parallelism().map_or(1, |n| n.get()),
        None => 1,
    };
    let mut cons_test = a.cons_test;
    if cons_test.is_empty() {
        cons_test.push(0.0);
    }

    Ok(RunConfig {
        input: a.input,
        roles: ColumnRoles {
            outcome: a.outcome,
            covariates: a.covariates,
            weight: a.weights,
            group: a.group,
            censoring: a.censoring,
            counterfactual: a.counterfactual_vars,
            scale: a.scale_vars,
            counterfactual_scale: a.counterfactual_scale_vars,
        },
        method,
        quantiles,
        treatment,
        decomposition: a.decomposition,
        transformation: a.transformation,
        trimming: a.trimming,
        nreg: a.nreg,
        right: a.right,
        nsteps: a.nsteps,
        firstc: a.firstc,
        secondc: a.secondc,
        noboot: a.noboot,
        weightedboot: a.weightedboot,
        seed: a.seed,
        robust: a.robust,
        reps: a.reps,
        alpha: a.alpha,
        first: a.first,
        last: a.last,
        cons_test,
        printdeco: !a.no_printdeco,
        parallel,
        workers,
        output_dir: a.output_dir,
        warnings,
    })
}

/// A pipeline failure, tagged with the stage it came from.
#[derive(Debug)]
pub struct RunError {
    pub module: &'static str,
    pub message: String,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error [{}]: {}", self.module, self.message)
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        Self {
            module: e.module(),
            message: e.to_string(),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> RunError {
    RunError {
        module: "cli",
        message: format!("cannot write {}: {e}", path.display()),
    }
}

/// What a successful run produced.
#[derive(Debug)]
pub struct RunOutput {
    pub report: InferenceReport,
    pub text: String,
    pub curves_path: PathBuf,
    pub tests_path: PathBuf,
    pub report_path: PathBuf,
}

/// Loads the data, runs the analysis, prints the report to `out` and writes
/// `curves.csv`, `tests.csv` and `report.txt` into the output directory.
pub fn run(config: &RunConfig, out: &mut dyn Write) -> Result<RunOutput, RunError> {
    let table = counterfactual::load_csv::<f64>(&config.input, &config.roles)?;
    let report = infer(&config.request(), &table, &config.inference_options())?;
    let text = render_report(config, &report);
    out.write_all(text.as_bytes()).map_err(|e| io_error(Path::new("<stdout>"), e))?;

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let curves_path = dir.join("curves.csv");
    let tests_path = dir.join("tests.csv");
    let report_path = dir.join("report.txt");
    fs::write(&curves_path, curves_csv(&report)).map_err(|e| io_error(&curves_path, e))?;
    fs::write(&tests_path, tests_csv(&report)).map_err(|e| io_error(&tests_path, e))?;
    fs::write(&report_path, &text).map_err(|e| io_error(&report_path, e))?;
    Ok(RunOutput {
        report,
        text,
        curves_path,
        tests_path,
        report_path,
    })
}

/// Formats `x` with 5 significant digits, dropping trailing zeros.
pub fn sig5(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (4 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn centered(text: &str, width: usize) -> String {
    let pad = width.saturating_sub(text.len());
    format!("{}{}", " ".repeat(pad / 2), text)
}

/// Width of the effect tables: the quantile column plus six value columns.
const EFFECT_WIDTH: usize = 9 + 6 * 12;
/// Width of the test table: the label plus two p-value columns.
const TEST_WIDTH: usize = 54 + 2 * 8;

pub fn render_report(config: &RunConfig, report: &InferenceReport) -> String {
    let est = &report.estimate;
    let mut s = String::new();
    let _ = writeln!(s, "Conditional Model:                      {}", config.method.description());
    let _ = writeln!(s, "Number of regressions estimated:         {}", est.regressions);
    let _ = writeln!(s);
    if config.noboot {
        let _ = writeln!(s, "No bootstrap: standard errors, bands and tests were not computed.");
    } else {
        let scheme = if config.weightedboot { "weighted" } else { "empirical" };
        let _ = writeln!(
            s,
            "The variance has been estimated by bootstrapping the results {} times ({scheme} bootstrap, seed {}).",
            config.reps, config.seed
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "No. of obs. in the reference group:      {}", est.reference_size);
    let _ = writeln!(s, "No. of obs. in the counterfactual group: {}", est.counterfactual_size);
    let _ = writeln!(s);

    if config.printdeco {
        let level = format!("{}%", sig5(100.0 * (1.0 - config.alpha)));
        for (slot, effect) in est.effects.iter().enumerate() {
            let inf = report.inference.as_ref().map(|v| &v[slot]);
            let _ = writeln!(s);
            let _ = writeln!(s, "{}", centered(&format!("Quantile Effects -- {}", effect.curve.kind), EFFECT_WIDTH));
            let _ = writeln!(s, "{}", "-".repeat(EFFECT_WIDTH));
            let _ = writeln!(
                s,
                "{:>9} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
                "", "", "Pointwise", "Pointwise", "Pointwise", "Functional", "Functional"
            );
            let _ = writeln!(
                s,
                "{:>9} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
                "Quantile",
                "Est.",
                "Std.Err",
                format!("{level} lo"),
                format!("{level} hi"),
                format!("{level} lo"),
                format!("{level} hi")
            );
            for (k, (&tau, &d)) in effect.curve.taus.iter().zip(&effect.curve.delta).enumerate() {
                let cells: [String; 5] = match inf {
                    Some(i) => [
                        sig5(i.dispersion.sigma[k]),
                        sig5(i.bands.pointwise[k].0),
                        sig5(i.bands.pointwise[k].1),
                        sig5(i.bands.uniform[k].0),
                        sig5(i.bands.uniform[k].1),
                    ],
                    None => std::array::from_fn(|_| "--".to_string()),
                };
                let _ = writeln!(
                    s,
                    "{:>9} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
                    sig5(tau),
                    sig5(d),
                    cells[0],
                    cells[1],
                    cells[2],
                    cells[3],
                    cells[4]
                );
            }
            if let Some(i) = inf {
                render_tests(&mut s, i);
            }
        }
    }

    let notes = notes(config, report);
    if !notes.is_empty() {
        let _ = writeln!(s);
        for n in notes {
            let _ = writeln!(s, "Note: {n}");
        }
    }
    s
}

fn render_tests(s: &mut String, inf: &EffectInference<f64>) {
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{}",
        centered("Bootstrap inference on the counterfactual quantile process", TEST_WIDTH)
    );
    let _ = writeln!(s, "{}", "-".repeat(TEST_WIDTH));
    let _ = writeln!(s, "{:<54}{:>16}", "", "P-values");
    let _ = writeln!(s, "{:<54}{:>8}{:>8}", "Null hypothesis", "KS", "CMS");
    let _ = writeln!(s, "{}", "=".repeat(TEST_WIDTH));
    for t in &inf.tests {
        let _ = writeln!(
            s,
            "{:<54}{:>8}{:>8}",
            t.null.label(),
            sig5(t.ks_pvalue),
            sig5(t.cms_pvalue)
        );
    }
}

fn notes(config: &RunConfig, report: &InferenceReport) -> Vec<String> {
    let mut out = config.warnings.clone();
    for e in &report.estimate.effects {
        let sat: Vec<String> = e
            .curve
            .taus
            .iter()
            .zip(&e.curve.saturated)
            .filter(|p| *p.1)
            .map(|p| sig5(*p.0))
            .collect();
        if !sat.is_empty() {
            out.push(format!(
                "{} effect: quantile at tau = {} saturated at the largest threshold",
                e.curve.kind,
                sat.join(", ")
            ));
        }
    }
    if report.estimate.separated_fits > 0 {
        out.push(format!(
            "{} distribution-regression fits were separated; their coefficients are capped",
            report.estimate.separated_fits
        ));
    }
    if let Some(inf) = &report.inference {
        for (e, i) in report.estimate.effects.iter().zip(inf) {
            let n = i.dispersion.floored.iter().filter(|f| **f).count();
            if n > 0 {
                out.push(format!(
                    "{} effect: {n} standard errors were zero and floored at 1e-12",
                    e.curve.kind
                ));
            }
        }
    }
    if report.median_substituted {
        out.push("0.5 is not a requested quantile; the constant-effect test uses the nearest one".into());
    }
    if let Some(d) = &report.draws {
        if d.redrawn > 0 {
            out.push(format!("{} bootstrap replications were re-drawn after a failed fit", d.redrawn));
        }
    }
    out
}

fn kind_name(k: EffectKind) -> &'static str {
    match k {
        EffectKind::Structure => "structure",
        EffectKind::Composition => "composition",
        EffectKind::Total => "total",
    }
}

/// `tau,effect_kind,estimate,se,pw_lo,pw_hi,unif_lo,unif_hi` at full
/// precision; inference columns are empty without bootstrap.
pub fn curves_csv(report: &InferenceReport) -> String {
    let mut s = String::from("tau,effect_kind,estimate,se,pw_lo,pw_hi,unif_lo,unif_hi\n");
    for (slot, e) in report.estimate.effects.iter().enumerate() {
        let inf = report.inference.as_ref().map(|v| &v[slot]);
        for (k, (&tau, &d)) in e.curve.taus.iter().zip(&e.curve.delta).enumerate() {
            let _ = write!(s, "{tau},{},{d}", kind_name(e.curve.kind));
            match inf {
                Some(i) => {
                    let _ = writeln!(
                        s,
                        ",{},{},{},{},{}",
                        i.dispersion.sigma[k],
                        i.bands.pointwise[k].0,
                        i.bands.pointwise[k].1,
                        i.bands.uniform[k].0,
                        i.bands.uniform[k].1
                    );
                }
                None => s.push_str(",,,,,\n"),
            }
        }
    }
    s
}

/// One row per effect and null hypothesis.
pub fn tests_csv(report: &InferenceReport) -> String {
    let mut s = String::from("effect_kind,null,ks_statistic,cms_statistic,ks_pvalue,cms_pvalue\n");
    if let Some(inf) = &report.inference {
        for (e, i) in report.estimate.effects.iter().zip(inf) {
            for t in &i.tests {
                let _ = writeln!(
                    s,
                    "{},\"{}\",{},{},{},{}",
                    kind_name(e.curve.kind),
                    t.null.label(),
                    t.ks,
                    t.cms,
                    t.ks_pvalue,
                    t.cms_pvalue
                );
            }
        }
    }
    s
}
