//! The `aczel` command line tool.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails (the report
//! carries a witness), 2 for usage, configuration, parse and I/O errors,
//! 3 for numeric failures such as exhausted precision or a missing bracket.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::axioms::{
    check_associativity_with, check_cancellativity_with, check_symmetry_with, find_idempotents, AxiomKind, AxiomReport,
    CheckConfig, Collector, IdempotentScan, SampleOutcome, Witness, WitnessDetail,
};
use crate::expr;
use crate::extension::{ExtendError, ExtendedOp};
use crate::extraction::{self, ExtractedGenerator, ExtractionConfig, ExtractionError};
use crate::generator::{build_aczelian, validate_codomain, GeneratorError, GeneratorSpec};
use crate::interval::Interval;
use crate::op::NaryOp;
use crate::reducibility::{adjoin_neutral, check_diamond_associativity, derive_binary, verify_reduction, Neutral};
use crate::registry::{lookup_generator, lookup_op, reference_generator, RegistryError};
use crate::report::{write_report, Format, ReportError, RunReport};
use crate::sampling::{self, PointSampler};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    /// Falsification suite: associativity, symmetry, cancellativity, extension identities, idempotents.
    Axioms,
    /// Evaluate the n-ary extension and check its substitution identities.
    Extend,
    /// Build f = φ⁻¹(Σφ) from a generator and check it.
    Build,
    /// Recover a tabulated generator from an operation.
    Extract,
    /// Extract, rebuild from the table, and compare with the original operation.
    Roundtrip,
    /// Derive the binary operation, verify the reduction and find the neutral element.
    Reduce,
    /// Run the built-in fixtures.
    Gallery,
}

/// Options of one invocation.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "aczel", version, about = "Continuous symmetric cancellative n-ary semigroups")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: CommandKind,
    /// Builtin operation name, or `expr:` followed by an expression in x1..xn.
    #[arg(long, allow_hyphen_values = true)]
    pub op: Option<String>,
    /// Generator expression in x.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<String>,
    /// Inverse generator expression in x (optional; bisection otherwise).
    #[arg(long = "phi-inv", allow_hyphen_values = true)]
    pub phi_inv: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Domain such as "(0,inf)" or "[0,1)".
    #[arg(long, allow_hyphen_values = true)]
    pub interval: Option<String>,
    /// `lo:hi:step` (endpoints included) or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Comma-separated arguments to evaluate at (extend, build).
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<String>,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0 / 64.0)]
    pub resolution: f64,
    #[arg(long, default_value_t = crate::axioms::DEFAULT_TOL)]
    pub tol: f64,
    /// Base point for extraction; scanned for when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = sampling::DEFAULT_WINDOW)]
    pub window: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for `command`, as if no flags were given.
    pub fn for_command(command: CommandKind) -> Self {
        RunConfig {
            command,
            op: None,
            phi: None,
            phi_inv: None,
            n: 3,
            interval: None,
            grid: None,
            at: None,
            samples: 500,
            seed: 0,
            resolution: 1.0 / 64.0,
            tol: crate::axioms::DEFAULT_TOL,
            c: None,
            window: sampling::DEFAULT_WINDOW,
            format: Format::Json,
            out: None,
        }
    }

    fn check_config(&self) -> CheckConfig {
        CheckConfig {
            samples: self.samples,
            seed: self.seed,
            window: self.window,
            tol: self.tol,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("--resolution", self.resolution),
            ("--tol", self.tol),
            ("--window", self.window),
        ];
        for (flag, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Usage(format!("{flag} must be positive, got {v}")));
            }
        }
        if self.samples == 0 {
            return Err(CliError::Usage("--samples must be positive".into()));
        }
        if self.n < 2 {
            return Err(CliError::Usage(format!("--n must be at least 2, got {}", self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Report(_) => EXIT_USAGE,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ExtractionError> for CliError {
    fn from(e: ExtractionError) -> Self {
        match e {
            ExtractionError::InvalidBasePoint { .. }
            | ExtractionError::InvalidGrid { .. }
            | ExtractionError::ArityMismatch(..) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<GeneratorError> for CliError {
    fn from(e: GeneratorError) -> Self {
        match e {
            GeneratorError::OutOfRange { .. } | GeneratorError::NonMonotone { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ExtendError> for CliError {
    fn from(e: ExtendError) -> Self {
        match e {
            ExtendError::Escape { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn parse_interval(text: &str) -> Result<Interval, CliError> {
    text.parse::<Interval>()
        .map_err(|e| CliError::Usage(format!("bad interval {text:?}: {e}")))
}

/// Builds the operation named by `source`: a builtin name, or `expr:` and
/// an expression in `x1 … xn` on `interval` (the real line by default).
pub fn load_opspec(source: &str, n: usize, interval: Option<&str>) -> Result<NaryOp, CliError> {
    if n < 2 {
        return Err(CliError::Usage(format!("arity must be at least 2, got {n}")));
    }
    let domain = interval.map(parse_interval).transpose()?;
    if let Some(text) = source.strip_prefix("expr:") {
        let e = expr::parse(text, n).map_err(|err| CliError::Usage(err.render(text)))?;
        let domain = domain.unwrap_or_else(Interval::real_line);
        return Ok(NaryOp::new(n, domain, text.trim(), move |xs| e.eval_or_nan(xs)));
    }
    let op = lookup_op(source, n)?;
    Ok(match domain {
        Some(d) => op.with_domain(d),
        None => op,
    })
}

/// A generator from an expression in `x`, with an optional inverse expression.
pub fn load_generator(phi: &str, phi_inv: Option<&str>, interval: Option<&str>) -> Result<GeneratorSpec, CliError> {
    if !phi.contains(['(', ' ', '+', '-', '*', '/', '^']) && phi_inv.is_none() && interval.is_none() {
        if let Ok(g) = lookup_generator(phi, 2) {
            return Ok(g);
        }
    }
    let domain = interval.map(parse_interval).transpose()?.unwrap_or_else(Interval::real_line);
    let e = expr::parse(phi, 1).map_err(|err| CliError::Usage(err.render(phi)))?;
    let spec = GeneratorSpec::from_phi(phi.trim(), domain, move |x| e.eval_or_nan(&[x]))?;
    Ok(match phi_inv {
        Some(src) => {
            let inv = expr::parse(src, 1).map_err(|err| CliError::Usage(err.render(src)))?;
            spec.with_inverse(move |y| inv.eval_or_nan(&[y]))
        }
        None => spec,
    })
}

/// `lo:hi:step` with both ends included (within half a step), or `a,b,c`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Usage(format!("bad grid {text:?}: {why}"));
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected lo:hi:step"));
        }
        let (lo, hi, step) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
        if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi >= lo) {
            return Err(bad("need finite lo <= hi and a positive step"));
        }
        let count = ((hi - lo) / step + 0.5).floor() as usize;
        if count > 1_000_000 {
            return Err(bad("too many points"));
        }
        return Ok((0..=count).map(|i| lo + i as f64 * step).collect());
    }
    let xs: Vec<f64> = text.split(',').map(number).collect::<Result<_, _>>()?;
    if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
        return Err(bad("need finite values"));
    }
    Ok(xs)
}

fn parse_point_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad argument list {text:?}")))
        })
        .collect()
}

fn require_op(cfg: &RunConfig) -> Result<NaryOp, CliError> {
    let source = cfg
        .op
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{:?} needs --op", cfg.command)))?;
    load_opspec(source, cfg.n, cfg.interval.as_deref())
}

fn renamed(mut r: AxiomReport, prefix: &str) -> AxiomReport {
    r.check = format!("{prefix}: {}", r.check);
    r
}

fn core_checks(report: &mut RunReport, op: &NaryOp, cfg: &CheckConfig) {
    let lines = (cfg.samples / 10).max(1);
    report.add(&check_associativity_with(op, cfg));
    report.add(&check_symmetry_with(op, cfg));
    report.add(&check_cancellativity_with(op, lines, 20, cfg));
}

fn identity_checks(report: &mut RunReport, op: &NaryOp, cfg: &CheckConfig) -> Result<(), CliError> {
    let g = ExtendedOp::new(op.clone());
    let n = op.arity();
    report.add(&g.check_nested_random(cfg, 1 + 4 * (n - 1))?);
    report.add(&g.check_split_random(cfg, 1 + 2 * (n - 1))?);
    Ok(())
}

fn idempotent_grid(op: &NaryOp, window: f64) -> Vec<f64> {
    PointSampler::new(op.domain(), window).line_grid(401)
}

fn cmd_axioms(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let op = require_op(cfg)?;
    let cc = cfg.check_config();
    core_checks(report, &op, &cc);
    identity_checks(report, &op, &cc)?;
    report.detail("idempotents", find_idempotents(&op, &idempotent_grid(&op, cfg.window), 1e-9));
    Ok(())
}

fn cmd_extend(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let op = require_op(cfg)?;
    let g = ExtendedOp::new(op.clone());
    if let Some(at) = &cfg.at {
        let xs = parse_point_list(at)?;
        report.detail("at", &xs);
        report.detail("value", g.eval(&xs)?);
    }
    identity_checks(report, &op, &cfg.check_config())
}

fn cmd_build(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let spec = match (&cfg.phi, &cfg.op) {
        (Some(phi), _) => load_generator(phi, cfg.phi_inv.as_deref(), cfg.interval.as_deref())?,
        (None, Some(name)) => lookup_generator(name, cfg.n)?,
        (None, None) => return Err(CliError::Usage("build needs --phi or a generator name in --op".into())),
    };
    let form = validate_codomain(spec.codomain(), cfg.n)?;
    let op = build_aczelian(&spec, cfg.n)?;
    report.detail("domain", spec.domain().to_string());
    report.detail("codomain", spec.codomain().to_string());
    report.detail("codomain_form", form);
    report.detail("increasing", spec.is_increasing());
    if let Some(at) = &cfg.at {
        let xs = parse_point_list(at)?;
        let v = op
            .try_eval(&xs)
            .map_err(|e| CliError::Usage(format!("cannot evaluate at {xs:?}: {e}")))?;
        report.detail("at", &xs);
        report.detail("value", v);
    }
    let cc = cfg.check_config();
    core_checks(report, &op, &cc);
    let diamond = derive_binary(&spec)?;
    report.add(&verify_reduction(&op, &diamond, cfg.samples, cfg.seed));
    Ok(())
}

fn extraction_config(cfg: &RunConfig, op: &NaryOp) -> Result<ExtractionConfig, CliError> {
    let grid = match &cfg.grid {
        Some(text) => parse_grid(text)?,
        None => PointSampler::new(op.domain(), cfg.window).line_grid(9),
    };
    Ok(ExtractionConfig {
        base_point: cfg.c,
        grid,
        resolution: cfg.resolution,
        scan_window: cfg.window,
        seed: cfg.seed,
        ..ExtractionConfig::default()
    })
}

fn record_extraction(report: &mut RunReport, gen: &ExtractedGenerator) {
    report.table = Some(gen.samples());
    report.detail("c", gen.c);
    report.detail("direction", gen.direction);
    report.detail("normalization", gen.normalization);
    report.detail("resolution_bound", gen.resolution_bound);
}

fn extract_with_additivity(cfg: &RunConfig, report: &mut RunReport) -> Result<(NaryOp, ExtractedGenerator), CliError> {
    let op = require_op(cfg)?;
    let ecfg = extraction_config(cfg, &op)?;
    let gen = extraction::extract_generator(&op, &ecfg)?;
    record_extraction(report, &gen);
    match extraction::verify_additivity(&gen, &op, cfg.samples, cfg.seed) {
        Ok(r) => report.add(&r),
        Err(ExtractionError::OutsideTable { tries }) => {
            report.detail("additivity", format!("skipped: no in-range tuple after {tries} tries"))
        }
        Err(e) => return Err(e.into()),
    }
    Ok((op, gen))
}

fn cmd_extract(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    extract_with_additivity(cfg, report).map(|_| ())
}

fn cmd_roundtrip(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let (op, gen) = extract_with_additivity(cfg, report)?;
    report.add(&extraction::roundtrip(&gen, &op, cfg.samples, cfg.seed)?);
    Ok(())
}

fn subtraction_candidates() -> Vec<NaryOp> {
    let line = Interval::real_line();
    vec![
        NaryOp::new(2, line, "x-y", |xs| xs[0] - xs[1]),
        NaryOp::new(2, line, "y-x", |xs| xs[1] - xs[0]),
        NaryOp::new(2, line, "x+y", |xs| xs[0] + xs[1]),
        NaryOp::new(2, line, "-x-y", |xs| -xs[0] - xs[1]),
    ]
}

fn cmd_reduce(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let spec = match (&cfg.phi, &cfg.op) {
        (Some(phi), _) => Some(load_generator(phi, cfg.phi_inv.as_deref(), cfg.interval.as_deref())?),
        (None, Some(name)) => reference_generator(name, cfg.n),
        (None, None) => return Err(CliError::Usage("reduce needs --op or --phi".into())),
    };
    let op = match (&cfg.op, &spec) {
        (Some(source), _) => load_opspec(source, cfg.n, cfg.interval.as_deref())?,
        (None, Some(spec)) => build_aczelian(spec, cfg.n)?,
        (None, None) => unreachable!("checked above"),
    };
    let Some(spec) = spec else {
        // No generator: try the usual binary suspects; each is expected to fail.
        for d in subtraction_candidates() {
            let r = verify_reduction(&op, &d, cfg.samples, cfg.seed);
            report.add(&renamed(r, d.label()));
            let a = check_diamond_associativity(&d, cfg.samples, cfg.seed);
            report.add(&renamed(a, d.label()));
        }
        report.detail("reducible", "no candidate binary operation reproduces the operation");
        return Ok(());
    };
    let diamond = derive_binary(&spec)?;
    report.add(&verify_reduction(&op, &diamond, cfg.samples, cfg.seed));
    report.add(&check_diamond_associativity(&diamond, cfg.samples, cfg.seed));
    let adj = adjoin_neutral(&spec, cfg.n)?;
    report.detail("neutral", adj.neutral);
    report.detail("neutrality_residual", adj.neutrality_residual);
    if !adj.neutrality_holds() {
        report.pass = false;
    }
    Ok(())
}

/// Compares `values` with `expected` pointwise; each pair becomes one sample.
pub fn reference_report(check: &str, rows: &[(Vec<f64>, f64, f64)], tol: f64, seed: u64) -> AxiomReport {
    let mut c = Collector::new();
    for (inputs, got, want) in rows {
        let r = sampling::residual(*got, *want);
        c.push(SampleOutcome {
            residual: r,
            allowed: tol,
            witness: Witness {
                inputs: inputs.clone(),
                detail: WitnessDetail::Reference,
                lhs: *got,
                rhs: *want,
                residual: r,
            },
        });
    }
    c.finish(AxiomKind::Identity, check, tol, seed)
}

fn gallery_extension(report: &mut RunReport, seed: u64) -> Result<(), CliError> {
    use rand::Rng;
    let alt = lookup_op("alternating", 3)?;
    let g = ExtendedOp::new(alt);
    let mut rng = sampling::stream(seed, 40);
    let mut rows = Vec::new();
    for m in [1usize, 3, 5, 7, 9, 11] {
        for _ in 0..20 {
            let xs: Vec<f64> = (0..m).map(|_| rng.gen_range(-50i32..=50) as f64).collect();
            let closed: f64 = xs.iter().enumerate().map(|(i, &x)| if i % 2 == 0 { x } else { -x }).sum();
            rows.push((xs.clone(), g.eval(&xs)?, closed));
        }
    }
    report.add(&reference_report("alternating: extension closed form", &rows, 0.0, seed));
    Ok(())
}

fn gallery_extraction(report: &mut RunReport, seed: u64) -> Result<(), CliError> {
    let res = 1.0 / 64.0;
    let grid: Vec<f64> = (0..=8).map(|i| -2.0 + 0.5 * i as f64).collect();
    let sum = lookup_op("sum", 2)?;
    let cfg = ExtractionConfig {
        base_point: Some(1.0),
        grid,
        resolution: res,
        seed,
        ..ExtractionConfig::default()
    };
    let gen = extraction::extract_generator(&sum, &cfg)?;
    let rows: Vec<_> = gen.samples().into_iter().map(|(x, v)| (vec![x], v, x)).collect();
    report.add(&reference_report("sum: extracted generator", &rows, res, seed));
    Ok(())
}

fn gallery_idempotents(report: &mut RunReport, window: f64, seed: u64) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for (name, expected) in [("sum", 0.0), ("product", 1.0), ("translated_sum", -0.5)] {
        let op = lookup_op(name, 3)?;
        match find_idempotents(&op, &idempotent_grid(&op, window), 1e-12) {
            IdempotentScan::Points { points } if points.len() == 1 => rows.push((vec![], points[0], expected)),
            other => {
                report.detail(&format!("{name}: idempotents"), other);
                rows.push((vec![], f64::NAN, expected));
            }
        }
    }
    report.add(&reference_report("idempotents", &rows, 1e-9, seed));
    let alt = lookup_op("alternating", 3)?;
    let all = find_idempotents(&alt, &idempotent_grid(&alt, window), 1e-12) == IdempotentScan::AllSampledIdempotent;
    report.detail("alternating: every sampled point idempotent", all);
    if !all {
        report.pass = false;
    }
    Ok(())
}

fn cmd_gallery(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let cc = CheckConfig {
        samples: cfg.samples.min(200),
        ..cfg.check_config()
    };
    for name in ["sum", "translated_sum", "product", "bounded_product"] {
        let op = lookup_op(name, 3)?;
        report.add(&renamed(check_associativity_with(&op, &cc), name));
        report.add(&renamed(check_symmetry_with(&op, &cc), name));
        report.add(&renamed(check_cancellativity_with(&op, 20, 20, &cc), name));
        let g = ExtendedOp::new(op.clone());
        report.add(&renamed(g.check_nested_random(&cc, 9)?, name));
        report.add(&renamed(g.check_split_random(&cc, 5)?, name));
        let spec = reference_generator(name, 3).expect("builtin has a generator");
        report.add(&renamed(verify_reduction(&op, &derive_binary(&spec)?, cc.samples, cc.seed), name));
        let adj = adjoin_neutral(&spec, 3)?;
        let e = match adj.neutral {
            Neutral::Interior { value } => json!(value),
            Neutral::Adjoined { .. } => json!("adjoined"),
        };
        report.detail(&format!("{name}: neutral"), e);
        if !adj.neutrality_holds() {
            report.pass = false;
        }
    }
    let alt = lookup_op("alternating", 3)?;
    report.add(&renamed(check_associativity_with(&alt, &cc), "alternating"));
    report.add_expecting(&renamed(check_symmetry_with(&alt, &cc), "alternating"), false);
    report.add(&renamed(check_cancellativity_with(&alt, 20, 20, &cc), "alternating"));
    gallery_extension(report, cfg.seed)?;
    gallery_extraction(report, cfg.seed)?;
    gallery_idempotents(report, cfg.window, cfg.seed)?;
    Ok(())
}

/// Runs one command. A numeric failure still yields a report, with
/// `error` set; usage errors yield no report.
pub fn execute(cfg: &RunConfig) -> Result<(RunReport, i32), CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let echo = serde_json::to_value(cfg).unwrap_or(Value::Null);
    let name = serde_json::to_value(cfg.command)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    let mut report = RunReport::new(name, echo, cfg.seed);
    let outcome = match cfg.command {
        CommandKind::Axioms => cmd_axioms(cfg, &mut report),
        CommandKind::Extend => cmd_extend(cfg, &mut report),
        CommandKind::Build => cmd_build(cfg, &mut report),
        CommandKind::Extract => cmd_extract(cfg, &mut report),
        CommandKind::Roundtrip => cmd_roundtrip(cfg, &mut report),
        CommandKind::Reduce => cmd_reduce(cfg, &mut report),
        CommandKind::Gallery => cmd_gallery(cfg, &mut report),
    };
    report.timing_ms = start.elapsed().as_millis() as u64;
    let code = match outcome {
        Ok(()) if report.pass => EXIT_PASS,
        Ok(()) => EXIT_CHECK_FAILED,
        Err(e @ CliError::Numeric(_)) => {
            report.pass = false;
            report.error = Some(e.to_string());
            EXIT_NUMERIC
        }
        Err(e) => return Err(e),
    };
    Ok((report, code))
}

/// Executes `cfg`, writes the report and returns the exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let (report, code) = match execute(cfg) {
        Ok(done) => done,
        Err(e) => {
            eprintln!("aczel: {e}");
            return e.exit_code();
        }
    };
    if let Some(e) = &report.error {
        eprintln!("aczel: {e}");
    }
    match write_report(&report, cfg.format, cfg.out.as_deref()) {
        Ok(()) => code,
        Err(e) => {
            eprintln!("aczel: {e}");
            EXIT_USAGE
        }
    }
}

/// Parses command line arguments (program name first) and runs.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(command: CommandKind) -> RunConfig {
        RunConfig::for_command(command)
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("-2:2:0.5").unwrap(), vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("0:1:0.3").unwrap().len(), 4);
        assert_eq!(parse_grid("0:1:0.4").unwrap().len(), 4);
        assert_eq!(parse_grid("0:1:0.45").unwrap().len(), 3);
        assert_eq!(parse_grid("0.5,1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        for bad in ["1:0:0.1", "0:1", "a,b", "0:1:0", "0:1:-1", "1,inf"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn opspec_examples() {
        let alt = load_opspec("expr:x1 - x2 + x3", 3, Some("(-inf,inf)")).unwrap();
        assert_eq!(alt.eval(&[1.0, 2.0, 3.0]), 2.0);
        let prod = load_opspec("product", 3, Some("(0,inf)")).unwrap();
        assert_eq!(prod.eval(&[2.0, 3.0, 4.0]), 24.0);
        let err = load_opspec("expr:x1 +", 3, None).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
        assert!(err.to_string().contains("offset 4"), "{err}");
        assert_eq!(load_opspec("nope", 3, None).unwrap_err().exit_code(), EXIT_USAGE);
        assert_eq!(load_opspec("sum", 3, Some("(1,0)")).unwrap_err().exit_code(), EXIT_USAGE);
        assert_eq!(load_opspec("alternating", 2, None).unwrap_err().exit_code(), EXIT_USAGE);
    }

    #[test]
    fn exit_codes() {
        let mut c = cfg(CommandKind::Axioms);
        c.op = Some("alternating".into());
        c.samples = 200;
        c.seed = 7;
        let (report, code) = execute(&c).unwrap();
        assert_eq!(code, EXIT_CHECK_FAILED);
        assert!(report.witnesses.iter().any(|w| w.check == "symmetry"));

        c.command = CommandKind::Extract;
        assert_eq!(execute(&c).unwrap().1, EXIT_NUMERIC);

        c.op = Some("sum".into());
        c.command = CommandKind::Axioms;
        assert_eq!(execute(&c).unwrap().1, EXIT_PASS);

        c.resolution = 0.0;
        assert_eq!(execute(&c).unwrap_err().exit_code(), EXIT_USAGE);
    }

    #[test]
    fn extract_table() {
        let mut c = cfg(CommandKind::Extract);
        c.op = Some("sum".into());
        c.n = 2;
        c.c = Some(1.0);
        c.grid = Some("-2:2:0.5".into());
        c.samples = 100;
        let (report, code) = execute(&c).unwrap();
        assert_eq!(code, EXIT_PASS, "{report:?}");
        let table = report.table.unwrap();
        assert_eq!(table.len(), 9);
        for (x, v) in table {
            assert!((v - x).abs() <= 1.0 / 64.0);
        }
    }

    #[test]
    fn build_and_reduce() {
        let mut c = cfg(CommandKind::Build);
        c.phi = Some("ln(x)".into());
        c.phi_inv = Some("exp(x)".into());
        c.interval = Some("(0,inf)".into());
        c.at = Some("2,3,4".into());
        c.samples = 100;
        let (report, code) = execute(&c).unwrap();
        assert_eq!(code, EXIT_PASS, "{report:?}");
        assert!((report.details["value"].as_f64().unwrap() - 24.0).abs() < 1e-12);

        let mut r = cfg(CommandKind::Reduce);
        r.op = Some("translated_sum".into());
        r.samples = 100;
        let (report, code) = execute(&r).unwrap();
        assert_eq!(code, EXIT_PASS);
        assert_eq!(report.details["neutral"]["value"], json!(-0.5));

        r.op = Some("alternating".into());
        let (report, code) = execute(&r).unwrap();
        assert_eq!(code, EXIT_CHECK_FAILED);
        for d in ["x-y", "y-x", "x+y", "-x-y"] {
            let failed = |kind: &str| report.residuals.iter().any(|r| r.check == format!("{d}: {kind}") && !r.pass);
            assert!(failed("reduction") || failed("binary associativity"), "{d}");
        }
    }

    #[test]
    fn gallery_passes() {
        let (report, code) = execute(&cfg(CommandKind::Gallery)).unwrap();
        assert_eq!(code, EXIT_PASS, "{}", report.to_text());
    }
}
