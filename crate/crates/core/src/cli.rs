//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid model/design/flags,
//! 3 no successful search start, 4 singular information matrix,
//! 5 a reproduction check out of tolerance (with `--check`).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::criteria::{CriterionConfig, CriterionError, Family};
use crate::diagnostics::{compare_designs, diagnose, t_test_power, DiagnosticsError, PowerQuery};
use crate::io::{design_to_csv, read_design, read_model, IoError};
use crate::model::{Design, ModelSpec};
use crate::reproduce::{self, SweepParams};
use crate::search::{
    construct, dual_protocol, DomainMode, SearchConfig, SearchError, SearchResult,
};

pub const EXIT_IO: i32 = 1;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_NO_START: i32 = 3;
pub const EXIT_SINGULAR: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;

pub const THREADS_ENV: &str = "SCREENOPT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "screenopt",
    version,
    about = "Construct and evaluate D- and A-optimal screening designs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for an optimal design.
    Construct(ConstructArgs),
    /// Report variances, aliasing and criterion values for one design.
    Evaluate(EvaluateArgs),
    /// Sorted-variance table for several designs.
    Compare(CompareArgs),
    /// Recompute the bundled example results.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Pm1,
    #[value(name = "pm1_0")]
    Pm10,
    Continuous,
    #[value(name = "per_factor")]
    PerFactor,
    /// pm1 for D-type criteria, continuous otherwise.
    Auto,
}

impl DomainArg {
    pub fn resolve(self, family: Family) -> DomainMode {
        match self {
            DomainArg::Pm1 => DomainMode::PM1,
            DomainArg::Pm10 => DomainMode::PM1_0,
            DomainArg::Continuous => DomainMode::Continuous,
            DomainArg::PerFactor => DomainMode::PerFactor,
            DomainArg::Auto if family.is_d_family() => DomainMode::PM1,
            DomainArg::Auto => DomainMode::Continuous,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_parser = parse_family)]
    pub criterion: Family,
    #[arg(long, value_enum, default_value = "auto")]
    pub domain: DomainArg,
    #[arg(long, default_value_t = 100)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Nuisance weight for the weighted criteria.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Alternate {−1,0,1} and continuous batches until neither improves.
    #[arg(long)]
    pub dual: bool,
    /// Starts per batch with `--dual`; defaults to `--starts`.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub max_passes: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub equal_tol: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Fit used for the reported variances.
    #[arg(long, value_enum, default_value = "primary")]
    pub submodel: FitArg,
    /// `j,beta_over_sigma,alpha` with `j` the 1-based primary effect.
    #[arg(long)]
    pub power: Option<String>,
    /// Headline criterion for the report.
    #[arg(long, value_parser = parse_family, default_value = "As")]
    pub criterion: Family,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitArg {
    /// Primary terms and nuisance only.
    Primary,
    /// Every model term.
    Full,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "design", required = true, num_args = 1)]
    pub designs: Vec<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    /// Sorted-variance CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(reproduce::TARGETS))]
    pub target: String,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Exit 5 when any check is out of tolerance.
    #[arg(long)]
    pub check: bool,
    #[arg(long, default_value_t = 3)]
    pub k_min: usize,
    #[arg(long, default_value_t = 6)]
    pub k_max: usize,
    #[arg(long, default_value_t = 4)]
    pub extra_runs: usize,
    #[arg(long, default_value_t = 100)]
    pub starts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse()
}

/// Error carrying its exit code and, for singular designs, a JSON body for
/// standard output.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
    pub stdout_json: Option<Value>,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            stdout_json: None,
        }
    }

    fn singular(message: String) -> Self {
        Self {
            code: EXIT_SINGULAR,
            stdout_json: Some(json!({"error": "Singular", "message": message})),
            message,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = if matches!(e, IoError::File { .. }) {
            EXIT_IO
        } else {
            EXIT_SPEC
        };
        CliError::new(code, e.to_string())
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::Criterion(CriterionError::Singular(_)) => {
                CliError::singular(e.to_string())
            }
            _ => CliError::new(EXIT_SPEC, e.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        let code = match e {
            SearchError::AllStartsFailed { .. }
            | SearchError::CannotFindNonsingularStart { .. } => EXIT_NO_START,
            SearchError::Linalg(_) | SearchError::Criterion(CriterionError::Singular(_)) => {
                EXIT_SINGULAR
            }
            _ => EXIT_SPEC,
        };
        CliError::new(code, e.to_string())
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n"
}

fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&t| t > 0)
}

/// Diagnostics block shared by the construct and evaluate reports. Fields
/// that cannot be computed are null.
fn diagnostics_json(d: &Design, spec: &ModelSpec) -> Value {
    match diagnose(d, spec) {
        Ok(r) => json!({
            "term_labels": r.term_labels,
            "variances": r.variances,
            "tr_ata": r.tr_ata,
            "A_M": r.A_M,
            "SS_Q": r.SS_Q,
            "SS_MI": r.SS_MI,
            "criterion_values": r.criterion_values,
        }),
        Err(e) => json!({
            "variances": null,
            "tr_ata": null,
            "A_M": null,
            "SS_Q": null,
            "SS_MI": null,
            "criterion_values": crate::diagnostics::criterion_values(d, spec),
            "diagnostics_error": e.to_string(),
        }),
    }
}

fn merge(target: &mut Value, extra: Value) {
    if let (Value::Object(t), Value::Object(e)) = (target, extra) {
        t.extend(e);
    }
}

pub fn construct_report(result: &SearchResult, spec: &ModelSpec, seed: u64) -> Value {
    let mut report = json!({
        "criterion": result.best_value,
        "n": result.best_design.n(),
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "passes_used": result.passes_used,
        "exchanges_made": result.exchanges_made,
        "success_count_at_best": result.success_count_at_best,
        "batches": result.batches,
        "per_start": result.per_start,
    });
    merge(&mut report, diagnostics_json(&result.best_design, spec));
    report
}

pub fn cmd_construct(a: &ConstructArgs) -> Result<Value, CliError> {
    let spec = read_model(&a.model)?;
    let cfg = CriterionConfig {
        family: a.criterion,
        w: a.w,
    };
    let search = SearchConfig {
        starts: if a.dual {
            a.batch.unwrap_or(a.starts)
        } else {
            a.starts
        },
        seed: a.seed,
        domain_mode: a.domain.resolve(a.criterion),
        max_passes: a.max_passes,
        equal_tol: a.equal_tol,
        parallel_starts: threads_from_env(),
        ..SearchConfig::default()
    };
    log::info!(
        "searching n={} family={} mode={:?} starts={}",
        a.n,
        a.criterion.name(),
        search.domain_mode,
        search.starts
    );
    let result = if a.dual {
        dual_protocol(a.n, &spec, &cfg, &search)?
    } else {
        construct(a.n, &spec, &cfg, &search)?
    };
    let report = construct_report(&result, &spec, a.seed);
    let csv = design_to_csv(&result.best_design);
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(p) = &a.report {
        write_file(p, &pretty(&report))?;
    }
    Ok(report)
}

fn parse_power(s: &str, spec: &ModelSpec) -> Result<PowerQuery, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || {
        CliError::new(
            EXIT_SPEC,
            format!("--power expects j,beta_over_sigma,alpha; got {s:?}"),
        )
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let j: usize = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let alpha: f64 = parts[2].parse().map_err(|_| bad())?;
    if j == 0 || j > spec.p() {
        return Err(CliError::new(
            EXIT_SPEC,
            format!("--power effect {j} outside 1..={}", spec.p()),
        ));
    }
    Ok(PowerQuery {
        effect_index: j - 1,
        beta_over_sigma: b,
        alpha,
    })
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<Value, CliError> {
    let spec = read_model(&a.model)?;
    let design = read_design(&a.design)?;
    spec.check_design(&design)
        .map_err(|e| CliError::new(EXIT_SPEC, e.to_string()))?;
    let query = a
        .power
        .as_deref()
        .map(|s| parse_power(s, &spec))
        .transpose()?;

    let headline = crate::criteria::evaluate(&design, &spec, &CriterionConfig::new(a.criterion))
        .map_err(DiagnosticsError::from)?;
    let report_core = diagnose(&design, &spec)?;
    let variances = match a.submodel {
        FitArg::Primary => report_core.variances.clone(),
        FitArg::Full => crate::criteria::effect_variances(&design, &spec, false)
            .map_err(DiagnosticsError::from)?,
    };
    let mut report = json!({
        "criterion": headline,
        "fit": if a.submodel == FitArg::Primary { "primary" } else { "full" },
        "term_labels": report_core.term_labels,
        "variances": variances,
        "alias": report_core.alias,
        "tr_ata": report_core.tr_ata,
        "A_M": report_core.A_M,
        "SS_Q": report_core.SS_Q,
        "SS_MI": report_core.SS_MI,
        "criterion_values": report_core.criterion_values,
        "version": env!("CARGO_PKG_VERSION"),
    });
    if let Some(q) = query {
        let power = t_test_power(&design, &spec, &q)?;
        merge(
            &mut report,
            json!({"power": {
                "effect": q.effect_index + 1,
                "beta_over_sigma": q.beta_over_sigma,
                "alpha": q.alpha,
                "residual_df": crate::diagnostics::residual_df(&design, &spec),
                "power": power,
            }}),
        );
    }
    if let Some(p) = &a.report {
        write_file(p, &pretty(&report))?;
    }
    Ok(report)
}

/// Design ids are file stems, falling back to the full path on a clash.
fn design_ids(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
        .collect();
    stems
        .iter()
        .zip(paths)
        .map(|(s, p)| {
            if s.is_empty() || stems.iter().filter(|t| *t == s).count() > 1 {
                p.display().to_string()
            } else {
                s.clone()
            }
        })
        .collect()
}

pub fn cmd_compare(a: &CompareArgs) -> Result<Value, CliError> {
    if a.designs.len() < 2 {
        return Err(CliError::new(
            EXIT_SPEC,
            "compare needs at least two --design files",
        ));
    }
    let spec = read_model(&a.model)?;
    let mut designs = Vec::new();
    for (id, path) in design_ids(&a.designs).into_iter().zip(&a.designs) {
        let d = read_design(path)?;
        spec.check_design(&d)
            .map_err(|e| CliError::new(EXIT_SPEC, format!("{}: {e}", path.display())))?;
        designs.push((id, d));
    }
    let cmp = compare_designs(&designs, &spec);
    let mut csv = String::from("design,rank,variance\n");
    for e in &cmp.entries {
        match &e.sorted_variances {
            Ok(v) => {
                for (r, x) in v.iter().enumerate() {
                    csv.push_str(&format!("{},{},{x}\n", e.id, r + 1));
                }
            }
            Err(msg) => return Err(CliError::singular(format!("{}: {msg}", e.id))),
        }
    }
    let summary = serde_json::to_value(&cmp).expect("comparison serializes");
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(p) = &a.summary {
        write_file(p, &pretty(&summary))?;
    }
    Ok(summary)
}

pub fn cmd_reproduce(a: &ReproduceArgs) -> Result<Value, CliError> {
    let params = SweepParams {
        k_min: a.k_min,
        k_max: a.k_max,
        extra_runs: a.extra_runs,
        starts: a.starts,
        seed: a.seed,
        threads: threads_from_env(),
    };
    let bundle = reproduce::run(&a.target, &params)
        .ok_or_else(|| CliError::new(EXIT_SPEC, format!("unknown target {}", a.target)))?;
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", a.out_dir.display())))?;
    let summary = json!({
        "target": bundle.target,
        "version": env!("CARGO_PKG_VERSION"),
        "passed": bundle.passed(),
        "results": bundle.summary,
        "checks": bundle.checks,
    });
    write_file(
        &a.out_dir.join(format!("{}_summary.json", bundle.target)),
        &pretty(&summary),
    )?;
    for (name, text) in &bundle.tables {
        write_file(&a.out_dir.join(name), text)?;
    }
    for c in &bundle.checks {
        eprintln!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if a.check && !bundle.passed() {
        return Err(CliError {
            code: EXIT_CHECK_FAILED,
            message: format!("{}: reproduction checks failed", bundle.target),
            stdout_json: Some(summary),
        });
    }
    Ok(summary)
}

/// Runs a parsed command and returns the process exit code. Reports go to
/// standard output, messages to standard error.
pub fn run(cli: Cli) -> i32 {
    let (result, echo) = match &cli.command {
        Command::Construct(a) => (cmd_construct(a), a.report.is_none() && a.out.is_some()),
        Command::Evaluate(a) => (cmd_evaluate(a), true),
        Command::Compare(a) => (cmd_compare(a), false),
        Command::Reproduce(a) => (cmd_reproduce(a), true),
    };
    match result {
        Ok(report) => {
            if echo {
                print!("{}", pretty(&report));
            }
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            if let Some(body) = e.stdout_json {
                print!("{}", pretty(&body));
            }
            e.code
        }
    }
}
