//! Descriptor ingestion and the `validate`, `moments` and `verify` commands.
//!
//! Exit codes: 0 when everything passes, 1 for certification or verification
//! failures, 2 for parse and schema errors, 3 when a resource cap is hit.

pub mod descriptor;
pub mod expr;
pub mod suites;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::bassserre::BassSerreError;
use crate::fundamental::{Fundamental, FundamentalError};
use crate::graphcore::AlgebraGraph;
use crate::linalg::C64;
use crate::report::SuiteReport;
use crate::unscrew::UnscrewError;
pub use descriptor::DescriptorError;
pub use expr::ExprError;
pub use suites::Suite;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "GRAPHALG_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Expression(#[from] ExprError),
    #[error(transparent)]
    Fundamental(#[from] FundamentalError),
    #[error(transparent)]
    Unscrew(#[from] UnscrewError),
    #[error(transparent)]
    BassSerre(#[from] BassSerreError),
}

fn fundamental_code(e: &FundamentalError) -> i32 {
    match e {
        FundamentalError::WordTooLong { .. } | FundamentalError::DomainExceeded { .. } => 3,
        _ => 1,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Descriptor(e) => e.exit_code(),
            CliError::Expression(ExprError::Fundamental(e)) => fundamental_code(e),
            CliError::Expression(_) => 2,
            CliError::Fundamental(e) => fundamental_code(e),
            CliError::Unscrew(UnscrewError::Fundamental(e)) => fundamental_code(e),
            CliError::Unscrew(_) => 1,
            CliError::BassSerre(BassSerreError::DomainExceeded { .. }) => 3,
            CliError::BassSerre(BassSerreError::Fundamental(e)) => fundamental_code(e),
            CliError::BassSerre(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "graphalg", version, about = "Graphs of finite-dimensional C*-algebras: validation, moments and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Truncation depth of the path spaces.
    #[arg(long, global = true, default_value_t = 4)]
    pub depth: usize,
    /// Seed of the random samples.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the report thresholds (not the construction tolerances).
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parses and certifies a descriptor.
    Validate { descriptor: PathBuf },
    /// Moments φ(xⁿ) of a word expression.
    Moments {
        descriptor: PathBuf,
        /// Expression such as `g@p + u@e·h@q·u@ē`.
        #[arg(long)]
        element: String,
        #[arg(long, default_value_t = 4)]
        max_degree: usize,
    },
    /// Runs verification suites and reports residuals.
    Verify {
        descriptor: PathBuf,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
}

pub fn load_descriptor(path: &Path) -> Result<AlgebraGraph, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(descriptor::load(&text)?)
}

/// Formats with 12 significant digits, dropping trailing zeros.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..12).contains(&exp) {
        let s = trim(format!("{:.*}", (11 - exp).max(0) as usize, x));
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{:.11e}", x);
        let (m, e) = s.split_once('e').expect("scientific notation");
        format!("{}e{}", trim(m.to_string()), e)
    }
}

fn format_complex(z: C64) -> String {
    let scale = z.norm().max(1.0);
    if z.im.abs() <= 1e-12 * scale {
        format_sig(z.re)
    } else if z.re.abs() <= 1e-12 * scale {
        format!("{}i", format_sig(z.im))
    } else {
        let im = format_sig(z.im.abs());
        format!("{}{}{}i", format_sig(z.re), if z.im < 0.0 { "-" } else { "+" }, im)
    }
}

/// `degree,value` rows for `φ(xⁿ)`, `n = 0..=max_degree`.
pub fn cmd_moments(g: &AlgebraGraph, element: &str, max_degree: usize) -> Result<String, CliError> {
    let f = Fundamental::new(g);
    let x = expr::evaluate(&f, element)?;
    let m = f.moments(&x, max_degree)?;
    let mut out = String::from("degree,value\n");
    let zeroth = f.fundamental_state(&f.one());
    for (n, z) in (0..).zip(std::iter::once(&zeroth).chain(&m)) {
        out.push_str(&format!("{n},{}\n", format_complex(*z)));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct VerifyOutput<'a> {
    descriptor: String,
    depth: usize,
    seed: u64,
    pass: bool,
    suites: &'a [SuiteReport],
}

/// Runs suites and applies an optional tolerance override.
pub fn cmd_verify(g: &AlgebraGraph, suite: Suite, depth: usize, seed: u64, tolerance: Option<f64>) -> Result<Vec<SuiteReport>, CliError> {
    let mut reports = suites::run(g, suite, depth, seed)?;
    if let Some(t) = tolerance {
        for r in &mut reports {
            r.checks = r.checks.drain(..).map(|c| c.retolerance(t)).collect();
        }
    }
    Ok(reports)
}

fn configure_threads(err: &mut dyn Write) {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return };
    match raw.trim().parse::<usize>() {
        Ok(n) if n >= 1 => {
            // a pool built earlier in the same process keeps its size
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => {
            let _ = writeln!(err, "warning: ignoring {THREADS_ENV}={raw:?}; expected a positive integer");
        }
    }
}

fn text_report(path: &Path, reports: &[SuiteReport]) -> String {
    let mut s = format!("descriptor {}\n", path.display());
    for r in reports {
        match &r.skipped {
            Some(why) => s.push_str(&format!("suite {}: skipped ({why})\n", r.suite)),
            None => {
                s.push_str(&format!("suite {}: {}\n", r.suite, if r.pass() { "PASS" } else { "FAIL" }));
                for c in &r.checks {
                    s.push_str(&format!(
                        "  [{}] {}: {:.3e} (threshold {:.1e})",
                        if c.pass { "pass" } else { "FAIL" },
                        c.name,
                        c.max_residual,
                        c.tolerance
                    ));
                    if let Some(d) = &c.detail {
                        s.push_str(&format!("  {d}"));
                    }
                    s.push('\n');
                }
            }
        }
    }
    let all = reports.iter().all(SuiteReport::pass);
    s.push_str(&format!("overall: {}\n", if all { "PASS" } else { "FAIL" }));
    s
}

fn validate_summary(g: &AlgebraGraph) -> serde_json::Value {
    let gr = &g.graph;
    serde_json::json!({
        "valid": true,
        "vertices": (0..gr.vertex_count()).map(|v| serde_json::json!({
            "label": gr.vertex_label(v),
            "dim": g.vertex_dim(v),
        })).collect::<Vec<_>>(),
        "edge_pairs": gr.positive_edges().iter().map(|&e| gr.edge(e).label.clone()).collect::<Vec<_>>(),
        "base": gr.vertex_label(g.base()),
        "tree": g.tree.edges.iter().map(|&e| gr.edge(e).label.clone()).collect::<Vec<_>>(),
        "counits": g.has_counits(),
        "classical": g.is_classical(),
    })
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Validate { descriptor } => {
            let g = load_descriptor(descriptor)?;
            let summary = validate_summary(&g);
            match cli.format {
                Format::Json => {
                    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&summary).expect("serializable"));
                }
                Format::Text => {
                    let _ = writeln!(
                        out,
                        "valid: {} vertices, {} edge pairs, base {}, tree [{}], counits {}",
                        g.graph.vertex_count(),
                        g.graph.positive_edges().len(),
                        summary["base"].as_str().unwrap_or(""),
                        g.tree.edges.iter().map(|&e| g.graph.edge(e).label.as_str()).collect::<Vec<_>>().join(", "),
                        if g.has_counits() { "present" } else { "absent" },
                    );
                }
            }
            Ok(0)
        }
        Command::Moments { descriptor, element, max_degree } => {
            let g = load_descriptor(descriptor)?;
            let table = cmd_moments(&g, element, *max_degree)?;
            match cli.format {
                Format::Text => {
                    let _ = write!(out, "{table}");
                }
                Format::Json => {
                    let rows: Vec<serde_json::Value> = table
                        .lines()
                        .skip(1)
                        .filter_map(|l| l.split_once(','))
                        .map(|(d, v)| serde_json::json!({"degree": d.parse::<usize>().unwrap_or(0), "value": v}))
                        .collect();
                    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("serializable"));
                }
            }
            Ok(0)
        }
        Command::Verify { descriptor, suite } => {
            let g = load_descriptor(descriptor)?;
            let reports = cmd_verify(&g, *suite, cli.depth, cli.seed, cli.tolerance)?;
            let pass = reports.iter().all(SuiteReport::pass);
            match cli.format {
                Format::Json => {
                    let doc = VerifyOutput {
                        descriptor: descriptor.display().to_string(),
                        depth: cli.depth,
                        seed: cli.seed,
                        pass,
                        suites: &reports,
                    };
                    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
                }
                Format::Text => {
                    let _ = write!(out, "{}", text_report(descriptor, &reports));
                }
            }
            Ok(if pass { 0 } else { 1 })
        }
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    configure_threads(err);
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            match cli.format {
                Format::Json => {
                    let doc = serde_json::json!({"error": e.to_string(), "exit_code": code});
                    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
                }
                Format::Text => {}
            }
            let _ = writeln!(err, "error: {e}");
            code
        }
    }
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}
