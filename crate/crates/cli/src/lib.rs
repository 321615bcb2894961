//! `penny`: analyze a source file, price it, compare vendors, run the
//! simulation oracle, or serve the HTTP API.
//!
//! Exit codes: 0 success, 1 analysis or pricing error, 2 unresolved
//! assumptions.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use penny_core::estimate::{compare_catalogs, monthly_cost, CompareError, Comparison, CostReport, EstimateError};
use penny_core::graph::{to_dot, to_json, Finding};
use penny_core::num::{format_decimal, Micros};
use penny_core::pipeline::{analyze, Analysis};
use penny_core::pricing::{bind, load_catalog, parse_catalog, PricingCatalog, BUNDLED};
use penny_core::scalar::Scalar;
use penny_core::sim::simulate_month;
use penny_core::syntax::SourceFile;
use penny_service::ServiceConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_UNRESOLVED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "penny", version, about = "Cost estimates for Infrastructure-from-Code programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the cost graph or the factor catalogue.
    Analyze {
        /// Program source (`.w`).
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Monthly cost report.
    Cost {
        /// Program source (`.w`).
        file: PathBuf,
        /// Catalog file, bundled id (`acme-v1`, `globex-v1`) or id in `$PENNY_CATALOG_DIR`.
        #[arg(long)]
        catalog: String,
        /// Billing month, 1-based; storage accumulates across months.
        #[arg(long, default_value_t = 1)]
        month: u32,
        #[command(flatten)]
        common: Common,
    },
    /// The same usage priced under several catalogs.
    Compare {
        /// Program source (`.w`).
        file: PathBuf,
        /// Repeat per vendor; deltas are against the first.
        #[arg(long, required = true)]
        catalog: Vec<String>,
        /// Billing month, 1-based; storage accumulates across months.
        #[arg(long, default_value_t = 1)]
        month: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Event-driven simulation of a month, with the difference to the
    /// analytic report.
    Simulate {
        /// Program source (`.w`).
        file: PathBuf,
        /// Catalog file, bundled id (`acme-v1`, `globex-v1`) or id in `$PENNY_CATALOG_DIR`.
        #[arg(long)]
        catalog: String,
        /// Billing month, 1-based; storage accumulates across months.
        #[arg(long, default_value_t = 1)]
        month: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "PENNY_LISTEN", default_value = "127.0.0.1:7878")]
        listen: String,
        #[arg(long, env = "PENNY_CATALOG_DIR")]
        catalog_dir: Option<PathBuf>,
        #[arg(long)]
        ui_origin: Option<String>,
        /// Sessions are restored from and saved to this file.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Assumption value, `key=value`; overrides annotations.
    #[arg(long = "assume", value_name = "KEY=VALUE")]
    pub assume: Vec<String>,
    /// JSON object of assumption values, applied before `--assume`.
    #[arg(long, value_name = "FILE")]
    pub assumptions: Option<PathBuf>,
    /// Treat graph validation findings as errors.
    #[arg(long)]
    pub strict: bool,
    /// Machine-readable output; diagnostics go to standard error as JSON lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Json,
    Dot,
    Catalogue,
}

/// A failure with its exit code and diagnostic.
struct Failure {
    code: u8,
    diagnostic: serde_json::Value,
}

impl Failure {
    fn error(kind: &str, message: impl Into<String>) -> Self {
        Failure { code: EXIT_ERROR, diagnostic: json!({ "error": kind, "message": message.into() }) }
    }
}

impl From<EstimateError> for Failure {
    fn from(e: EstimateError) -> Self {
        let mut diagnostic = serde_json::to_value(&e).expect("errors serialize");
        diagnostic["message"] = e.to_string().into();
        let code = if matches!(e, EstimateError::UnresolvedAssumption { .. }) { EXIT_UNRESOLVED } else { EXIT_ERROR };
        Failure { code, diagnostic }
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let json_mode = match &cli.command {
        Command::Analyze { common, .. } | Command::Cost { common, .. } | Command::Compare { common, .. } | Command::Simulate { common, .. } => common.json,
        Command::Serve { .. } => false,
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) if f.diagnostic["error"] == "BrokenPipe" => EXIT_OK,
        Err(f) => {
            let _ = if json_mode {
                writeln!(err, "{}", f.diagnostic)
            } else {
                writeln!(err, "penny: {}", f.diagnostic["message"].as_str().unwrap_or("error"))
            };
            f.code
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| match e.kind() {
        // A closed reader such as `head` is not a failure.
        std::io::ErrorKind::BrokenPipe => Failure::error("BrokenPipe", e.to_string()),
        _ => Failure::error("Io", e.to_string()),
    };
    match command {
        Command::Analyze { file, format, common } => {
            let analysis = load(&file, &common, err)?;
            match format {
                GraphFormat::Json => {
                    let text = serde_json::to_string_pretty(&to_json(&analysis.extraction.graph)).expect("graphs serialize");
                    writeln!(out, "{text}").map_err(io)?;
                }
                GraphFormat::Dot => write!(out, "{}", to_dot(&analysis.extraction.graph)).map_err(io)?,
                GraphFormat::Catalogue => {
                    let rows = analysis.catalogue();
                    if common.json {
                        writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("rows serialize")).map_err(io)?;
                    } else {
                        for row in rows {
                            let status = if row.resolved { "ok".to_string() } else { format!("needs {}", row.missing.join(", ")) };
                            writeln!(out, "{:<40} {:<13} {}", row.id, serde_json::to_value(row.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(), status).map_err(io)?;
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Cost { file, catalog, month, common } => {
            let analysis = load(&file, &common, err)?;
            let catalog = resolve_catalog(&catalog)?;
            let model = bind(&analysis.extraction.graph, &catalog).map_err(EstimateError::Unpriced)?;
            let report = monthly_cost(&model, &analysis.extraction.assumptions, month)?;
            if common.json {
                out.write_all(report.to_json().as_bytes()).map_err(io)?;
            } else {
                write_report(out, &report).map_err(io)?;
            }
            Ok(())
        }
        Command::Compare { file, catalog, month, common } => {
            let analysis = load(&file, &common, err)?;
            let catalogs = catalog.iter().map(|c| resolve_catalog(c)).collect::<Result<Vec<_>, _>>()?;
            let comparison = compare_catalogs(&analysis.extraction.graph, &analysis.extraction.assumptions, &catalogs, month)
                .map_err(|e| match e {
                    CompareError::Estimate(e) => Failure::from(e),
                    CompareError::Unpriced(errors) => Failure {
                        code: EXIT_ERROR,
                        diagnostic: json!({
                            "error": "UnpricedFactor",
                            "vendors": errors,
                            "message": errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "),
                        }),
                    },
                })?;
            if common.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&comparison).expect("comparisons serialize")).map_err(io)?;
            } else {
                write_comparison(out, &comparison, &analysis).map_err(io)?;
            }
            Ok(())
        }
        Command::Simulate { file, catalog, month, seed, common } => {
            let analysis = load(&file, &common, err)?;
            let catalog = resolve_catalog(&catalog)?;
            let model = bind(&analysis.extraction.graph, &catalog).map_err(EstimateError::Unpriced)?;
            let assumptions = &analysis.extraction.assumptions;
            let analytic = monthly_cost(&model, assumptions, month)?;
            let simulated = simulate_month(&model, assumptions, month, seed)?;
            let diff: Vec<_> = simulated
                .nodes
                .iter()
                .flat_map(|n| &n.factors)
                .zip(analytic.nodes.iter().flat_map(|n| &n.factors))
                .map(|(s, a)| (s.factor.clone(), s.amount - a.amount))
                .collect();
            if common.json {
                let doc = json!({
                    "seed": seed,
                    "simulated": simulated,
                    "analytic_total": analytic.total,
                    "total_delta": simulated.total - analytic.total,
                    "delta": diff.iter().map(|(f, d)| json!({ "factor": f, "delta": d })).collect::<Vec<_>>(),
                });
                writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("documents serialize")).map_err(io)?;
            } else {
                write_report(out, &simulated).map_err(io)?;
                writeln!(out).map_err(io)?;
                writeln!(out, "analytic total {}   simulated - analytic {}", analytic.total, signed(simulated.total - analytic.total)).map_err(io)?;
                for (factor, delta) in diff.iter().filter(|(_, d)| *d != Micros::ZERO) {
                    writeln!(out, "  {factor:<44} {}", signed(*delta)).map_err(io)?;
                }
            }
            Ok(())
        }
        Command::Serve { listen, catalog_dir, ui_origin, snapshot } => {
            let config = ServiceConfig { listen, catalog_dir, ui_origin, snapshot };
            let runtime = tokio::runtime::Runtime::new().map_err(io)?;
            runtime
                .block_on(penny_service::serve(config, |addr| eprintln!("penny: listening on http://{addr}")))
                .map_err(|e| Failure::error("Serve", e))
        }
    }
}

fn signed(m: Micros) -> String {
    if m.0 >= 0 {
        format!("+{m}")
    } else {
        m.to_string()
    }
}

/// Parses `key=value` pairs; values are numbers, durations, booleans or text.
pub fn parse_assumptions(pairs: &[String]) -> Result<BTreeMap<String, Scalar>, String> {
    pairs
        .iter()
        .map(|pair| match pair.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), Scalar::parse_cli(v.trim()))),
            _ => Err(format!("expected KEY=VALUE, got `{pair}`")),
        })
        .collect()
}

fn read_assumption_file(path: &Path) -> Result<BTreeMap<String, Scalar>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::error("Io", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::error("InvalidAssumption", format!("{}: {e}", path.display())))
}

fn load(file: &Path, common: &Common, err: &mut dyn Write) -> Result<Analysis, Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| Failure::error("Io", format!("{}: {e}", file.display())))?;
    let mut overrides = match &common.assumptions {
        Some(path) => read_assumption_file(path)?,
        None => BTreeMap::new(),
    };
    overrides.extend(parse_assumptions(&common.assume).map_err(|m| Failure::error("InvalidAssumption", m))?);
    let analysis = analyze(&SourceFile::new(file, text), &overrides).map_err(|e| {
        let mut diagnostic = e.to_json();
        diagnostic["file"] = file.display().to_string().into();
        diagnostic["message"] = format!("{}: {}", file.display(), e).into();
        Failure { code: EXIT_ERROR, diagnostic }
    })?;
    gate_findings(&analysis.validation.findings, common, err)?;
    Ok(analysis)
}

/// Validation findings are warnings, or errors under `--strict`.
fn gate_findings(findings: &[Finding], common: &Common, err: &mut dyn Write) -> Result<(), Failure> {
    if findings.is_empty() {
        return Ok(());
    }
    if common.strict {
        return Err(Failure {
            code: EXIT_ERROR,
            diagnostic: json!({
                "error": "ValidationFailed",
                "findings": findings,
                "message": format!("{} validation finding(s): {}", findings.len(), findings.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; ")),
            }),
        });
    }
    for f in findings {
        let _ = if common.json {
            writeln!(err, "{}", json!({ "warning": "ValidationFinding", "finding": f }))
        } else {
            writeln!(err, "penny: warning: {f}")
        };
    }
    Ok(())
}

/// A catalog file, a bundled id, or an id in `PENNY_CATALOG_DIR`.
fn resolve_catalog(spec: &str) -> Result<PricingCatalog, Failure> {
    let fail = |e: penny_core::pricing::CatalogError| Failure::error("Catalog", e.to_string());
    let path = Path::new(spec);
    if path.exists() {
        return load_catalog(path).map_err(fail);
    }
    if let Some(dir) = std::env::var_os("PENNY_CATALOG_DIR") {
        let candidate = Path::new(&dir).join(format!("{spec}.json"));
        if candidate.exists() {
            return load_catalog(candidate).map_err(fail);
        }
    }
    match BUNDLED.iter().find(|(id, _)| *id == spec) {
        Some((_, text)) => parse_catalog(text).map_err(fail),
        None => Err(Failure::error("Catalog", format!("no catalog file or bundled catalog named `{spec}`"))),
    }
}

fn write_report(out: &mut dyn Write, report: &CostReport) -> std::io::Result<()> {
    writeln!(out, "{} {} · month {}", report.vendor_id, report.catalog_version, report.month)?;
    for node in &report.nodes {
        writeln!(out, "{:<24} {:>12} {:>16}  ({} calls)", node.label, "", node.subtotal.to_string(), format_decimal(&node.count))?;
        for f in &node.factors {
            writeln!(out, "  {:<22} {:>12} {:>16}", f.unit, format_decimal(&f.quantity), f.display)?;
        }
    }
    writeln!(out, "{:<24} {:>12} {:>16}", "total", "", report.total_display)
}

fn write_comparison(out: &mut dyn Write, comparison: &Comparison, analysis: &Analysis) -> std::io::Result<()> {
    write!(out, "{:<24}", "node")?;
    for v in &comparison.vendors {
        write!(out, " {:>16} {:>14}", format!("{}-{}", v.vendor_id, v.catalog_version), "delta")?;
    }
    writeln!(out)?;
    for node in &analysis.extraction.graph.nodes {
        write!(out, "{:<24}", node.label)?;
        for v in &comparison.vendors {
            let d = v.nodes.iter().find(|d| d.node == node.id);
            let (sub, delta) = d.map_or((Micros::ZERO, Micros::ZERO), |d| (d.subtotal, d.delta));
            write!(out, " {:>16} {:>14}", sub.to_string(), signed(delta))?;
        }
        writeln!(out)?;
    }
    write!(out, "{:<24}", "total")?;
    for v in &comparison.vendors {
        write!(out, " {:>16} {:>14}", v.total_display, signed(v.delta))?;
    }
    writeln!(out)
}
