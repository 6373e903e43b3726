use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use selftest::bounds::{certify, CertificationReport, DEFAULT_CERT_TOL};
use selftest::explorer::{canonical_device, sweep, worst_case_search, FamilySpec, SearchConfig, SearchOutcome, SearchSpace, SweepRecord};
use selftest::Mode;

use crate::document::{load_device, sha256_hex, to_json, write_atomic, DeviceDocument, ReportDocument};
use crate::table::{parse_table, table_report};
use crate::{CliError, EXIT_FAIL, EXIT_OK};

pub const THREADS_ENV: &str = "SELFTEST_THREADS";

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Chsh,
    My,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Chsh => Mode::Chsh,
            ModeArg::My => Mode::MayersYao,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SpaceArg {
    Tilted,
    General,
}

#[derive(Debug, Parser)]
#[command(name = "selftest", version, about = "Robust self-testing of the singlet from CHSH and Mayers-Yao correlations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify a device document and write a report.
    Certify {
        #[arg(long)]
        device: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CERT_TOL)]
        cert_tol: f64,
    },
    /// Budgets and bounds from a correlation table alone.
    Correlations {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a device family and write one CSV row per point.
    Sweep {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded search for the largest extraction error under an ε ceiling.
    Search {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        epsilon_ceiling: f64,
        #[arg(long, value_parser = parse_dims, default_value = "2,2")]
        dims: (usize, usize),
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "general")]
        space: SpaceArg,
        /// Output directory for device.json and report.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit the ideal device document of a test.
    Canonical {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split([',', 'x']).map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.parse().map_err(|e| format!("dims: {e}"))?,
            b.parse().map_err(|e| format!("dims: {e}"))?,
        )),
        _ => Err(format!("expected dims as `dA,dB`, got `{s}`")),
    }
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`"))),
        _ => Ok(0),
    }
}

fn summarize(report: &CertificationReport) {
    let total = report.rows().count();
    let failures = report.failures();
    println!(
        "mode {} | epsilon {:.6e} | rows {} | pass {} | fail {}",
        report.mode,
        report.epsilon,
        total,
        total - failures.len(),
        failures.len()
    );
    if let Some(max) = report.max_extraction_error() {
        println!("max extraction error {:.6e} (bound {:.6e})", max, report.extraction[0].bound);
    }
    if let Some(note) = &report.degenerate {
        println!("degenerate extraction: {note}");
    }
    for row in failures {
        println!(
            "FAIL {} [{}]: measured {:?} vs bound {:.6e}",
            row.name, row.anchor, row.measured, row.bound
        );
    }
    println!("{}", report.fidelity_comparison);
}

fn verdict(pass: bool) -> i32 {
    if pass {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

pub fn cmd_certify(device: &Path, mode: Mode, out: &Path, cert_tol: f64) -> Result<i32, CliError> {
    if !(cert_tol >= 0.0) {
        return Err(CliError::Usage(format!("--cert-tol must be nonnegative, got {cert_tol}")));
    }
    let loaded = load_device(device)?;
    let report = certify(&loaded.model, mode, cert_tol)?;
    write_atomic(out, &to_json(&ReportDocument::new(&report, loaded.digest))?)?;
    summarize(&report);
    Ok(verdict(report.all_pass()))
}

pub fn cmd_correlations(table: &Path, mode: Mode, out: Option<&Path>) -> Result<i32, CliError> {
    let bytes = fs::read(table).map_err(|e| CliError::Io(format!("{}: {e}", table.display())))?;
    let report = table_report(&parse_table(&bytes)?, mode)?;
    let json = to_json(&report)?;
    match out {
        Some(path) => write_atomic(path, &json)?,
        None => print!("{}", String::from_utf8_lossy(&json)),
    }
    Ok(EXIT_OK)
}

fn csv_number(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(spec: &FamilySpec, records: &[SweepRecord]) -> Result<Vec<u8>, CliError> {
    let names: Vec<&String> = spec.parameters.keys().collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    header.extend(["epsilon", "eps1", "eps2", "maxError", "bound", "slack"].map(String::from));
    let io = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    w.write_record(&header).map_err(io)?;
    for r in records {
        let mut row: Vec<String> = names.iter().map(|n| csv_number(r.parameters.get(*n).copied())).collect();
        row.extend([
            csv_number(Some(r.epsilon)),
            csv_number(Some(r.measured_eps1)),
            csv_number(Some(r.measured_eps2)),
            csv_number(r.max_extraction_error),
            csv_number(Some(r.theorem1_bound)),
            csv_number(r.slack),
        ]);
        w.write_record(&row).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(format!("csv: {e}")))
}

pub fn cmd_sweep(family: &Path, out: &Path) -> Result<i32, CliError> {
    let bytes = fs::read(family).map_err(|e| CliError::Io(format!("{}: {e}", family.display())))?;
    let spec: FamilySpec =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Parse(format!("family spec: {e}")))?;
    let records = sweep(&spec, threads_from_env()?)?;
    write_atomic(out, &sweep_csv(&spec, &records)?)?;
    let failing = records.iter().filter(|r| !r.all_pass).count();
    println!("{} points, {} with failing rows", records.len(), failing);
    Ok(verdict(failing == 0))
}

pub fn cmd_search(cfg: &SearchConfig, out: &Path) -> Result<i32, CliError> {
    match worst_case_search(cfg)? {
        SearchOutcome::Found { device, record, evaluations } => {
            let mut metadata = BTreeMap::new();
            metadata.insert("source".to_string(), serde_json::json!("worst-case search"));
            metadata.insert("seed".to_string(), serde_json::json!(cfg.seed));
            metadata.insert("evaluations".to_string(), serde_json::json!(evaluations));
            metadata.insert("epsilonCeiling".to_string(), serde_json::json!(cfg.epsilon_ceiling));
            let device_bytes = to_json(&DeviceDocument::from_model(&device, metadata))?;
            let report = certify(&device, cfg.mode, DEFAULT_CERT_TOL)?;
            let report_bytes = to_json(&ReportDocument::new(&report, sha256_hex(&device_bytes)))?;
            fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            write_atomic(&out.join("device.json"), &device_bytes)?;
            write_atomic(&out.join("report.json"), &report_bytes)?;
            println!(
                "best epsilon {:.6e} | max extraction error {:.6e} | bound {:.6e} | slack {:.6e}",
                record.epsilon,
                record.max_extraction_error.unwrap_or(f64::NAN),
                record.theorem1_bound,
                record.slack.unwrap_or(f64::NAN)
            );
            Ok(verdict(report.all_pass()))
        }
        SearchOutcome::NotFound { evaluations, smallest_epsilon } => {
            println!(
                "no feasible device in {evaluations} evaluations (smallest epsilon {smallest_epsilon:.6e} above ceiling {})",
                cfg.epsilon_ceiling
            );
            Ok(EXIT_FAIL)
        }
    }
}

pub fn cmd_canonical(mode: Mode, out: &Path) -> Result<i32, CliError> {
    let mut metadata = BTreeMap::new();
    metadata.insert("source".to_string(), serde_json::json!(format!("canonical {mode} device")));
    write_atomic(out, &to_json(&DeviceDocument::from_model(&canonical_device(mode), metadata))?)?;
    Ok(EXIT_OK)
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Certify { device, mode, out, cert_tol } => cmd_certify(&device, mode.into(), &out, cert_tol),
        Command::Correlations { table, mode, out } => cmd_correlations(&table, mode.into(), out.as_deref()),
        Command::Sweep { family, out } => cmd_sweep(&family, &out),
        Command::Search {
            mode,
            epsilon_ceiling,
            dims,
            budget,
            seed,
            space,
            out,
        } => {
            let mut cfg = SearchConfig::new(mode.into(), epsilon_ceiling, dims, budget, seed);
            cfg.space = match space {
                SpaceArg::Tilted => SearchSpace::Tilted,
                SpaceArg::General => SearchSpace::General,
            };
            cmd_search(&cfg, &out)
        }
        Command::Canonical { mode, out } => cmd_canonical(mode.into(), &out),
    }
}
