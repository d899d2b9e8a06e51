//! Experiment runner behind the `rwre` binary.
//!
//! [`run`] reads a config, executes one command on a dedicated worker pool
//! and writes `report.json`, `samples.csv`, `cdf.csv` and `manifest.json` into
//! the output directory. Result files never contain timestamps, so rerunning
//! a manifest reproduces them byte for byte.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rwre::harness::{self, Centering, ExperimentConfig, Verdict};
use rwre::{ErrorClass, RwreError};
use serde::Serialize;
use serde_json::json;

use crate::config::{ResolvedSeeds, SEED_ENV_VAR};
use crate::output::{
    csv_bytes, json_bytes, write_file, RunManifest, CDF_FILE, CDF_HEADER, MANIFEST_FILE, REPORT_FILE, SAMPLES_FILE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ELIGIBILITY: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_GUARD: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{kind}: {source}", kind = .source.kind())]
    Experiment {
        #[from]
        source: RwreError,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Experiment { source } => class_exit_code(source.class()),
        }
    }
}

pub fn class_exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Eligibility => EXIT_ELIGIBILITY,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::GuardBreach => EXIT_GUARD,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Analyze,
    CltHitting,
    CltPosition,
    Lln,
    Diagnostics,
    OracleCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Analyze => "analyze",
            Command::CltHitting => "clt-hitting",
            Command::CltPosition => "clt-position",
            Command::Lln => "lln",
            Command::Diagnostics => "diagnostics",
            Command::OracleCheck => "oracle-check",
        }
    }

    pub fn samples_header(self) -> &'static [&'static str] {
        match self {
            Command::Simulate => &["replica", "hitting_time", "position"],
            Command::Analyze => &["n", "ratio", "max_share"],
            Command::CltHitting | Command::CltPosition => &["replica", "raw", "standardized"],
            Command::Lln => &["kind", "scale", "ratio", "relative_error"],
            Command::Diagnostics => &["env_seed", "t", "x", "rel1", "rel2", "rel13"],
            Command::OracleCheck => &["k", "mu_series", "mu_oracle", "sigma2_series", "sigma2_oracle"],
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub centering: Option<Centering>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    pub manifest: RunManifest,
}

struct Artifacts {
    report: serde_json::Value,
    samples: Vec<u8>,
    cdf: Vec<u8>,
    verdict: Option<Verdict>,
}

#[derive(Serialize)]
struct LlnRow {
    kind: &'static str,
    scale: u64,
    ratio: Option<f64>,
    relative_error: Option<f64>,
}

#[derive(Serialize)]
struct RelRow {
    env_seed: u64,
    t: u64,
    x: f64,
    rel1: f64,
    rel2: f64,
    rel13: f64,
}

fn empty_cdf() -> Result<Vec<u8>, CliError> {
    csv_bytes::<()>(&CDF_HEADER, &[])
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let header = command.samples_header();
    Ok(match command {
        Command::Simulate => {
            let r = harness::simulate(cfg)?;
            Artifacts {
                samples: csv_bytes(header, &r.rows)?,
                cdf: empty_cdf()?,
                report: to_value(&r),
                verdict: None,
            }
        }
        Command::Analyze => {
            let r = harness::analyze(cfg)?;
            Artifacts {
                samples: csv_bytes(header, &r.variance_ratio.points)?,
                cdf: empty_cdf()?,
                verdict: Some(r.variance_ratio.verdict),
                report: to_value(&r),
            }
        }
        Command::CltHitting | Command::CltPosition => {
            let r = if command == Command::CltHitting {
                harness::clt_hitting(cfg)?
            } else {
                harness::clt_position(cfg)?
            };
            Artifacts {
                samples: csv_bytes(header, &r.samples)?,
                cdf: csv_bytes(&CDF_HEADER, &r.cdf)?,
                verdict: Some(r.verdict),
                report: to_value(&r),
            }
        }
        Command::Lln => {
            let r = harness::lln_check(cfg)?;
            let rows: Vec<LlnRow> = r
                .hitting
                .iter()
                .map(|p| ("hitting", p))
                .chain(r.position.iter().map(|p| ("position", p)))
                .map(|(kind, p)| LlnRow {
                    kind,
                    scale: p.scale,
                    ratio: p.ratio,
                    relative_error: p.relative_error,
                })
                .collect();
            Artifacts {
                samples: csv_bytes(header, &rows)?,
                cdf: empty_cdf()?,
                verdict: Some(r.verdict),
                report: to_value(&r),
            }
        }
        Command::Diagnostics => {
            let rel = harness::rel_diagnostics(cfg)?;
            let variance = harness::variance_ratio_check(cfg)?;
            let coupling = harness::coupling_identity_check(cfg)?;
            let rows: Vec<RelRow> = rel
                .seeds
                .iter()
                .flat_map(|s| {
                    s.rel.iter().map(move |p| RelRow {
                        env_seed: s.env_seed,
                        t: p.t,
                        x: p.x,
                        rel1: p.rel1,
                        rel2: p.rel2,
                        rel13: p.rel13,
                    })
                })
                .collect();
            let ok = rel.verdict.passed() && variance.verdict.passed() && coupling.verdict.passed();
            Artifacts {
                samples: csv_bytes(header, &rows)?,
                cdf: empty_cdf()?,
                verdict: Some(Verdict::from_bool(ok)),
                report: json!({
                    "diagnostics": to_value(&rel),
                    "variance_ratio": to_value(&variance),
                    "coupling": to_value(&coupling),
                }),
            }
        }
        Command::OracleCheck => {
            let r = harness::oracle_check(cfg)?;
            Artifacts {
                samples: csv_bytes(header, &r.sites_table)?,
                cdf: empty_cdf()?,
                verdict: Some(r.verdict),
                report: to_value(&r),
            }
        }
    })
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Loads the config, resolves seeds and fills in defaults.
pub fn prepare(opts: &RunOptions) -> Result<(ExperimentConfig, ResolvedSeeds, config::RunConfig), CliError> {
    let run = config::load(&opts.config)?;
    let env_seed = std::env::var(SEED_ENV_VAR).ok();
    let seeds = config::resolve_seeds(&run.seeds, opts.seed, env_seed.as_deref())?;
    let mut cfg = config::experiment(&run, &seeds)?;
    if let Some(c) = opts.centering {
        cfg.centering = c;
    }
    cfg.validate()?;
    let snapshot = config::snapshot(&cfg, &seeds);
    Ok((cfg, seeds, snapshot))
}

/// Runs one command. Failures before the experiment starts (unreadable or
/// invalid config) are returned as errors; failures of the experiment itself
/// are recorded in `report.json` and reflected in the exit code.
pub fn run(opts: &RunOptions) -> Result<Outcome, CliError> {
    let (cfg, seeds, snapshot) = prepare(opts)?;
    std::fs::create_dir_all(&opts.out).map_err(|e| CliError::Io(format!("{}: {e}", opts.out.display())))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Io(format!("worker pool: {e}")))?;
    let started_at = timestamp();
    let clock = Instant::now();
    let result = pool.install(|| execute(opts.command, &cfg));
    let wall_clock_seconds = clock.elapsed().as_secs_f64();
    let finished_at = timestamp();

    let (artifacts, exit_code, error) = match result {
        Ok(a) => (a, EXIT_OK, None),
        Err(e) => {
            let (kind, class) = match &e {
                CliError::Experiment { source } => (source.kind(), Some(source.class())),
                CliError::Io(_) => ("Io", None),
                CliError::Config(_) => ("Config", None),
            };
            let report = json!({
                "kind": kind,
                "class": class.map(|c| format!("{c:?}").to_lowercase()),
                "message": e.to_string(),
            });
            let a = Artifacts {
                report,
                samples: csv_bytes::<()>(opts.command.samples_header(), &[])?,
                cdf: empty_cdf()?,
                verdict: None,
            };
            (a, e.exit_code(), Some(e.to_string()))
        }
    };
    let status = if error.is_none() { "ok" } else { "error" };
    let envelope = if error.is_none() {
        json!({ "command": opts.command.name(), "status": status, "report": artifacts.report })
    } else {
        json!({ "command": opts.command.name(), "status": status, "error": artifacts.report })
    };
    let files = vec![
        write_file(&opts.out, REPORT_FILE, &json_bytes(&envelope))?,
        write_file(&opts.out, SAMPLES_FILE, &artifacts.samples)?,
        write_file(&opts.out, CDF_FILE, &artifacts.cdf)?,
    ];
    let manifest = RunManifest {
        tool: "rwre".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: opts.command.name().into(),
        config: snapshot,
        seeds,
        workers: pool.current_num_threads(),
        started_at,
        finished_at,
        wall_clock_seconds,
        exit_code,
        files,
    };
    write_file(&opts.out, MANIFEST_FILE, &json_bytes(&manifest))?;
    Ok(Outcome {
        exit_code,
        out_dir: opts.out.clone(),
        verdict: artifacts.verdict,
        error,
        manifest,
    })
}

/// `run`, with every failure mapped to an exit code.
pub fn run_to_exit_code(opts: &RunOptions) -> (i32, Option<Outcome>) {
    match run(opts) {
        Ok(o) => (o.exit_code, Some(o)),
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), None)
        }
    }
}

/// Path of a file inside a run directory.
pub fn artifact(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
