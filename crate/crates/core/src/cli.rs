//! Command-line front end.
//!
//! ```text
//! ipdg1d run    --problem smooth|delta|delta-prime --k 2 --meshes 8,16,32
//! ipdg1d infsup --k 2 --meshes 8,16,32,64
//! ipdg1d check  --k 2 --seed 7
//! ```
//!
//! Exit codes: 0 success, 1 failed property or non-positive coercivity
//! constant, 2 configuration error, 3 source location on the skeleton.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{eoc, infsup_sweep, property_suite, CheckConfig, EocTable};
use crate::dgspace::DgSpace;
use crate::error::Error;
use crate::forms::{assemble_ip, PenaltyParams};
use crate::mesh::Mesh1D;
use crate::problems::{convergence_study, ErrorRecord, ProblemSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const DOMAIN: (f64, f64) = (0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Smooth,
    Delta,
    DeltaPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "ipdg1d", version, about = "Stabilized SIPG in 1D: convergence, inf-sup and property checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence study on uniform meshes.
    Run(Flags),
    /// Inf-sup, coercivity and continuity constants per mesh.
    Infsup(Flags),
    /// Property suite for the reconstructions and the inf-sup proof.
    Check(Flags),
}

/// Flags shared by all subcommands; unset flags fall back to `--config`,
/// then to the defaults.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flags {
    #[arg(long, value_enum)]
    pub problem: Option<Problem>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma1: Option<f64>,
    /// Comma-separated element counts, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub meshes: Option<Vec<usize>>,
    #[arg(long, allow_negative_numbers = true)]
    pub xbar: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file with any of these flags (kebab-case keys).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Writes the assembled matrices of every level in MatrixMarket format.
    #[arg(long)]
    pub dump_matrices: Option<PathBuf>,
    /// Records wall-clock solve times instead of `nan`.
    #[arg(long)]
    #[serde(default)]
    pub timings: bool,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: Problem,
    pub k: usize,
    pub sigma0: f64,
    pub sigma1: f64,
    pub meshes: Vec<usize>,
    pub xbar: f64,
    pub seed: u64,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub format: Format,
    #[serde(skip)]
    pub dump_matrices: Option<PathBuf>,
    pub timings: bool,
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => 2,
            Error::SkeletonCollision { .. } => 3,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 2,
            message: format!("i/o error: {e}"),
        }
    }
}

impl Flags {
    /// Merges `--config` underneath the command-line flags and validates.
    pub fn resolve(&self, command: &str) -> Result<RunConfig, Failure> {
        let file = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::config(format!("config: cannot read {}: {e}", p.display())))?;
                serde_json::from_str::<Flags>(&text).map_err(|e| Failure::config(format!("config: {e}")))?
            }
            None => Flags::default(),
        };
        let k = self.k.or(file.k).unwrap_or(2);
        let defaults = PenaltyParams::default_for(k);
        let cfg = RunConfig {
            problem: self.problem.or(file.problem).unwrap_or(Problem::Smooth),
            k,
            sigma0: self.sigma0.or(file.sigma0).unwrap_or(defaults.sigma0),
            sigma1: self.sigma1.or(file.sigma1).unwrap_or(defaults.sigma1),
            meshes: self
                .meshes
                .clone()
                .or(file.meshes)
                .unwrap_or_else(|| vec![8, 16, 32, 64]),
            xbar: self.xbar.or(file.xbar).unwrap_or(0.6366),
            seed: self.seed.or(file.seed).unwrap_or(7),
            output: self.output.clone().or(file.output),
            format: self.format.or(file.format).unwrap_or(Format::Csv),
            dump_matrices: self.dump_matrices.clone().or(file.dump_matrices),
            timings: self.timings || file.timings,
        };
        cfg.validate(command)?;
        Ok(cfg)
    }
}

impl RunConfig {
    fn validate(&self, command: &str) -> Result<(), Failure> {
        if self.meshes.is_empty() || self.meshes[0] == 0 {
            return Err(Failure::config("meshes: need at least one positive element count"));
        }
        if self.meshes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Failure::config("meshes: element counts must be strictly increasing"));
        }
        if self.k < 1 {
            return Err(Failure::config("k: must be at least 1"));
        }
        if self.k + 2 > crate::dgspace::MAX_DEGREE {
            return Err(Failure::config(format!("k: at most {}", crate::dgspace::MAX_DEGREE - 2)));
        }
        if command != "run" && self.k < 2 {
            return Err(Failure::config(format!(
                "k: {command} requires polynomial degree k >= 2, got {}",
                self.k
            )));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Failure::config("sigma0: must be positive"));
        }
        if !(self.sigma1 >= 0.0 && self.sigma1.is_finite()) {
            return Err(Failure::config("sigma1: must be nonnegative"));
        }
        if !(self.xbar > DOMAIN.0 && self.xbar < DOMAIN.1) {
            return Err(Failure::config("xbar: must lie strictly inside (0, 1)"));
        }
        Ok(())
    }

    pub fn params(&self) -> PenaltyParams {
        PenaltyParams {
            sigma0: self.sigma0,
            sigma1: self.sigma1,
        }
    }

    pub fn header(&self) -> String {
        format!(
            "# k={} sigma0={} sigma1={} xbar={} seed={} version={}",
            self.k, self.sigma0, self.sigma1, self.xbar, self.seed, VERSION
        )
    }

    fn spec(&self) -> ProblemSpec {
        match self.problem {
            Problem::Smooth => ProblemSpec::sine(DOMAIN),
            Problem::Delta => ProblemSpec::delta(self.xbar),
            Problem::DeltaPrime => ProblemSpec::delta_prime(self.xbar),
        }
    }

    fn dump(&self) -> Result<(), Failure> {
        if let Some(dir) = &self.dump_matrices {
            for &n in &self.meshes {
                let space = DgSpace::new(Mesh1D::uniform(n, DOMAIN)?, self.k)?;
                assemble_ip(&space, self.params()).dump_matrix_market(dir, &format!("n{n}_"))?;
            }
        }
        Ok(())
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "nan".into())
}

fn csv_text(header: &str, columns: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output");
    format!("{header}\n{body}")
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), Failure> {
    match &cfg.output {
        Some(p) => write_file(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_file(p: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(p, text)?;
    Ok(())
}

/// Convergence rows with the EOC columns, as written by `run`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    #[serde(flatten)]
    pub errors: ErrorRecord,
    pub eoc_znorm: Option<f64>,
    pub eoc_l2: Option<f64>,
}

pub fn run_rows(cfg: &RunConfig) -> Result<Vec<RunRow>, Failure> {
    let mut recs = convergence_study(&cfg.spec(), &cfg.meshes, DOMAIN, cfg.k, cfg.params())?;
    if !cfg.timings {
        recs.iter_mut().for_each(|r| r.solve_seconds = f64::NAN);
    }
    let table = |pick: fn(&ErrorRecord) -> f64| -> Result<EocTable, Failure> {
        Ok(eoc(&recs.iter().map(|r| (r.h_max, pick(r))).collect::<Vec<_>>())?)
    };
    let tz = table(|r| r.err_znorm)?;
    let tl = table(|r| r.err_l2)?;
    Ok(recs
        .iter()
        .zip(tz.rows.iter().zip(&tl.rows))
        .map(|(r, (z, l))| RunRow {
            errors: *r,
            eoc_znorm: z.eoc,
            eoc_l2: l.eoc,
        })
        .collect())
}

pub const RUN_COLUMNS: [&str; 10] = [
    "n_elements",
    "h_max",
    "dofs",
    "err_znorm",
    "err_enorm",
    "err_eenorm",
    "err_l2",
    "eoc_znorm",
    "eoc_l2",
    "solve_seconds",
];

pub const INFSUP_COLUMNS: [&str; 6] = [
    "n_elements",
    "h_max",
    "gamma_V",
    "gamma_W",
    "lambda_coercivity",
    "sigma_max_continuity",
];

pub fn cmd_run(cfg: &RunConfig) -> Result<String, Failure> {
    cfg.dump()?;
    let rows = run_rows(cfg)?;
    Ok(match cfg.format {
        Format::Csv => csv_text(
            &cfg.header(),
            &RUN_COLUMNS,
            rows.iter()
                .map(|r| {
                    let e = &r.errors;
                    vec![
                        e.n_elements.to_string(),
                        num(e.h_max),
                        e.dofs.to_string(),
                        num(e.err_znorm),
                        num(e.err_enorm),
                        num(e.err_eenorm),
                        num(e.err_l2),
                        opt(r.eoc_znorm),
                        opt(r.eoc_l2),
                        num(e.solve_seconds),
                    ]
                })
                .collect(),
        ),
        Format::Json => json(cfg, &rows),
    })
}

fn json<T: Serialize>(cfg: &RunConfig, rows: &T) -> String {
    let v = serde_json::json!({ "config": cfg, "version": VERSION, "rows": rows });
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

/// Returns the report and whether every level was coercive.
pub fn cmd_infsup(cfg: &RunConfig) -> Result<(String, bool), Failure> {
    cfg.dump()?;
    let report = infsup_sweep(&cfg.meshes, DOMAIN, cfg.k, cfg.params())?;
    let coercive = report.levels.iter().all(|l| l.lambda_coercivity > 0.0);
    let text = match cfg.format {
        Format::Csv => csv_text(
            &cfg.header(),
            &INFSUP_COLUMNS,
            report
                .levels
                .iter()
                .map(|l| {
                    vec![
                        l.n_elements.to_string(),
                        num(l.h_max),
                        num(l.gamma_v),
                        num(l.gamma_w),
                        num(l.lambda_coercivity),
                        num(l.sigma_max_continuity),
                    ]
                })
                .collect(),
        ),
        Format::Json => json(cfg, &report),
    };
    Ok((text, coercive))
}

/// Returns the report and the names of failing properties.
pub fn cmd_check(cfg: &RunConfig) -> Result<(String, Vec<String>), Failure> {
    let check = CheckConfig {
        k: cfg.k,
        params: cfg.params(),
        meshes: cfg.meshes.clone(),
        domain: DOMAIN,
        seed: cfg.seed,
        samples: 100,
    };
    let (levels, results) = property_suite(&check)?;
    let failed = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} (observed {})", r.property, num(r.observed)))
        .collect();
    let text = match cfg.format {
        Format::Csv => csv_text(
            &cfg.header(),
            &["property", "status", "observed", "bound", "detail"],
            results
                .iter()
                .map(|r| {
                    vec![
                        r.property.clone(),
                        if r.passed { "PASS" } else { "FAIL" }.into(),
                        num(r.observed),
                        num(r.bound),
                        r.detail.clone(),
                    ]
                })
                .collect(),
        ),
        Format::Json => json(cfg, &serde_json::json!({ "levels": levels, "properties": results })),
    };
    Ok((text, failed))
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: &Command) -> Result<(), Failure> {
    match command {
        Command::Run(flags) => {
            let cfg = flags.resolve("run")?;
            emit(&cfg, &cmd_run(&cfg)?)
        }
        Command::Infsup(flags) => {
            let cfg = flags.resolve("infsup")?;
            let (text, coercive) = cmd_infsup(&cfg)?;
            emit(&cfg, &text)?;
            if coercive {
                Ok(())
            } else {
                Err(Failure {
                    code: 1,
                    message: format!(
                        "lambda_coercivity <= 0 for sigma0 = {}; increase sigma0 (default 10 k^2)",
                        cfg.sigma0
                    ),
                })
            }
        }
        Command::Check(flags) => {
            let cfg = flags.resolve("check")?;
            let (text, failed) = cmd_check(&cfg)?;
            emit(&cfg, &text)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure {
                    code: 1,
                    message: format!("failed properties: {}", failed.join(", ")),
                })
            }
        }
    }
}
