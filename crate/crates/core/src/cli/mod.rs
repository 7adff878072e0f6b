//! The `gexpect` command-line front end.
//!
//! Every run resolves its settings (flags over config file over defaults),
//! executes one command, writes its artifacts to the output directory and
//! records a [`RunManifest`] next to them. `gexpect replay` reruns a
//! manifest and compares every numeric output bitwise.

mod commands;
mod settings;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use commands::{discrete_checks, holder_groups, parse_payoff, CommandOutput};
pub use settings::{
    CertifySettings, CylinderSettings, DiscreteSettings, GheatSettings, HolderSettings, McSettings, Settings,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DEFAULT_OUT_DIR: &str = "gexpect-out";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "gexpect", version, about = "Sublinear expectations of G-Brownian motion functionals")]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for CSV/JSON artifacts and the run manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// TOML config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upper expectations, capacities and membership on finite models.
    Discrete(settings::DiscreteArgs),
    /// G-heat equation value at a probe point.
    Gheat(settings::GheatArgs),
    /// Cylinder payoff by backward dynamic programming.
    Cylinder(settings::CylinderArgs),
    /// Monte Carlo under volatility-controlled paths.
    Mc(settings::McArgs),
    /// Empirical Hölder statistics of simulated paths.
    Holder(settings::HolderArgs),
    /// Payoff expression tools.
    Payoff {
        #[command(subcommand)]
        action: PayoffCommand,
    },
    /// Reruns a manifest and compares its outputs bitwise.
    Replay(ReplayArgs),
}

#[derive(Debug, Subcommand)]
pub enum PayoffCommand {
    /// Bound and Lipschitz estimates over a box.
    Certify(settings::CertifyArgs),
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_seconds: f64,
}

/// Everything needed to rerun a command bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved settings, defaults included.
    pub config: Settings,
    pub seed: u64,
    pub threads: usize,
    pub versions: BTreeMap<String, String>,
    pub timings: Timings,
    /// Artifact file names relative to the output directory.
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("gexpect".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("manifest".to_string(), "1".to_string()),
    ])
}

/// Exit code for an error: usage and configuration problems are 2.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::Config(_) | Error::Parse { .. } => EXIT_USAGE,
        Error::Numerical { .. } | Error::Precondition(_) => EXIT_CHECK_FAILED,
    }
}

/// Parses `argv` and runs it; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    if let Command::Replay(r) = &cli.command {
        return replay(&r.manifest, cli.out_dir.as_deref(), cli.threads);
    }
    let file = match &cli.config {
        Some(p) => Some(settings::ConfigFile::load(p)?),
        None => None,
    };
    let seed = cli.seed.or(file.as_ref().and_then(|f| f.seed)).unwrap_or(0);
    let threads = cli
        .threads
        .or(file.as_ref().and_then(|f| f.threads))
        .unwrap_or_else(rayon::current_num_threads);
    let out_dir = cli
        .out_dir
        .clone()
        .or(file.as_ref().and_then(|f| f.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let resolved = settings::resolve(&cli.command, file.as_ref())?;
    let manifest = execute(&resolved, seed, threads, &out_dir)?;
    Ok(manifest.exit_code)
}

/// Runs resolved settings, writes artifacts and the manifest, prints the
/// summary.
pub fn execute(config: &Settings, seed: u64, threads: usize, out_dir: &Path) -> Result<RunManifest> {
    if threads == 0 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let out = pool.install(|| commands::run_command(config, seed))?;
    let wall_seconds = start.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir).map_err(|e| Error::Config(format!("{}: {e}", out_dir.display())))?;
    let mut outputs = Vec::new();
    for (name, bytes) in &out.files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        outputs.push(name.clone());
    }
    let manifest = RunManifest {
        command: config.name().to_string(),
        config: config.clone(),
        seed,
        threads,
        versions: versions(),
        timings: Timings { wall_seconds },
        outputs,
        results: out.results,
        exit_code: if out.passed { EXIT_OK } else { EXIT_CHECK_FAILED },
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for line in &out.summary {
        println!("{line}");
    }
    Ok(manifest)
}

/// Reruns `manifest_path` into `out_dir` (default: `replay/` beside the
/// manifest) and compares results and artifacts byte for byte.
pub fn replay(manifest_path: &Path, out_dir: Option<&Path>, threads: Option<usize>) -> Result<i32> {
    let original = RunManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let target = out_dir.map(Path::to_path_buf).unwrap_or_else(|| base.join("replay"));
    if target == base {
        return Err(Error::Config("replay output directory must differ from the original".into()));
    }
    let rerun = execute(
        &original.config,
        original.seed,
        threads.unwrap_or(original.threads),
        &target,
    )?;
    let mut mismatches = Vec::new();
    if serde_json::to_string(&original.results).ok() != serde_json::to_string(&rerun.results).ok() {
        mismatches.push("results".to_string());
    }
    if original.outputs != rerun.outputs {
        mismatches.push("output list".to_string());
    }
    for name in &original.outputs {
        let a = fs::read(base.join(name));
        let b = fs::read(target.join(name));
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => mismatches.push(name.clone()),
        }
    }
    if mismatches.is_empty() {
        println!("replay identical ({} outputs)", original.outputs.len());
        Ok(EXIT_OK)
    } else {
        println!("replay differs: {}", mismatches.join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}
