//! The `orbit` command line: JSON-configured pipeline stages that read and
//! write OMT1 tensors, MRC maps and CSV traces, each leaving a manifest
//! that is enough to re-run it bit for bit.

pub mod config;
pub mod cryo_cmd;
pub mod error;
pub mod eval_cmd;
pub mod mra_cmd;
pub mod run;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

pub use error::{CliError, Result};
pub use run::{content_hash, Manifest, Run};

/// Default root for output directories.
pub const OUT_ENV: &str = "ORBIT_OUT";

#[derive(Debug, Parser)]
#[command(name = "orbit", version, about = "Method-of-moments reconstruction for MRA and cryo-EM")]
pub struct Cli {
    /// Output directory [default: $ORBIT_OUT/<command>, else runs/<command>]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every random stream of the run
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; outputs do not depend on it [default: 1, or the
    /// manifest's count for `rerun`]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// JSON config file
    #[arg(long, short)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate shifted noisy 1D observations and their moments
    SimulateMra(ConfigArg),
    /// Estimate or compute MRA moments
    MomentsMra(ConfigArg),
    /// Invert MRA moments through the eigendecomposition of m2
    InvertSpectral(ConfigArg),
    /// Draw a supervised dataset of (density, signal) pairs
    MakeDataset(ConfigArg),
    /// Train a density or signal encoder on a dataset
    TrainEncoder(ConfigArg),
    /// Refine encoders against measured MRA moments
    ReconMra(ConfigArg),
    /// Fit a neural volume to a known volume
    FitVolume(ConfigArg),
    /// Simulate projection images
    SimulateCryoem(ConfigArg),
    /// Estimate or compute 2D moments of projection images
    MomentsCryoem(ConfigArg),
    /// Reconstruct a volume from 2D moments
    ReconCryoem(ConfigArg),
    /// Fourier shell correlation and resolution of two volumes
    EvalFsc(ConfigArg),
    /// Aligned relative error of signals, volumes or moments
    EvalError(ConfigArg),
    /// Re-run a manifest and compare output hashes
    Rerun {
        /// manifest.json of an earlier run
        manifest: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimulateMra(_) => "simulate-mra",
            Command::MomentsMra(_) => "moments-mra",
            Command::InvertSpectral(_) => "invert-spectral",
            Command::MakeDataset(_) => "make-dataset",
            Command::TrainEncoder(_) => "train-encoder",
            Command::ReconMra(_) => "recon-mra",
            Command::FitVolume(_) => "fit-volume",
            Command::SimulateCryoem(_) => "simulate-cryoem",
            Command::MomentsCryoem(_) => "moments-cryoem",
            Command::ReconCryoem(_) => "recon-cryoem",
            Command::EvalFsc(_) => "eval-fsc",
            Command::EvalError(_) => "eval-error",
            Command::Rerun { .. } => "rerun",
        }
    }

    fn config(&self) -> Option<&Path> {
        match self {
            Command::SimulateMra(c)
            | Command::MomentsMra(c)
            | Command::InvertSpectral(c)
            | Command::MakeDataset(c)
            | Command::TrainEncoder(c)
            | Command::ReconMra(c)
            | Command::FitVolume(c)
            | Command::SimulateCryoem(c)
            | Command::MomentsCryoem(c)
            | Command::ReconCryoem(c)
            | Command::EvalFsc(c)
            | Command::EvalError(c) => Some(&c.config),
            Command::Rerun { .. } => None,
        }
    }
}

type Handler = fn(&mut Run, &Value) -> Result<Value>;

fn handler(command: &str) -> Option<Handler> {
    Some(match command {
        "simulate-mra" => mra_cmd::simulate,
        "moments-mra" => mra_cmd::moments,
        "invert-spectral" => mra_cmd::invert,
        "make-dataset" => mra_cmd::dataset,
        "train-encoder" => mra_cmd::train,
        "recon-mra" => mra_cmd::recon,
        "fit-volume" => cryo_cmd::fit,
        "simulate-cryoem" => cryo_cmd::simulate,
        "moments-cryoem" => cryo_cmd::moments,
        "recon-cryoem" => cryo_cmd::recon,
        "eval-fsc" => eval_cmd::fsc_cmd,
        "eval-error" => eval_cmd::error_cmd,
        _ => return None,
    })
}

/// Run one pipeline stage into `out` and write its manifest.
pub fn execute(command: &str, config: &Value, out: &Path, seed: u64, workers: usize) -> Result<Manifest> {
    let h = handler(command).ok_or_else(|| CliError::Schema(format!("unknown command `{command}`")))?;
    let mut run = Run::new(command, out.to_path_buf(), seed, workers)?;
    let resolved = h(&mut run, config)?;
    run.finish(resolved)
}

/// Differences between the outputs of a manifest and a re-run.
pub fn compare(expected: &Manifest, actual: &Manifest) -> Vec<String> {
    let mut diffs = Vec::new();
    for e in &expected.outputs {
        match actual.outputs.iter().find(|a| a.path == e.path) {
            None => diffs.push(format!("{}: not produced", e.path)),
            Some(a) if a.sha256 != e.sha256 => diffs.push(format!("{}: hash {} != {}", e.path, a.sha256, e.sha256)),
            Some(_) => {}
        }
    }
    for a in &actual.outputs {
        if !expected.outputs.iter().any(|e| e.path == a.path) {
            diffs.push(format!("{}: not in the manifest", a.path));
        }
    }
    diffs
}

/// Re-run the manifest at `path` into `out` and require identical outputs.
/// Inputs must still hash to their recorded values.
pub fn rerun(path: &Path, out: &Path, workers: Option<usize>) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let expected: Manifest = config::parse(&serde_json::from_str::<Value>(&text).map_err(|e| CliError::Schema(e.to_string()))?)?;
    for input in &expected.inputs {
        let now = run::hash_file(Path::new(&input.path))?;
        if now != input.sha256 {
            return Err(CliError::Io(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let actual = execute(&expected.command, &expected.config, out, expected.seed, workers.unwrap_or(expected.workers))?;
    let diffs = compare(&expected, &actual);
    if !diffs.is_empty() {
        return Err(CliError::Numerical(format!("re-run differs from the manifest:\n  {}", diffs.join("\n  "))));
    }
    Ok(actual)
}

fn default_out(command: &str) -> PathBuf {
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(command)
}

/// Parse-free entry point; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let name = cli.command.name();
    let out = cli.out.clone().unwrap_or_else(|| default_out(name));
    let mut config = Value::Null;
    let result = match &cli.command {
        Command::Rerun { manifest } => rerun(manifest, &out, cli.workers),
        cmd => config::load(cmd.config().expect("config command")).and_then(|c| {
            config = c;
            execute(name, &config, &out, cli.seed, cli.workers.unwrap_or(1))
        }),
    };
    match result {
        Ok(m) => {
            eprintln!("{name}: wrote {} files to {}", m.outputs.len(), out.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Numerical(_) = e {
                let diag = json!({ "command": name, "error": e.to_string(), "seed": cli.seed, "config": config });
                if std::fs::create_dir_all(&out).is_ok() {
                    let p = out.join(run::DIAGNOSTIC);
                    match serde_json::to_vec_pretty(&diag).map(|b| std::fs::write(&p, b)) {
                        Ok(Ok(())) => eprintln!("diagnostics written to {}", p.display()),
                        _ => eprintln!("could not write {}", p.display()),
                    }
                }
            }
            e.exit_code()
        }
    }
}
