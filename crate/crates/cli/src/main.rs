mod config;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;
use trisim_core::Error as CoreError;

use config::{find_preset, Settings, PRESETS};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(CoreError::InvalidParameter(_)) => 2,
            CliError::Core(
                CoreError::Convergence { .. }
                | CoreError::Leakage { .. }
                | CoreError::StepUnderflow { .. }
                | CoreError::Degenerate(_),
            ) => 3,
            _ => 1,
        }
    }
}

/// Run a preset or ad-hoc experiment and write its tables and metadata.
#[derive(Parser, Debug)]
#[command(name = "trisim", version)]
struct Args {
    /// Named preset (see --list-presets).
    #[arg(long)]
    preset: Option<String>,
    /// Override a parameter; repeatable. Without a preset, `kind=` is required.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_kv)]
    set: Vec<(String, String)>,
    /// Output root; results go to <out>/<preset or kind>/.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel scans.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    list_presets: bool,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_presets {
        for p in PRESETS {
            println!("{:<22} {:<14} {}", p.name, p.kind.name(), p.description);
        }
        return ExitCode::SUCCESS;
    }
    let settings = match resolve(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let label = args
        .preset
        .clone()
        .unwrap_or_else(|| settings.kind.name().to_string());
    let dir = args.out.join(&label);
    match execute(&args, &settings, &dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            if code == 3 {
                let diag = json!({ "preset": args.preset, "kind": settings.kind.name(), "error": e.to_string() });
                let written = fs::create_dir_all(&dir)
                    .and_then(|_| fs::write(dir.join("diagnostic.json"), pretty(&diag)));
                if let Err(io) = written {
                    eprintln!("error: could not write diagnostic: {io}");
                }
            }
            ExitCode::from(code)
        }
    }
}

fn resolve(args: &Args) -> Result<Settings, CliError> {
    let preset = match &args.preset {
        Some(name) => Some(
            find_preset(name).ok_or_else(|| CliError::Usage(format!("unknown preset '{name}'")))?,
        ),
        None => None,
    };
    if args.threads == Some(0) {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    Settings::resolve(preset, &args.set)
}

fn execute(args: &Args, settings: &Settings, dir: &Path) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    fs::create_dir_all(dir)?;
    let start = Instant::now();
    let out = run::run(settings, dir)?;
    let meta = json!({
        "preset": args.preset,
        "kind": settings.kind.name(),
        "config": settings.values,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
        "outputs": out.files,
        "diagnostics": out.diagnostics,
    });
    fs::write(dir.join("meta.json"), pretty(&meta))?;
    Ok(())
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values always serialize") + "\n"
}
