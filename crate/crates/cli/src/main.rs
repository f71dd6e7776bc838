//! `herald`: run, sweep and analyze heralded-noise cluster-state ensembles.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use herald_core::harness::{
    cmd_analyze, cmd_chiral, cmd_exact, cmd_meanfield, cmd_run, cmd_sweep, preset, Config, KEYS,
};
use herald_core::HarnessError;

#[derive(Parser)]
#[command(name = "herald", version, about = "Heralded-noise cluster-state population dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Settings shared by every subcommand. Later sources win:
/// preset, then config file, then the typed flags, then `--set`.
#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from a named preset (quick | full).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Override one key, e.g. `--set eta=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trajectory count.
    #[arg(long, global = true)]
    traj: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// as-published | full-channel
    #[arg(long, global = true)]
    semantics: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble time series for every (L, eta) cell.
    Run,
    /// Steady-state phase diagram over eta and f_e grids.
    Sweep,
    /// Mean-field steady states over eta and f_e grids.
    Meanfield,
    /// Exact generator spectra for small L.
    Exact,
    /// Critical point and exponents from ensemble files.
    Analyze {
        /// Directory of ensemble CSV files.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Chiral-drift protocol over a mu grid.
    Chiral,
    /// List the config keys.
    Keys,
}

fn build_config(c: &Common) -> Result<Config, HarnessError> {
    let mut cfg = match &c.preset {
        Some(name) => preset(name)?,
        None => Config::default(),
    };
    if let Some(path) = &c.config {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Input { path: path.display().to_string(), msg: e.to_string() })?;
        cfg = cfg.overlay(&Config::parse(&text)?);
    }
    if let Some(v) = c.seed {
        cfg.set_value("seed", v)?;
    }
    if let Some(v) = c.traj {
        cfg.set_value("traj", v)?;
    }
    if let Some(v) = c.threads {
        cfg.set_value("threads", v)?;
    }
    if let Some(v) = &c.semantics {
        cfg.set_value("semantics", v)?;
    }
    for kv in &c.set {
        cfg.set(kv)?;
    }
    Ok(cfg)
}

fn show(path: &Path) {
    println!("{}", path.display());
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    if let Command::Keys = cli.command {
        for (k, help) in KEYS {
            println!("{k:<12} {help}");
        }
        return Ok(());
    }
    let mut cfg = build_config(&cli.common)?;
    let out = &cli.common.out;
    match cli.command {
        Command::Run => cmd_run(&cfg, out)?.iter().for_each(|p| show(p)),
        Command::Sweep => show(&cmd_sweep(&cfg, out)?),
        Command::Meanfield => show(&cmd_meanfield(&cfg, out)?),
        Command::Exact => show(&cmd_exact(&cfg, out)?),
        Command::Analyze { input } => {
            if let Some(dir) = input {
                cfg.set_value("input", dir.display())?;
            }
            let (path, fit) = cmd_analyze(&cfg, out)?;
            if let Some(e) = fit.eta_c {
                log::info!("eta_c = {} +- {}", e.value, e.err);
            }
            show(&path);
        }
        Command::Chiral => show(&cmd_chiral(&cfg, out)?.0),
        Command::Keys => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
