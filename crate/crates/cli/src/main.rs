use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use steposc_cli::config::ExperimentConfig;
use steposc_cli::presets::{preset, preset_names, PresetStep};
use steposc_cli::runner::{self, RunError};

/// Numerical laboratory for the 2D step oscillator: classical impact
/// dynamics, EBK ladders, finite-difference spectra, level statistics and
/// wavefunction-concentration diagnostics.
#[derive(Parser)]
#[command(name = "steposc", version, about)]
struct Cli {
    /// Configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override solver.levels.
    #[arg(long, global = true)]
    levels: Option<usize>,

    /// Override solver.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Start from a named preset configuration (see `preset --list`).
    #[arg(long, global = true)]
    preset: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a classical trajectory and its angle/billiard images.
    Classical,
    /// Solve the finite-difference spectrum (and optional eigenvector store).
    Spectrum,
    /// Spacing statistics, Weyl check and degeneracy report for spectra.
    Stats {
        /// Spectrum inputs: bundle directories or bare index,eigenvalue CSVs.
        inputs: Vec<PathBuf>,
    },
    /// Concentration census over a stored eigenvector window.
    Concentration {
        /// Spectrum bundle with an eigenvector store.
        bundle: PathBuf,
    },
    /// Perturbation-mixing metrics P and T across the configured tilt sweep.
    Mixing,
    /// Run a named preset batch (fig1 ... fig7, selftest).
    Preset {
        /// Preset name, or --list to enumerate.
        name: Option<String>,
        #[arg(long)]
        list: bool,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match (&cli.preset, &cli.config) {
        (Some(name), None) => {
            let p = preset(name).ok_or_else(|| {
                RunError::Config(steposc_cli::config::ConfigError {
                    field: "--preset".into(),
                    message: format!("unknown preset {name:?}; available: {}", preset_names().join(", ")),
                })
            })?;
            p.members[0].config.clone()
        }
        (_, Some(path)) => ExperimentConfig::load(path)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(levels) = cli.levels {
        cfg.solver.levels = levels;
    }
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_member_steps(
    cfg: &ExperimentConfig,
    steps: &[PresetStep],
    dir: &PathBuf,
) -> Result<(), RunError> {
    let mut spectrum_bundle = None;
    for step in steps {
        match step {
            PresetStep::Classical => {
                runner::run_classical(cfg, &dir.join("classical"))?;
            }
            PresetStep::Spectrum => {
                let out = runner::run_spectrum(cfg, &dir.join("spectrum"))?;
                spectrum_bundle = Some(out.bundle_dir);
            }
            PresetStep::Stats => {
                let bundle = spectrum_bundle
                    .clone()
                    .ok_or_else(|| RunError::Ingestion("stats step needs a spectrum".into()))?;
                runner::run_stats(cfg, &[bundle], &dir.join("stats"))?;
            }
            PresetStep::Concentration => {
                let bundle = spectrum_bundle.clone().ok_or_else(|| {
                    RunError::Ingestion("concentration step needs a spectrum".into())
                })?;
                runner::run_concentration(cfg, &bundle, &dir.join("concentration"))?;
            }
            PresetStep::Mixing => {
                runner::run_mixing(cfg, &dir.join("mixing"))?;
            }
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), RunError> {
    match &cli.command {
        Command::Classical => {
            let cfg = load_config(cli)?;
            let out = runner::run_classical(&cfg, &cli.out)?;
            println!("classical bundle: {}", out.bundle_dir.display());
        }
        Command::Spectrum => {
            let cfg = load_config(cli)?;
            let out = runner::run_spectrum(&cfg, &cli.out)?;
            println!("spectrum bundle: {}", out.bundle_dir.display());
        }
        Command::Stats { inputs } => {
            let cfg = load_config(cli)?;
            let out = runner::run_stats(&cfg, inputs, &cli.out)?;
            println!("stats bundle: {}", out.bundle_dir.display());
        }
        Command::Concentration { bundle } => {
            let cfg = load_config(cli)?;
            let out = runner::run_concentration(&cfg, bundle, &cli.out)?;
            println!("concentration bundle: {}", out.bundle_dir.display());
        }
        Command::Mixing => {
            let cfg = load_config(cli)?;
            let out = runner::run_mixing(&cfg, &cli.out)?;
            println!("mixing bundle: {}", out.bundle_dir.display());
        }
        Command::Preset { name, list } => {
            if *list || name.is_none() {
                for n in preset_names() {
                    let p = preset(n).expect("listed preset exists");
                    println!("{n}: {}", p.description);
                }
                return Ok(());
            }
            let name = name.as_deref().unwrap();
            let p = preset(name).ok_or_else(|| {
                RunError::Config(steposc_cli::config::ConfigError {
                    field: "preset".into(),
                    message: format!(
                        "unknown preset {name:?}; available: {}",
                        preset_names().join(", ")
                    ),
                })
            })?;
            let root = cli.out.join(p.name);
            // independent members run as a parallel batch in isolated
            // directories
            use rayon::prelude::*;
            p.members
                .par_iter()
                .map(|m| {
                    let mut cfg = m.config.clone();
                    if let Some(levels) = cli.levels {
                        cfg.solver.levels = levels;
                    }
                    if let Some(seed) = cli.seed {
                        cfg.solver.seed = seed;
                    }
                    cfg.validate()?;
                    let dir = root.join(&m.name);
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
                    run_member_steps(&cfg, &m.steps, &dir)
                })
                .collect::<Result<Vec<_>, _>>()?;
            println!("preset {} bundle: {}", p.name, root.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("steposc: failed to size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("steposc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
