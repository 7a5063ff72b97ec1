use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cpsdetect::quantizer::CacheStatus;
use cpsdetect_harness::config::AttackKindSpec;
use cpsdetect_harness::validate::{run_validation, ValidateOptions};
use cpsdetect_harness::{obtain_grid, plot, run_experiment, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(
    name = "cpsdetect",
    version,
    about = "Attack detection experiments on Kalman innovations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (run, grid) or report file (validate, plot).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed_plant: Option<u64>,
    #[arg(long, global = true)]
    seed_attack: Option<u64>,
    #[arg(long, global = true)]
    seed_lloyd: Option<u64>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// No attack.
    Null,
    /// Lag-1 mixing attack at t = 25000.
    Exp1,
    /// Pairwise attack at t = 25000.
    Exp2,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, attack and detect; writes CSV traces and a summary.
    Run {
        /// Built-in setup used when no --config is given.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Train and cache the detector grids of a config.
    Grid {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Statistical self-checks; prints a JSON report.
    Validate {
        /// Seed of every check.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Perturb the closed-form covariance (negative control).
        #[arg(long)]
        corrupt_sigma: bool,
    },
    /// Draw an SVG line plot of a trace CSV.
    Plot {
        csv: PathBuf,
        /// Logarithmic v axis.
        #[arg(long)]
        log: bool,
    },
}

fn load_config(cli: &Cli, preset: Option<Preset>) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match (&cli.config, preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(p)) => ExperimentConfig::reference(match p {
            Preset::Null => AttackKindSpec::None,
            Preset::Exp1 => AttackKindSpec::Uncorrelated,
            Preset::Exp2 => AttackKindSpec::Pairwise,
        }),
        (None, None) => {
            return Err(HarnessError::Config(
                "pass --config <path> or --preset".into(),
            ))
        }
    };
    if let Some(s) = cli.seed_plant {
        cfg.seeds.plant = s;
    }
    if let Some(s) = cli.seed_attack {
        cfg.seeds.attack = s;
    }
    if let Some(s) = cli.seed_lloyd {
        cfg.seeds.lloyd = s;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_grid(quiet: bool, what: &str, info: &cpsdetect_harness::run::GridInfo) {
    if quiet {
        return;
    }
    let place = info
        .path
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "(not cached)".into());
    match (&info.status, &info.outcome) {
        (CacheStatus::Hit, _) => println!("{what}: cache hit {place}"),
        (CacheStatus::Built, Some(o)) => println!(
            "{what}: built {place}, distortion {:.6}, {} iterations{}",
            o.final_distortion(),
            o.iterations,
            if o.converged { "" } else { " (iteration cap)" }
        ),
        (CacheStatus::Built, None) => println!("{what}: built {place}"),
    }
}

fn execute(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Run { preset } => {
            let cfg = load_config(cli, *preset)?;
            let summary = run_experiment(&cfg, &cfg.output)?;
            if !cli.quiet {
                print!("{}", summary.to_toml_string());
                println!("# traces written to {}", cfg.output.display());
            }
        }
        Command::Grid { preset } => {
            let cfg = load_config(cli, *preset)?;
            let d = cfg.system_model()?.meas_dim();
            let default_dir = cfg.output.join("grids");
            if let Some(js) = &cfg.js {
                let dir = js.grid_cache.clone().unwrap_or_else(|| default_dir.clone());
                let params = js.lloyd.params(cfg.seeds.lloyd);
                let (_, info) = obtain_grid(js.block_len, d, js.points, &params, Some(&dir))?;
                print_grid(cli.quiet, "js grid", &info);
            }
            if let Some(npi) = &cfg.npi {
                let dir = npi
                    .grid_cache
                    .clone()
                    .unwrap_or_else(|| default_dir.clone());
                let params = npi.lloyd.params(cfg.seeds.lloyd);
                let (_, info) = obtain_grid(2, d, npi.points, &params, Some(&dir))?;
                print_grid(cli.quiet, "npi grid", &info);
            }
        }
        Command::Validate {
            seed,
            corrupt_sigma,
        } => {
            let report = run_validation(&ValidateOptions {
                seed: *seed,
                corrupt_sigma: *corrupt_sigma,
                ..ValidateOptions::default()
            })?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Some(path) = &cli.out {
                std::fs::write(path, &json)
                    .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            }
            if !cli.quiet {
                println!("{json}");
            }
            if !report.passed {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                return Err(HarnessError::Validation(failed.join(", ")));
            }
        }
        Command::Plot { csv, log } => {
            let out = cli.out.clone().unwrap_or_else(|| csv.with_extension("svg"));
            plot::plot_csv(csv, &out, *log)?;
            if !cli.quiet {
                println!("{}", out.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
