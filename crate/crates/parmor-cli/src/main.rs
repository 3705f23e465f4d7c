use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use parmor_cli::config::{ExperimentConfig, SolverLane};
use parmor_cli::experiments::{run_four_param, run_nonparametric, run_one_param, RunOutcome};
use parmor_cli::{cache, selftest};

#[derive(Parser)]
#[command(
    name = "parmor",
    version,
    about = "Parametric model-order-reduction experiments on the thermal block"
)]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed, overriding the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parameter sweeps (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Matrix-equation solver lane, overriding the configured one.
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Dense,
    Lowrank,
}

#[derive(Subcommand)]
enum Command {
    /// Full-order model housekeeping.
    Fom {
        #[command(subcommand)]
        action: FomAction,
    },
    /// Run one of the experiment protocols.
    Run {
        #[command(subcommand)]
        which: RunWhich,
    },
    /// Configuration helpers.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
    /// Compact numerical oracle suite; exits nonzero on any failure.
    Selftest,
}

#[derive(Subcommand)]
enum FomAction {
    /// Assemble the configured full-order models and cache them on disk.
    Build,
}

#[derive(Subcommand, Clone, Copy)]
enum RunWhich {
    /// Non-parametric method comparison at mu = 1.
    Nonparam,
    /// Local/global comparison over the single-parameter model.
    OneParam,
    /// Local/global comparison over seeded four-parameter samples.
    FourParam,
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print the complete default configuration as TOML.
    PrintDefaults,
}

fn load_config(cli: &Cli) -> parmor::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(solver) = cli.solver {
        cfg.solver.lane = match solver {
            SolverArg::Dense => SolverLane::Dense,
            SolverArg::Lowrank => SolverLane::LowRank,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn finish_run(outcome: RunOutcome) -> i32 {
    for path in &outcome.csv_paths {
        println!("wrote {}", path.display());
    }
    if outcome.warnings.is_empty() {
        0
    } else {
        for w in &outcome.warnings {
            eprintln!("soft-check warning: {w}");
        }
        2
    }
}

fn dispatch(cli: Cli) -> parmor::Result<i32> {
    match &cli.command {
        Command::Config {
            action: ConfigAction::PrintDefaults,
        } => {
            print!("{}", ExperimentConfig::default().to_toml()?);
            Ok(0)
        }
        Command::Fom {
            action: FomAction::Build,
        } => {
            let cfg = load_config(&cli)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            for (path, result) in [
                (
                    cache::fom_path(&cfg.out_dir, &cfg.fom),
                    cache::thermal_fom(&cfg.out_dir, &cfg.fom)?,
                ),
                (
                    cache::one_param_fom_path(&cfg.out_dir, &cfg.fom),
                    cache::one_param_fom(&cfg.out_dir, &cfg.fom)?,
                ),
            ] {
                let (model, rebuilt) = result;
                println!(
                    "{} (order {}, {})",
                    path.display(),
                    model.order(),
                    if rebuilt { "built" } else { "up to date" }
                );
            }
            Ok(0)
        }
        Command::Run { which } => {
            let which = *which;
            let cfg = load_config(&cli)?;
            let outcome = match which {
                RunWhich::Nonparam => run_nonparametric(&cfg)?,
                RunWhich::OneParam => run_one_param(&cfg)?,
                RunWhich::FourParam => run_four_param(&cfg)?,
            };
            Ok(finish_run(outcome))
        }
        Command::Selftest => Ok(if selftest::run_selftest()? { 0 } else { 1 }),
    }
}

fn main() {
    // keep BLAS single-threaded: the sweeps parallelize over parameters,
    // and nested BLAS threading would cost determinism and speed
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} worker threads: {e}");
            std::process::exit(1);
        }
    }
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(code);
}
