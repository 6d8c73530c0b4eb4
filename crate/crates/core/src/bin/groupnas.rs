use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use groupnas::run::{
    bruteforce, derive, evaluate, report, search, DerivationOverrides, EvaluateOptions, EvaluatorSpec, RunConfig,
    SearchOptions,
};
use groupnas::sampler::AcquisitionVariant;
use groupnas::{Error, Result};

#[derive(Parser)]
#[command(name = "groupnas", version, about = "Joint task-grouping and architecture search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    /// `synthetic` or `external:"<command>"`.
    #[arg(long)]
    evaluator: Option<String>,
    /// Acquisition variant: mu+sigma, mu or sigma.
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Warm start plus progressive sampling; checkpoints every round.
    Search {
        #[command(flatten)]
        common: Common,
        /// Continue an interrupted run in --out.
        #[arg(long)]
        resume: bool,
    },
    /// Greedy derivation from the run's trained surrogate.
    Derive {
        #[command(flatten)]
        common: Common,
        /// Budget B.
        #[arg(long)]
        budget: Option<usize>,
        /// Iterations K2 per restart.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Report path (default: <out>/report.txt).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Ground-truth evaluation of the derived points.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Re-evaluate even cached points.
        #[arg(long)]
        fresh: bool,
    },
    /// CSV and markdown summaries of one or more runs.
    Report {
        #[command(flatten)]
        common: Common,
        /// Run directories to summarise.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Exact optimum under the synthetic oracle (small spaces only).
    Bruteforce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        budget: Option<usize>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::from_json_str("{}")?,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(ev) = &common.evaluator {
        cfg.evaluator = ev.parse()?;
    }
    if let Some(v) = &common.variant {
        cfg.sampler.variant = v.parse::<AcquisitionVariant>()?;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_dir(common: &Common, cfg: Option<&RunConfig>) -> Result<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .ok_or_else(|| Error::Config("no run directory: pass --out".into()))
}

fn rejects_overrides(common: &Common, what: &str) -> Result<()> {
    if common.seed.is_some() || common.variant.is_some() || common.config.is_some() {
        return Err(Error::Config(format!(
            "{what} reads the run's stored configuration; --config, --seed and --variant do not apply"
        )));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Search { common, resume } => {
            let dir = run_dir(&common, None)?;
            let cfg = if resume && common.config.is_none() && dir.join(groupnas::run::CONFIG_FILE).exists() {
                RunConfig::load(&dir.join(groupnas::run::CONFIG_FILE))?
            } else {
                load_config(&common)?
            };
            let state = search(
                &cfg,
                &dir,
                &SearchOptions {
                    resume,
                    force: common.force,
                    stop_after_round: None,
                },
            )?;
            println!("round  |D|  evaluations  training MAE");
            for r in &state.history {
                println!(
                    "{:>5}  {:>3}  {:>11}  {:.6}",
                    r.round, r.dataset_size, r.evaluations, r.train_mae
                );
            }
            println!("run directory: {}", dir.display());
        }
        Command::Derive {
            common,
            budget,
            iterations,
            restarts,
            report,
        } => {
            rejects_overrides(&common, "derive")?;
            let dir = run_dir(&common, None)?;
            let overrides = DerivationOverrides {
                budget,
                iterations,
                restarts,
            };
            let (_, text) = derive(&dir, &overrides, report.as_deref(), common.force)?;
            print!("{text}");
        }
        Command::Evaluate { common, report, fresh } => {
            rejects_overrides(&common, "evaluate")?;
            let dir = run_dir(&common, None)?;
            let evaluator = common
                .evaluator
                .as_deref()
                .map(str::parse::<EvaluatorSpec>)
                .transpose()?;
            let result = evaluate(
                &dir,
                &EvaluateOptions {
                    report,
                    fresh,
                    force: common.force,
                    evaluator,
                },
            )?;
            print!("{}", result.per_task_csv());
            println!("realized_gain {}", result.realized_gain);
        }
        Command::Report { common, runs } => {
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("report"));
            let notes = report(&runs, &out, common.force)?;
            for n in notes {
                eprintln!("note: {n}");
            }
            println!("summaries written to {}", out.display());
        }
        Command::Bruteforce { common, budget } => {
            let cfg = load_config(&common)?;
            let result = bruteforce(&cfg, budget)?;
            if let Some(out) = &common.out {
                std::fs::create_dir_all(out)?;
                let path = out.join("optimum.txt");
                if path.exists() && !common.force {
                    return Err(Error::OutputExists(path));
                }
                std::fs::write(path, &result.text)?;
            }
            print!("{}", result.text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
