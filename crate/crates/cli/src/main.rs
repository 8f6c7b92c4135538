use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use calibstruct::orchestrator::{self as orch, ExperimentConfig, Layout};
use calibstruct::synthetic::{mini_dataset, write_movielens, MiniSpec};

/// Calibrated recommendation with structure analysis of users' genre
/// distributions.
#[derive(Parser)]
#[command(name = "calibstruct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, clean and split the dataset; write the cleaned files.
    Ingest(ConfigArgs),
    /// Pick matrix-factorization hyperparameters per score mode.
    Tune(ConfigArgs),
    /// Train per-fold models and write candidate lists.
    Recommend(FoldArgs),
    /// Re-rank candidates over the λ grid and build the stage matrices.
    Calibrate(FoldArgs),
    /// Grid-search structure learners and compare stages.
    Analyze(FoldArgs),
    /// Merge per-fold metrics into metrics.csv and the figure files.
    Report(ConfigArgs),
    /// Run every stage.
    RunAll(ConfigArgs),
    /// Write the synthetic mini dataset in MovieLens format.
    GenMini(GenMiniArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML). CALIB_OUTPUT_DIR overrides its output_dir.
    #[arg(short, long)]
    config: PathBuf,
}

#[derive(Args)]
struct FoldArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Only this fold (default: all).
    #[arg(long)]
    fold: Option<usize>,
}

#[derive(Args)]
struct GenMiniArgs {
    /// Directory for ratings.dat and movies.dat.
    #[arg(short, long, default_value = "data/mini")]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    users: usize,
    #[arg(long, default_value_t = 200)]
    items: usize,
}

fn load(args: &ConfigArgs) -> Result<(ExperimentConfig, Layout)> {
    let cfg = ExperimentConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    let layout = Layout::new(&cfg.output_dir);
    Ok((cfg, layout))
}

fn folds(cfg: &ExperimentConfig, only: Option<usize>) -> Result<Vec<usize>> {
    match only {
        Some(f) if f >= cfg.folds => anyhow::bail!("fold {f} out of range (config has {} folds)", cfg.folds),
        Some(f) => Ok(vec![f]),
        None => Ok((0..cfg.folds).collect()),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Ingest(args) => {
            let (cfg, layout) = load(&args)?;
            let prepared = orch::prepare(&cfg)?;
            for p in orch::write_cleaned(&layout, &prepared)? {
                println!("{}", p.display());
            }
        }
        Command::Tune(args) => {
            let (cfg, layout) = load(&args)?;
            let prepared = orch::prepare(&cfg)?;
            for mode in cfg.score_mode.modes() {
                let hp = orch::tune(&cfg, &layout, &prepared, mode)?;
                println!("{mode}: {hp:?}");
            }
        }
        Command::Recommend(args) => {
            let (cfg, layout) = load(&args.config)?;
            let prepared = orch::prepare(&cfg)?;
            for mode in cfg.score_mode.modes() {
                let hp = orch::read_hyperparams(&layout, mode).context("run `tune` first")?;
                for fold in folds(&cfg, args.fold)? {
                    orch::recommend_fold(&cfg, &layout, &prepared, mode, fold, &hp)?;
                }
            }
        }
        Command::Calibrate(args) => {
            let (cfg, layout) = load(&args.config)?;
            let prepared = orch::prepare(&cfg)?;
            for mode in cfg.score_mode.modes() {
                for fold in folds(&cfg, args.fold)? {
                    let cands = orch::read_candidates_csv(layout.candidates(mode, fold)).context("run `recommend` first")?;
                    orch::calibrate_fold(&cfg, &layout, &prepared, mode, fold, &cands)?;
                }
            }
        }
        Command::Analyze(args) => {
            let (cfg, layout) = load(&args.config)?;
            for mode in cfg.score_mode.modes() {
                for fold in folds(&cfg, args.fold)? {
                    let matrices = orch::read_matrices(&cfg, &layout, mode, fold).context("run `calibrate` first")?;
                    orch::analyze_fold(&cfg, &layout, mode, fold, &matrices)?;
                }
            }
        }
        Command::Report(args) => {
            let (cfg, layout) = load(&args)?;
            for p in orch::report(&cfg, &layout)? {
                println!("{}", p.display());
            }
        }
        Command::RunAll(args) => {
            let (cfg, _) = load(&args)?;
            let summary = orch::run_experiment(&cfg)?;
            for p in &summary.outputs {
                println!("{}", p.display());
            }
        }
        Command::GenMini(args) => {
            let spec = MiniSpec {
                users: args.users,
                items: args.items,
                ..Default::default()
            };
            let (set, catalog) = mini_dataset(&spec, args.seed)?;
            let (ratings, movies) = write_movielens(&args.out, &set, &catalog)?;
            println!("{}\n{}", ratings.display(), movies.display());
        }
    }
    Ok(())
}
