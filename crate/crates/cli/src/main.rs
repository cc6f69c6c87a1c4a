use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chebdea::exec::Execution;
use chebdea::pipeline::{self, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Chebyshev-distance DEA scoring and second-stage panel regression.
#[derive(Debug, Parser)]
#[command(name = "chebdea", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Debug, Args)]
struct Global {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Random seed for synthetic data (overrides the config value).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for scoring (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Score frontiers one at a time.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every configured model and year.
    Score(ConfigArg),
    /// Fit the random-time-effects regression on existing score files.
    Regress(ConfigArg),
    /// Export density, histogram, scatter and fitted-curve tables.
    Report(ConfigArg),
    /// Run the bundled synthetic example end to end.
    Demo,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chebdea: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> chebdea::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> chebdea::Result<()> {
    let g = cli.global;
    let exec = if g.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    exec.install(g.jobs, || match cli.command {
        Command::Score(a) => {
            let cfg = load(&a.config, g.seed)?;
            let tables = pipeline::cmd_score(&cfg, &g.out, exec)?;
            for t in &tables {
                log::info!("{}: {} scores, {} dropped", t.label, t.scores.len(), t.dropped.len());
            }
            Ok(())
        }
        Command::Regress(a) => {
            let cfg = load(&a.config, g.seed)?;
            let fits = pipeline::cmd_regress(&cfg, &g.out)?;
            print!("{}", pipeline::summary_table(&fits, &cfg.regression.regressors));
            Ok(())
        }
        Command::Report(a) => {
            let cfg = load(&a.config, g.seed)?;
            for p in pipeline::cmd_report(&cfg, &g.out)? {
                log::info!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Demo => {
            let run = pipeline::cmd_demo(&g.out, g.seed, exec)?;
            print!("{}", run.summary);
            Ok(())
        }
    })
}
