use std::path::PathBuf;
use std::process::ExitCode;

use brdm_cli::{cmd_baseline, cmd_plot, cmd_run, load_config, ExperimentConfig, OutputDir, Result};
use clap::{Args, Parser, Subcommand};

/// Bounded-rational decision making experiments.
#[derive(Debug, Parser)]
#[command(name = "brdm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the exact rate-distortion frontier and write frontier.csv.
    Baseline(CommonArgs),
    /// Train agents over the configured sweep and write summary.csv plus
    /// per-cell episode logs.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Generate plot.py from a frontier and an agent summary.
    Plot {
        /// Defaults to <out>/frontier.csv.
        #[arg(long)]
        frontier: Option<PathBuf>,
        /// Defaults to <out>/summary.csv.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Replace an existing plot.py.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Config file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace existing output files.
    #[arg(long)]
    force: bool,
}

impl CommonArgs {
    fn resolve(&self) -> Result<(ExperimentConfig, OutputDir)> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        let out = OutputDir::new(cfg.output_dir.clone(), self.force);
        Ok((cfg, out))
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Baseline(args) => {
            let (cfg, out) = args.resolve()?;
            let path = cmd_baseline(&cfg, &out)?;
            println!("wrote {}", path.display());
        }
        Command::Run { common, workers } => {
            let (cfg, out) = common.resolve()?;
            let report = cmd_run(&cfg, &out, workers.unwrap_or(0))?;
            println!(
                "trained {} cells, wrote {} files; summary in {}",
                report.cells,
                report.files_written,
                report.summary_path.display()
            );
        }
        Command::Plot {
            frontier,
            summary,
            out,
            force,
        } => {
            let frontier = frontier.unwrap_or_else(|| out.join("frontier.csv"));
            let summary = summary.unwrap_or_else(|| out.join("summary.csv"));
            let path = cmd_plot(&frontier, &summary, &OutputDir::new(out, force))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
