use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kgband::config::load_config;
use kgband::harness::{
    compare_policies, run_experiment, summarize, write_plot_csv, write_results_csv,
    write_selections_csv, write_stats_csv, write_timing_csv, ComparisonRow,
};
use kgband::spectrum::{generate_scenario, save_sweeps};
use kgband::{Error, Result};

#[derive(Parser)]
#[command(
    name = "kgband",
    version,
    about = "Knowledge-gradient band selection for RSS positioning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several configurations on the same sweeps.
    Compare {
        #[arg(long, value_delimiter = ',', required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic sweeps of the first run to a file.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.scenario.seed = seed;
                cfg.policy.seed = seed;
            }
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let results = run_experiment(&cfg)?;
            let stats = summarize(&results)?;
            ensure_dir(&dir)?;
            write_results_csv(&dir.join("trajectory.csv"), &results)?;
            write_plot_csv(&dir.join("plot.csv"), &results[0])?;
            write_selections_csv(&dir.join("selections.csv"), &results)?;
            let rows = [ComparisonRow {
                name: cfg.name.clone(),
                stats,
            }];
            write_stats_csv(&dir.join("summary.csv"), &rows)?;
            println!(
                "{}: rmse_x {:.3} m, rmse_y {:.3} m, median_x {:.3} m, median_y {:.3} m",
                cfg.name, stats.x.rmse, stats.y.rmse, stats.x.median, stats.y.median
            );
        }
        Command::Compare { configs, out } => {
            let cfgs = configs
                .iter()
                .map(|p| load_config(p))
                .collect::<Result<Vec<_>>>()?;
            let dir = out.unwrap_or_else(|| cfgs[0].output_dir.clone());
            let rows = compare_policies(&cfgs)?;
            ensure_dir(&dir)?;
            write_stats_csv(&dir.join("stats.csv"), &rows)?;
            write_timing_csv(&dir.join("timing.csv"), &rows)?;
            for row in &rows {
                println!(
                    "{}: rmse_x {:.3} m, rmse_y {:.3} m, wall {:.3} s",
                    row.name, row.stats.x.rmse, row.stats.y.rmse, row.stats.mean_wall_time
                );
            }
        }
        Command::Gen { config, out } => {
            let cfg = load_config(&config)?;
            let scenario = generate_scenario(&cfg.run_scenario(0))?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                ensure_dir(parent)?;
            }
            save_sweeps(&out, &scenario.sweeps)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgband: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
