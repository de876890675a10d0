//! `donorspin`: reproducible simulation, estimation, fitting and sweeps.

mod commands;
mod config;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use donorspin::error::{Category, Error, Result};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "donorspin", version, about = "Optically controlled donor spin qubit toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory that receives the run directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the hardware parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override a config value, e.g. --set field.magnitude="3 T".
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write its traces.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Write the analytic decoherence budget.
    Estimate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit a model to data files (two files for rabi_fringe).
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        data: Vec<PathBuf>,
        /// Curve model (overrides fit.model).
        #[arg(long)]
        model: Option<String>,
        /// Models whose residual norms are reported alongside, e.g. exp,cubed_exp.
        #[arg(long)]
        compare: Option<String>,
        /// Ordinate column (overrides fit.y_column).
        #[arg(long)]
        y_column: Option<String>,
    },
    /// Run the experiment once per value of a numeric config key.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted config key, e.g. field.magnitude.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; bare numbers take the configured unit.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn setup_pool(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::invalid("--jobs", "must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid("--jobs", e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Simulate { common } => {
            setup_pool(common.jobs)?;
            let cfg = RunConfig::load(common.config.as_deref(), &common.set, common.seed)?;
            commands::simulate(&cfg, common.out.as_deref())
        }
        Command::Estimate { common } => {
            setup_pool(common.jobs)?;
            let cfg = RunConfig::load(common.config.as_deref(), &common.set, common.seed)?;
            commands::estimate(&cfg, common.out.as_deref())
        }
        Command::Fit { common, data, model, compare, y_column } => {
            setup_pool(common.jobs)?;
            let mut set = common.set.clone();
            if let Some(m) = model {
                set.push(format!("fit.model={}", quoted(&m)));
            }
            if let Some(c) = compare {
                set.push(format!("fit.compare={}", quoted(&c)));
            }
            if let Some(y) = y_column {
                set.push(format!("fit.y_column={}", quoted(&y)));
            }
            let cfg = RunConfig::load(common.config.as_deref(), &set, common.seed)?;
            commands::fit(&cfg, &data, common.out.as_deref())
        }
        Command::Sweep { common, axis, values } => {
            setup_pool(common.jobs)?;
            commands::sweep(&commands::SweepArgs {
                config: common.config.as_deref(),
                overrides: &common.set,
                seed: common.seed,
                axis: &axis,
                values: &values,
                out: common.out.as_deref(),
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                Error::Validation(issues) => {
                    eprintln!("error: invalid input ({} problem{})", issues.len(), if issues.len() == 1 { "" } else { "s" });
                    for i in issues {
                        eprintln!("  {i}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(match e.category() {
                Category::Validation => 2,
                Category::Numerical => 3,
                Category::Io => 4,
            })
        }
    }
}
