use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pimd_cli::experiments::{
    run_error_table, run_rejection_table, run_relative_entropy, run_spectrum_check, run_strong_error,
    run_time_average, run_weak_error, weak_rows,
};
use pimd_cli::output::{
    create, write_json, write_rows_to, ENTROPY_SCHEMA, ERROR_TABLE_SCHEMA, REJECTION_SCHEMA, SPECTRUM_SCHEMA,
    STRONG_ERROR_SCHEMA, WEAK_ERROR_SCHEMA,
};
use pimd_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "pimd", version, about = "Ring-polymer path-integral sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time average of one trajectory: run.csv and summary.json
    Run(Common),
    /// Relative errors against an exact-force reference: error_table.csv
    ErrorTable(Common),
    /// Paired ensembles and relative entropy: weak_error.csv, relative_entropy.csv
    Ensemble(Common),
    /// Pathwise error of random batches under shared noise: strong_error.csv
    StrongError(Common),
    /// FFT spectrum against a dense eigensolver: spectrum.csv
    SpectrumCheck(Common),
    /// Metropolis rejection rates of splitting Monte Carlo: rejection_table.csv
    RejectionTable(Common),
    /// List the built-in presets
    Presets,
}

#[derive(Args)]
struct Common {
    /// TOML config file
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name
    #[arg(long)]
    preset: Option<String>,
    /// Overrides run.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ensemble fan-out
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(k) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Presets => {
            for (name, _) in pimd_cli::config::PRESETS {
                println!("{name}");
            }
        }
        Command::Run(c) => {
            let cfg = c.load()?;
            let summary = run_time_average(&cfg, create(&c.out.join("run.csv"))?)?;
            write_json(&c.out.join("summary.json"), &summary)?;
            println!("{}", serde_json::to_string(&summary).map_err(|e| CliError::Io(e.to_string()))?);
        }
        Command::ErrorTable(c) => {
            let cfg = c.load()?;
            let table = run_error_table(&cfg)?;
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            write_rows_to(&c.out.join("error_table.csv"), ERROR_TABLE_SCHEMA, &table.rows)?;
        }
        Command::Ensemble(c) => {
            let cfg = c.load()?;
            if cfg.ensemble.n_trajectories > 0 {
                let series = run_weak_error(&cfg)?;
                write_rows_to(&c.out.join("weak_error.csv"), WEAK_ERROR_SCHEMA, &weak_rows(&series))?;
            }
            if cfg.ensemble.entropy_time > 0.0 {
                let rows = run_relative_entropy(&cfg)?;
                write_rows_to(&c.out.join("relative_entropy.csv"), ENTROPY_SCHEMA, &rows)?;
            }
        }
        Command::StrongError(c) => {
            let cfg = c.load()?;
            write_rows_to(&c.out.join("strong_error.csv"), STRONG_ERROR_SCHEMA, &run_strong_error(&cfg)?)?;
        }
        Command::SpectrumCheck(c) => {
            let cfg = c.load()?;
            let rows = run_spectrum_check(&cfg)?;
            let worst = rows.iter().filter(|r| r.abs_diff > r.tolerance).count();
            write_rows_to(&c.out.join("spectrum.csv"), SPECTRUM_SCHEMA, &rows)?;
            if worst > 0 {
                eprintln!("warning: {worst} eigenvalues outside tolerance");
            }
        }
        Command::RejectionTable(c) => {
            let cfg = c.load()?;
            write_rows_to(&c.out.join("rejection_table.csv"), REJECTION_SCHEMA, &run_rejection_table(&cfg)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
