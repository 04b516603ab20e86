use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rolloff::harness::{
    emit_plots, run_experiment, run_grid, write_trace, ExperimentConfig, GridSpec,
    DEFAULT_LEARNING_RATES, DEFAULT_MOMENTA,
};
use rolloff::verification::{run_all, write_reports};
use rolloff::Error;

const EXIT_DIVERGED: u8 = 2;
const EXIT_CLAIM_FAILED: u8 = 4;

/// Seeded stochastic-optimization experiments with CV diagnostics.
#[derive(Parser)]
#[command(name = "rolloff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace to `<out>/trace.csv`.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a momentum × learning-rate (× batch size) grid over several seeds.
    Grid {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_MOMENTA)]
        momenta: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LEARNING_RATES)]
        learning_rates: Vec<f64>,
        /// Defaults to the config's batch size.
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
        seeds: Vec<u64>,
        #[arg(long, default_value = "grid_out")]
        out: PathBuf,
    },
    /// Draw SVG charts from one or more trace files.
    Plot {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Run the Monte Carlo checks of the analytic claims.
    Verify {
        /// Where to write the CSV report.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let output = run_experiment(&cfg)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let trace = out.join("trace.csv");
            write_trace(&output.records, &trace)?;
            let s = &output.summary;
            println!("trace: {}", trace.display());
            println!("iterations: {}", s.iterations);
            println!("samples: {}", s.samples_consumed);
            if let Some(r) = s.final_risk {
                println!("final risk: {r}");
            }
            if let Some(a) = s.final_accuracy {
                println!("final accuracy: {a}");
            }
            if let Some(i) = s.iterations_to_threshold {
                println!("iterations to threshold: {i}");
            }
            if s.diverged {
                eprintln!("run diverged after {} iterations", s.iterations);
                return Ok(ExitCode::from(EXIT_DIVERGED));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Grid {
            config,
            momenta,
            learning_rates,
            batch_sizes,
            seeds,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let spec = GridSpec {
                momenta,
                learning_rates,
                batch_sizes,
                seeds,
            };
            let result = run_grid(&cfg, &spec, Some(&out))?;
            for c in &result.cells {
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6e}"));
                println!(
                    "beta={} lr={} k={}: final risk {} best risk {} iterations to threshold {} ({} of {} runs failed)",
                    c.cell.momentum,
                    c.cell.learning_rate,
                    c.cell.batch_size,
                    fmt(c.median_final_risk),
                    fmt(c.median_best_risk),
                    fmt(c.median_iterations_to_threshold),
                    c.failures,
                    c.runs
                );
                for e in &c.errors {
                    eprintln!("  {e}");
                }
            }
            println!("summary: {}", out.join("summary.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { traces, out } => {
            let output = emit_plots(&traces, &out)?;
            for n in &output.notices {
                eprintln!("{n}");
            }
            for f in &output.files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { out, seed } => {
            let reports = run_all(seed)?;
            for r in &reports {
                println!("{}", r.summary_line());
            }
            if let Some(path) = out {
                write_reports(&reports, &path)?;
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            println!("{} of {} claims passed", reports.len() - failed, reports.len());
            if failed > 0 {
                return Ok(ExitCode::from(EXIT_CLAIM_FAILED));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
