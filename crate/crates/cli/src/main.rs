//! `eaqga` command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use eaqga_core::bench::{run_algorithm, run_experiment, write_outputs, ExperimentConfig};
use eaqga_core::oracle::{brute_force, DEFAULT_N_LIMIT};
use eaqga_core::problem::{build_portfolio, synth_problem};
use eaqga_core::{Algorithm, Error, PriceSeries, QuboProblem, SynthSpec};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "eaqga", about = "EAQGA, GA and AQGA solvers for portfolio QUBO problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a problem file from a CSV of adjusted close prices.
    Ingest {
        prices: PathBuf,
        /// Risk aversion coefficient.
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a deterministic synthetic problem.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        mu_min: Option<f64>,
        #[arg(long)]
        mu_max: Option<f64>,
        #[arg(long)]
        vol_median: Option<f64>,
        #[arg(long)]
        vol_dispersion: Option<f64>,
        #[arg(long)]
        correlation: Option<f64>,
        #[arg(long)]
        factors: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run one solver once and write its run record.
    Solve {
        #[arg(long)]
        algo: String,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 10)]
        pop: usize,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Exhaustively maximize a problem.
    Oracle {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = DEFAULT_N_LIMIT)]
        limit: usize,
    },
    /// Run an experiment matrix from a TOML config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the version.
    Version,
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::data(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::data(format!("cannot write to stdout: {e}"))),
    }
}

fn load_problem(path: &Path) -> Result<QuboProblem, Error> {
    QuboProblem::load(path).map_err(|e| match e {
        Error::Io { path, source } => Error::data(format!("cannot read {path}: {source}")),
        other => other,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Ingest { prices, q, output } => {
            let series = PriceSeries::load_csv(&prices)?;
            let problem = build_portfolio(&series, q)?;
            emit(output.as_deref(), &problem.to_json_string())
        }
        Command::Synth {
            n,
            seed,
            q,
            mu_min,
            mu_max,
            vol_median,
            vol_dispersion,
            correlation,
            factors,
            output,
        } => {
            let d = SynthSpec::default();
            let spec = SynthSpec {
                mu_min: mu_min.unwrap_or(d.mu_min),
                mu_max: mu_max.unwrap_or(d.mu_max),
                vol_median: vol_median.unwrap_or(d.vol_median),
                vol_dispersion: vol_dispersion.unwrap_or(d.vol_dispersion),
                correlation: correlation.unwrap_or(d.correlation),
                factors: factors.unwrap_or(d.factors),
                q: q.unwrap_or(d.q),
            };
            let problem = synth_problem(n, seed, &spec)?;
            emit(output.as_deref(), &problem.to_json_string())
        }
        Command::Solve {
            algo,
            problem,
            pop,
            iters,
            seed,
            output,
        } => {
            let algorithm: Algorithm = algo.parse()?;
            let qubo = load_problem(&problem)?;
            let id = problem
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let start = Instant::now();
            let mut record = run_algorithm(&qubo, algorithm, None, pop, iters, seed)?.with_problem_id(id);
            record.wall_time = Some(start.elapsed().as_secs_f64());
            let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
            text.push('\n');
            emit(output.as_deref(), &text)
        }
        Command::Oracle { problem, limit } => {
            let qubo = load_problem(&problem)?;
            let result = brute_force(&qubo, limit)?;
            let mut text = serde_json::to_string(&result).expect("result serializes");
            text.push('\n');
            emit(None, &text)
        }
        Command::Bench { config, output } => {
            let cfg = ExperimentConfig::load(&config).map_err(|e| match e {
                Error::Io { path, source } => Error::data(format!("cannot read {path}: {source}")),
                other => other,
            })?;
            let result = run_experiment(&cfg)?;
            std::fs::create_dir_all(&output)
                .map_err(|e| Error::data(format!("cannot create {}: {e}", output.display())))?;
            write_outputs(&output, &cfg, &result)?;
            eprintln!(
                "wrote {} runs and {} summary rows to {}",
                result.records.len(),
                result.summary.len(),
                output.display()
            );
            Ok(())
        }
        Command::Version => emit(None, &format!("eaqga {}\n", env!("CARGO_PKG_VERSION"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eaqga: {e}");
            ExitCode::from(if e.is_data() { EXIT_DATA } else { EXIT_USAGE })
        }
    }
}
