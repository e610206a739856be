//! `dcp`: decomposition-based conformal prediction from the command line.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decomp_conformal::eval::csv_io::write_series_csv;
use decomp_conformal::eval::report::format_float;
use decomp_conformal::{
    emit_report, generate_synthetic, load_csv, run_sweep, stl_decompose, validate_series,
    CsvSchema, SeasonalWindow, StlConfig, SweepOutcome,
};

use config::CliConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("bad argument: {0}")]
    BadArgument(String),
    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Library(#[from] decomp_conformal::Error),
    #[error("{failed} of {total} sweep cells failed; partial results written")]
    PartialFailure { failed: usize, total: usize },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::PartialFailure { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "dcp", version, about = "Decomposition-based conformal prediction intervals")]
struct Cli {
    /// Worker threads for sweeps (0 = all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic benchmark series (period 30) as `t,y` CSV.
    Synth {
        #[arg(long, default_value_t = 3000)]
        length: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "synthetic.csv")]
        out: PathBuf,
    },
    /// STL-decompose a CSV series and write its components.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        period: usize,
        #[arg(long, default_value = "y")]
        value_col: String,
        #[arg(long, default_value = "components.csv")]
        out: PathBuf,
        /// Cycle-subseries smoothing span (odd).
        #[arg(long, default_value_t = 7)]
        seasonal_span: usize,
        /// Replace each cycle-subseries by its mean.
        #[arg(long, default_value_t = false)]
        periodic: bool,
        /// Bisquare robustness iterations.
        #[arg(long, default_value_t = false)]
        robust: bool,
    },
    /// Run every entry of a config once (first alpha, first seed).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output_dir`).
        #[arg(long, env = "DCP_OUTPUT_DIR")]
        out: Option<PathBuf>,
    },
    /// Run the full entry x alpha x seed grid of a config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output_dir`).
        #[arg(long, env = "DCP_OUTPUT_DIR")]
        out: Option<PathBuf>,
    },
}

fn cmd_synth(length: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if length < 60 {
        return Err(CliError::BadArgument(format!(
            "--length must be at least 60 (two periods), got {length}"
        )));
    }
    let series = generate_synthetic(length, seed)?;
    write_series_csv(out, &[("y", series.values())])?;
    println!("wrote {} points to {}", length, out.display());
    Ok(())
}

fn cmd_decompose(
    input: &Path,
    period: usize,
    value_col: &str,
    out: &Path,
    stl: StlConfig,
) -> Result<(), CliError> {
    let series = validate_series(load_csv(input, &CsvSchema::new(value_col, period))?)?;
    let d = stl_decompose(&series, &stl)?;
    write_series_csv(
        out,
        &[
            ("y", series.values()),
            ("trend", &d.trend),
            ("seasonal", &d.seasonal),
            ("remainder", &d.remainder),
        ],
    )?;
    println!(
        "max relative reconstruction residual: {:e}",
        d.max_relative_residual(series.values())
    );
    println!("wrote components to {}", out.display());
    Ok(())
}

fn output_dir(flag: Option<PathBuf>, config: &CliConfig) -> PathBuf {
    flag.or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn print_summary(outcome: &SweepOutcome) {
    println!(
        "{:<12} {:<14} {:<10} {:>6} {:>8} {:>10} {:>10}",
        "trend", "season", "remainder", "alpha", "seeds", "picp", "piaw"
    );
    for s in &outcome.summary {
        let piaw = if s.piaw_infinite { f64::INFINITY } else { s.piaw_mean };
        println!(
            "{:<12} {:<14} {:<10} {:>6} {:>8} {:>10} {:>10}",
            s.method_trend,
            s.method_season,
            s.method_remainder,
            s.alpha,
            s.n_seeds,
            format_float(s.picp_mean),
            format_float(piaw)
        );
    }
}

fn cmd_sweep(config_path: &Path, out: Option<PathBuf>, single: bool) -> Result<(), CliError> {
    let config = CliConfig::load(config_path)?;
    let dir = output_dir(out, &config);
    let mut sweep = config.into_sweep();
    if single {
        sweep.alphas.truncate(1);
        sweep.seeds.truncate(1);
    }
    let outcome = run_sweep(&sweep).map_err(|e| match e {
        decomp_conformal::Error::Config(message) => CliError::Config {
            path: config_path.to_path_buf(),
            message,
        },
        other => CliError::Library(other),
    })?;
    emit_report(&outcome, &dir)?;
    print_summary(&outcome);
    println!("reports written to {}", dir.display());
    let failed = outcome.failures();
    if failed > 0 {
        for row in outcome.rows.iter().filter(|r| r.error.is_some()) {
            eprintln!(
                "failed: {}/{}/{} alpha={} seed={}: {}",
                row.method_trend,
                row.method_season,
                row.method_remainder,
                row.alpha,
                row.seed,
                row.error.as_deref().unwrap_or("")
            );
        }
        return Err(CliError::PartialFailure {
            failed,
            total: outcome.rows.len(),
        });
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| CliError::BadArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Synth { length, seed, out } => cmd_synth(length, seed, &out),
        Command::Decompose {
            input,
            period,
            value_col,
            out,
            seasonal_span,
            periodic,
            robust,
        } => {
            let stl = StlConfig {
                seasonal: if periodic {
                    SeasonalWindow::Periodic
                } else {
                    SeasonalWindow::Span(seasonal_span)
                },
                robust,
                outer_iterations: if robust { 6 } else { 1 },
                ..StlConfig::default()
            };
            cmd_decompose(&input, period, &value_col, &out, stl)
        }
        Command::Run { config, out } => cmd_sweep(&config, out, true),
        Command::Sweep { config, out } => cmd_sweep(&config, out, false),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
