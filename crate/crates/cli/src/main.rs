//! `irspec`: batch front-end writing JSON reports.
//!
//! Exit codes: 0 on success, 2 for bad input, 3 when a computation is
//! refused as too large.

mod commands;
mod rule;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "irspec", version, about = "Spectral analysis of Independence-of-Rankings aggregators")]
struct Cli {
    /// Worker threads for the data-parallel sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Write the JSON report here and print a summary instead.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reduced one-voter spectrum and the n-voter spectral gap.
    Spectra(SpectraArgs),
    /// Measures, manipulation power and dictator rounding for one aggregator.
    Analyze(AnalyzeArgs),
    /// Every aggregator with zero independence measure.
    Census(CensusArgs),
    /// Exact fourth-moment tables, their audit and the noise sweep.
    Moments(MomentsArgs),
}

#[derive(Args, Debug)]
pub struct SpectraArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Largest operator dimension diagonalized densely.
    #[arg(long, default_value_t = irspec::laplacian::DEFAULT_DENSE_LIMIT)]
    pub dense_limit: usize,
    /// Seed for the matrix-free fallback.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Blocks of rank positions, e.g. "1|2,3"; default is all singletons.
    #[arg(long)]
    pub partition: Option<String>,
    /// Aggregator JSON file.
    #[arg(long, conflicts_with = "rule")]
    pub input: Option<PathBuf>,
    /// Named rule: dictator:i=1,sigma=213 | constant:output=123 | plurality
    /// | borda | relabel:sigma=213 | random.
    #[arg(long)]
    pub rule: Option<String>,
    /// Reassign this many random table entries before analysis.
    #[arg(long, default_value_t = 0)]
    pub corrupt: usize,
    /// Add a dummy voter that makes the encoding mean-zero.
    #[arg(long)]
    pub center: bool,
    /// JSON overrides for the preference orders.
    #[arg(long)]
    pub orders: Option<PathBuf>,
    #[arg(long, default_value_t = irspec::laplacian::DEFAULT_DENSE_LIMIT)]
    pub dense_limit: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CensusArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub partition: Option<String>,
}

#[derive(Args, Debug)]
pub struct MomentsArgs {
    /// Size used for the table audit (4..=6).
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Sizes checked for the determinant identity and swept, as "a-b".
    #[arg(long, default_value = "4-12")]
    pub range: String,
    /// Noise level for the headline row: "auto" (m^-1/2) or p/q.
    #[arg(long, default_value = "auto")]
    pub sigma_hyper: String,
    /// Random matrices per swept m.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Random matrices used by the table audit.
    #[arg(long, default_value_t = 4)]
    pub audit_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Spectra(a) => commands::spectra(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Census(a) => commands::census(a),
        Command::Moments(a) => commands::moments(a),
    });
    let report = match result {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let json = match serde_json::to_string_pretty(&report.json) {
        Ok(json) => json + "\n",
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
            for line in &report.summary {
                println!("{line}");
            }
        }
        None => print!("{json}"),
    }
    ExitCode::SUCCESS
}
