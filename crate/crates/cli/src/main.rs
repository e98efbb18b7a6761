use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use ising_pca::Boundary;
use ising_pca_cli::config::{Grid, KindArg, RunConfig, Sampler};
use ising_pca_cli::{execute, CliError, Subcommand, EXIT_CONFIG, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "ising-pca", version, about = "PCA dynamics for the 2D Ising model: exact checks, scans, sampling")]
enum Cli {
    /// Exact identity suite on small lattices (L <= 4); exit 1 if any check fails.
    Verify(Flags),
    /// CSV of tv and sqrt(Delta) over L and a delta grid.
    TvScan(Flags),
    /// CSV of cluster-expansion convergence checks over J and delta grids.
    KpScan(Flags),
    /// JSON contour decomposition of one configuration.
    ContourDump(Flags),
    /// Monte Carlo trace (CSV) with a JSON metadata sidecar.
    Sample(Flags),
    /// Sweep throughput across worker counts (JSON).
    Bench(Flags),
}

#[derive(Args, Debug)]
#[command(after_help = format!("Relative --out paths are resolved under ${OUT_DIR_ENV} when it is set."))]
struct Flags {
    /// Flat JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "L")]
    side: Option<usize>,
    #[arg(long, value_parser = parse_boundary)]
    bc: Option<Boundary>,
    #[arg(long)]
    kind: Option<KindArg>,
    #[arg(long = "J")]
    coupling: Option<f64>,
    #[arg(long, conflicts_with = "q")]
    delta: Option<f64>,
    /// Self-coupling; delta = exp(-2q).
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated L values (tv-scan).
    #[arg(long, value_delimiter = ',')]
    sides: Option<Vec<usize>>,
    /// `a,b,c` or `from:to:points[:lin|log]`.
    #[arg(long)]
    deltas: Option<Grid>,
    /// J grid, same forms as --deltas (kp-scan).
    #[arg(long = "Js")]
    couplings: Option<Grid>,
    /// Comma-separated worker counts (bench).
    #[arg(long, value_delimiter = ',')]
    worker_counts: Option<Vec<usize>>,
    /// Spin grid such as `+-+/---/+++` (contour-dump).
    #[arg(long)]
    spins: Option<String>,
    #[arg(long)]
    sampler: Option<Sampler>,
}

fn parse_boundary(s: &str) -> Result<Boundary, String> {
    s.parse().map_err(|e: ising_pca::Error| e.to_string())
}

impl Flags {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            side: self.side,
            bc: self.bc,
            kind: self.kind,
            coupling: self.coupling,
            delta: self.delta,
            q: self.q,
            seed: self.seed,
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            workers: self.workers,
            out: self.out,
            sides: self.sides,
            deltas: self.deltas,
            couplings: self.couplings,
            worker_counts: self.worker_counts,
            spins: self.spins,
            sampler: self.sampler,
        };
        let cfg = file.merged(flags);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let (sub, flags) = match Cli::parse() {
        Cli::Verify(f) => (Subcommand::Verify, f),
        Cli::TvScan(f) => (Subcommand::TvScan, f),
        Cli::KpScan(f) => (Subcommand::KpScan, f),
        Cli::ContourDump(f) => (Subcommand::ContourDump, f),
        Cli::Sample(f) => (Subcommand::Sample, f),
        Cli::Bench(f) => (Subcommand::Bench, f),
    };
    let result = flags.into_config().and_then(|cfg| execute(sub, &cfg));
    match result {
        Ok(code) => {
            if code != 0 {
                eprintln!("{}: checks failed", sub.name());
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.exit_code() {
                0 => EXIT_CONFIG,
                c => c,
            })
        }
    }
}
