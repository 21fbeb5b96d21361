use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rdfront::cli::{parse_config_with, resolve_output_dir, run, Kind};

/// Runs one experiment and writes its artifacts.
///
/// Exit status: 0 when every assertion passes, 1 when one fails, 2 on a fault.
#[derive(Parser)]
#[command(name = "rdfront", version)]
struct Args {
    /// validate-medium, front-speed, speed-map, surface, conditions,
    /// build-front, verify-bounds or stability
    kind: String,
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory (else OUTPUT_DIR, else experiment.output_dir, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Caps the worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides experiment.seed
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match go(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("rdfront: {e}");
            ExitCode::from(2)
        }
    }
}

fn go(args: &Args) -> rdfront::Result<bool> {
    let kind = Kind::parse(&args.kind)?;
    let text = std::fs::read_to_string(&args.config).map_err(|e| rdfront::Error::io(&args.config, e))?;
    let cfg = parse_config_with(&text, Some(kind), args.seed)?;
    let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build_global()
        .map_err(|e| rdfront::Error::Config(format!("worker pool: {e}")))?;
    let out = resolve_output_dir(args.out.as_deref(), &cfg);
    let report = run(&cfg, &out, workers)?;
    print!("{}", report.summary());
    println!("artifacts in {}", out.display());
    Ok(report.passed())
}
