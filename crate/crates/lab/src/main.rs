use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use precursor_lab::experiments::clean_output_dir;
use precursor_lab::{parse_config, run, Experiment, LabError};

/// Runs a pulse-propagation experiment described by a config file.
///
/// Exit status: 0 success, 1 invalid config, 2 verification failed,
/// 3 I/O or numerical failure.
#[derive(Debug, Parser)]
#[command(name = "precursor-lab", version)]
struct Args {
    /// Experiment config file
    config: PathBuf,
    /// Directory for CSVs and summary.txt (overrides `output-dir`)
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// One of propagate, sweep-z, stochastic, chirp, slab, verify (overrides `experiment`)
    #[arg(long)]
    experiment: Option<String>,
    /// RNG seed (overrides `seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(args: &Args) -> Result<bool, LabError> {
    let text = fs::read_to_string(&args.config).map_err(|source| LabError::Io {
        path: args.config.clone(),
        source,
    })?;
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let mut config = parse_config(&text, &base)?;
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(name) = &args.experiment {
        config.experiment = name.parse::<Experiment>()?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(LabError::validation("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::validation("threads", e.to_string()))?;
    }
    clean_output_dir(&config.output_dir)?;
    let report = run(&config)?;
    print!("{}", report.summary.render());
    Ok(report.verified)
}

fn main() -> ExitCode {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("precursor-lab: verification failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("precursor-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
