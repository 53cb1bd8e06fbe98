//! `skewlab`: experiments on the skew product over the cat map with geodesic-flow fibers.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use config::{ConfigError, ExperimentConfig, Format};
use output::{write_outputs, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "skewlab", version, about = "Skew products over the cat map with geodesic-flow fibers")]
struct Cli {
    /// Experiment configuration (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// sigma^2(f), Sigma^2(phi), the homoclinic sum and the variance constant.
    Constants {
        #[arg(long)]
        bmax: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// <phi o T^k, phi> over a lag grid, with a power-law fit.
    Correlations {
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
    /// Variance of the Birkhoff sums over an n grid.
    VarianceScan {
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        /// Use the base-only observable cos(2 pi x2) instead of the fiber bump.
        #[arg(long)]
        base_only: bool,
    },
    /// Dynamical, random-walk and limit laws with their distances.
    Distribution {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Tail probabilities, multiple mixing and occupation moments.
    Lemmas {
        /// Lengths for the tail probabilities.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Residual of the occupation decomposition over an n grid.
    Decomposition {
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
    /// All acceptance checks; exits with 1 if any fails.
    Selftest {
        /// Much smaller sizes, for smoke testing; thresholds are not calibrated for them.
        #[arg(long)]
        quick: bool,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Constants { .. } => "constants",
            Command::Correlations { .. } => "correlations",
            Command::VarianceScan { .. } => "variance-scan",
            Command::Distribution { .. } => "distribution",
            Command::Lemmas { .. } => "lemmas",
            Command::Decomposition { .. } => "decomposition",
            Command::Selftest { .. } => "selftest",
        }
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let run = &mut cfg.run;
    if let Some(v) = cli.seed {
        run.seed = v;
    }
    if let Some(v) = cli.samples {
        run.samples = v;
    }
    if let Some(v) = cli.threads {
        run.threads = Some(v);
    }
    match &cli.command {
        Command::Constants { bmax, step } => {
            if let Some(v) = bmax {
                run.b_max = *v;
            }
            if let Some(v) = step {
                run.step = *v;
            }
        }
        Command::Correlations { k: Some(k) } => run.k = k.clone(),
        Command::VarianceScan { n: Some(n), .. } => run.variance_n = n.clone(),
        Command::Distribution { n: Some(n) } => run.law_n = *n,
        Command::Lemmas { n, beta, epsilon } => {
            if let Some(v) = n {
                run.tail_n = v.clone();
            }
            if let Some(v) = beta {
                run.beta = *v;
            }
            if let Some(v) = epsilon {
                run.epsilon = *v;
            }
        }
        Command::Decomposition { n: Some(n) } => run.residual_n = n.clone(),
        Command::Selftest { only, .. } => {
            if let Some(bad) = only.iter().find(|&&id| !(1..=12).contains(&id)) {
                return Err(ConfigError(format!("--only: no criterion {bad}, expected 1 to 12")));
            }
        }
        _ => {}
    }
    if let Some(v) = &cli.out {
        cfg.output.path = v.clone();
    }
    if let Some(v) = cli.format {
        cfg.output.format = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let cfg = resolve(&cli)?;
    let threads = cfg.run.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;

    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let mut extra_files = Vec::new();
    let report = match &cli.command {
        Command::Constants { .. } => commands::constants(&cfg)?,
        Command::Correlations { .. } => commands::correlations(&cfg)?,
        Command::VarianceScan { base_only, .. } => commands::variance(&cfg, *base_only)?,
        Command::Distribution { .. } => {
            let (r, files) = commands::distribution(&cfg)?;
            extra_files = files;
            r
        }
        Command::Lemmas { .. } => commands::lemmas(&cfg)?,
        Command::Decomposition { .. } => commands::decomposition(&cfg)?,
        Command::Selftest { quick, only } => commands::selftest(&cfg, *quick, only)?,
    };
    let rec = RunRecord {
        command: cli.command.name(),
        argv: std::env::args().collect(),
        config: &cfg,
        threads,
        started_unix,
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    let files = write_outputs(&report, &rec, &extra_files)?;
    println!("wrote {}", files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
    Ok(match report.passed {
        Some(false) => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // usage errors exit with 2, --help and --version with 0
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
