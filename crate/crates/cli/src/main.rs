use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use markov_stable::harness::{
    bn_table, run_arch_contrast, run_diagnostics, run_ensemble, run_poc_suite, run_skeleton_contrast, run_weak_lln,
    DiagnoseSettings, ExperimentConfig, Report,
};
use markov_stable::{Error, Result};

#[derive(Parser)]
#[command(name = "markov-stable", version, about = "Stable limits of additive functionals of Markov chains")]
struct Cli {
    /// Worker threads (default: all cores). Reports do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Experiment configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Write PREFIX.json and PREFIX_<table>.csv instead of printing JSON.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Normalized partial sums against the stable limit.
    Simulate(Output),
    /// Decay of |S_n|/B_n for a mean-zero observable.
    WeakLln(Output),
    /// 3-skeleton sums and full-sequence boundedness.
    Skeleton(Output),
    /// ARCH(1): κ, τ̂ and the two-target CF comparison.
    ArchTau(Output),
    /// Principle-of-conditioning statistics.
    Poc(Output),
    /// Spectral gap, 2-U.I. curve, hyperboundedness and Poisson checks.
    Diagnose {
        /// Settings file (TOML); defaults are used for missing keys.
        #[arg(long)]
        settings: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Normalizing constants B_n for a tail t^{-α} ℓ with constant ℓ.
    Bn {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        ell: f64,
        #[arg(long, default_value_t = 0.5)]
        c_plus: f64,
        #[arg(long, default_value_t = 0.5)]
        c_minus: f64,
        /// Comma-separated n values.
        #[arg(long, value_delimiter = ',', default_values_t = vec![10u64, 100, 1000, 10_000, 100_000])]
        n: Vec<u64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn emit<R: Report>(report: &R, out: Option<&Path>) -> Result<()> {
    let json = report.json()?;
    match out {
        None => println!("{json}"),
        Some(prefix) => {
            let write = |path: PathBuf, text: &str| {
                std::fs::write(&path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            };
            write(prefix.with_extension("json"), &json)?;
            for t in report.tables()? {
                let mut name = prefix.file_name().unwrap_or_default().to_os_string();
                name.push(format!("_{}.csv", t.name));
                write(prefix.with_file_name(name), &t.text)?;
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(o) => emit(&run_ensemble(&ExperimentConfig::load(&o.config)?)?, o.out.as_deref()),
        Command::WeakLln(o) => emit(&run_weak_lln(&ExperimentConfig::load(&o.config)?)?, o.out.as_deref()),
        Command::Skeleton(o) => emit(&run_skeleton_contrast(&ExperimentConfig::load(&o.config)?)?, o.out.as_deref()),
        Command::ArchTau(o) => emit(&run_arch_contrast(&ExperimentConfig::load(&o.config)?)?, o.out.as_deref()),
        Command::Poc(o) => emit(&run_poc_suite(&ExperimentConfig::load(&o.config)?)?, o.out.as_deref()),
        Command::Diagnose { settings, out } => {
            let s = match settings {
                Some(p) => {
                    let text =
                        std::fs::read_to_string(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                    DiagnoseSettings::from_toml(&text)?
                }
                None => DiagnoseSettings::default(),
            };
            emit(&run_diagnostics(&s)?, out.as_deref())
        }
        Command::Bn { alpha, ell, c_plus, c_minus, n, out } => {
            emit(&bn_table(alpha, ell, c_plus, c_minus, &n)?, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
