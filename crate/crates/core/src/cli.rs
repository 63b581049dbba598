//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::difficulty::{difficulty_report, DifficultyOptions};
use crate::error::{Error, Result};
use crate::estimators::{fit_estimator, Estimator, EstimatorSettings};
use crate::harness::{merge_store, run_sweep, SweepConfig, SweepOptions};
use crate::selection::Criterion;
use crate::simdesign::{synthesize, BetaDistribution, BetaParams, BetaSpec, CovarianceSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "supportlab", version, about = "Sparse support recovery benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize one problem instance and write it as CSV files.
    Generate(GenerateArgs),
    /// Fit one estimator with one criterion and print the result as JSON.
    Fit(FitArgs),
    /// Compute the difficulty report of a covariance matrix as JSON.
    Difficulty(DifficultyArgs),
    /// Run a parameter sweep into a results store.
    Sweep(SweepArgs),
    /// Fit transition curves and write figure tables from a results store.
    Analyze(AnalyzeArgs),
    /// Print oracle-deviation tables as aligned text.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    p: usize,
    #[arg(long, default_value_t = 0.125)]
    density: f64,
    #[arg(long, default_value = "uniform")]
    beta_dist: String,
    #[arg(long, default_value_t = 5.0)]
    snr: f64,
    #[arg(long, default_value_t = 4.0)]
    n_over_p: f64,
    /// Weight on the block term of the covariance.
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    #[arg(long, default_value_t = 1)]
    block_size: usize,
    #[arg(long, default_value_t = 0.0)]
    block_value: f64,
    #[arg(long, default_value_t = 1.0)]
    banding_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Design matrix CSV (no header).
    #[arg(long)]
    x: PathBuf,
    /// Response vector CSV.
    #[arg(long)]
    y: PathBuf,
    #[arg(long, default_value = "lasso")]
    estimator: String,
    #[arg(long, default_value = "bic")]
    criterion: String,
    /// True coefficient CSV, needed for the oracle criterion.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Sweep config whose estimator settings are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DifficultyArgs {
    /// Covariance matrix CSV (no header).
    #[arg(long)]
    cov: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    beta_min: f64,
    #[arg(long)]
    sigma2: f64,
    /// Comma-separated support indices; defaults to the first k.
    #[arg(long, value_delimiter = ',')]
    support: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    /// Largest p for which the exact ρ is enumerated.
    #[arg(long, default_value_t = 16)]
    exact_max_p: usize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Continue a partially completed store.
    #[arg(long)]
    resume: bool,
    /// Stop after this many tasks.
    #[arg(long)]
    max_tasks: Option<usize>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Results store directory.
    #[arg(long)]
    out: PathBuf,
    /// Where analysis files go; defaults to <out>/analysis.
    #[arg(long)]
    dest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Results store directory.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit(a),
        Command::Difficulty(a) => difficulty(a),
        Command::Sweep(a) => sweep(a),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let cov = CovarianceSpec {
        p: a.p,
        t: a.t,
        block_size: a.block_size,
        block_value: a.block_value,
        banding_scale: a.banding_scale,
    };
    let params = BetaParams::default();
    let beta = BetaSpec {
        p: a.p,
        density: a.density,
        distribution: BetaDistribution::from_id(&a.beta_dist, &params)?,
        floor: params.floor,
        seed: crate::harness::stable_seed(&[&a.seed.to_string(), "beta"]),
    };
    let inst = synthesize(&cov, &beta, a.n_over_p, a.snr, a.seed)?;
    std::fs::create_dir_all(&a.out)?;
    crate::io::write_matrix(&a.out.join("x.csv"), &inst.x)?;
    crate::io::write_vector(&a.out.join("y.csv"), &inst.y)?;
    crate::io::write_vector(&a.out.join("beta.csv"), &inst.beta_true)?;
    crate::io::write_matrix(&a.out.join("sigma.csv"), &crate::simdesign::build_covariance(&cov)?)?;
    let meta = serde_json::json!({
        "n": inst.n(),
        "p": inst.p(),
        "k": inst.k(),
        "support": inst.support,
        "sigma2": inst.sigma2,
        "snr": inst.snr,
        "beta_min": inst.beta_min(),
        "covariance": inst.covariance,
        "seed": inst.seed,
    });
    std::fs::write(a.out.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    println!("{}", a.out.display());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let x = crate::io::read_matrix(&a.x)?;
    let y = crate::io::read_vector(&a.y)?;
    if y.len() != x.nrows() {
        return Err(Error::InvalidArgument(format!("y has {} rows, X has {}", y.len(), x.nrows())));
    }
    let est = Estimator::from_id(&a.estimator)?;
    let crit = Criterion::from_id(&a.criterion)?;
    let settings = match &a.config {
        Some(p) => SweepConfig::load(p)?.estimator_settings,
        None => EstimatorSettings::default(),
    };
    let truth: Option<Vec<usize>> = match &a.truth {
        Some(p) => {
            let b: DVector<f64> = crate::io::read_vector(p)?;
            Some(crate::solvers::nonzero_support(&b))
        }
        None => None,
    };
    let mut fits = fit_estimator(&x, &y, truth.as_deref(), est, &[crit], &settings, a.seed)?;
    let (_, res) = fits.remove(0);
    print_json(&res?)
}

fn difficulty(a: DifficultyArgs) -> Result<()> {
    let sigma = crate::io::read_matrix(&a.cov)?;
    if sigma.nrows() != sigma.ncols() {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    let support = a.support.unwrap_or_else(|| (0..a.k).collect());
    if support.len() != a.k {
        return Err(Error::InvalidArgument(format!("--support lists {} indices, k = {}", support.len(), a.k)));
    }
    let signs = vec![1.0; a.k];
    let opts = DifficultyOptions {
        exact_max_p: a.exact_max_p,
        c1: a.c1,
    };
    print_json(&difficulty_report(&sigma, &support, &signs, a.beta_min, a.sigma2, &opts)?)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = SweepConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let opts = SweepOptions {
        workers: a.workers,
        resume: a.resume,
        max_tasks: a.max_tasks,
    };
    let summary = run_sweep(&cfg, &a.out, &opts)?;
    if summary.remaining == 0 {
        merge_store(&a.out)?;
    }
    println!(
        "tasks: {} total, {} previously done, {} run now, {} remaining",
        summary.total, summary.already_done, summary.ran, summary.remaining
    );
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let dest = a.dest.unwrap_or_else(|| crate::analysis::default_dest(&a.out));
    let manifest = crate::analysis::analyze_store(&a.out, &dest)?;
    println!("wrote {} files to {}", manifest.files.len(), dest.display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let (_, records) = crate::harness::load_store(&a.out)?;
    print!("{}", crate::analysis::render_report(&records)?);
    Ok(())
}
