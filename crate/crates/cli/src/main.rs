use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optshrink::harness::{self, Experiment, ExperimentConfig};
use optshrink::io::{load_matrix_csv, save_matrix_csv};
use optshrink::shrinkage::gap_rank_estimate;
use optshrink::{optshrink, predict_spike, reconstruct, svd, Error, MpParams};

/// Low-rank matrix denoising by data-driven optimal singular value shrinkage.
#[derive(Debug, Parser)]
#[command(name = "optshrink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Denoise a CSV matrix and write the shrunk low-rank estimate.
    Denoise(DenoiseArgs),
    /// Print large-matrix limits for one spike under Gaussian noise as JSON.
    Predict(PredictArgs),
    /// Run a seeded Monte-Carlo experiment and write a CSV summary.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    /// Input matrix, comma separated, no header. Empty or NaN cells are
    /// treated as missing.
    #[arg(long)]
    input: PathBuf,
    /// Number of retained components r̂ (1 ≤ r̂ < min(n, m)).
    #[arg(long, required_unless_present = "gap_heuristic")]
    rank: Option<usize>,
    /// Output CSV for the denoised matrix.
    #[arg(long)]
    output: PathBuf,
    /// Optional JSON report with weights, D-transform values and error estimates.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Pick r̂ from the largest relative gap between consecutive singular
    /// values. HEURISTIC: not part of the OptShrink method and carries no
    /// optimality guarantee. Ignored when --rank is given.
    #[arg(long)]
    gap_heuristic: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Signal singular value θ.
    #[arg(long)]
    theta: f64,
    /// Aspect ratio n/m with n ≤ m.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Probability that an entry is observed.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// One of: weights-vs-theta, mse-vs-rhat, relmse-accuracy, missing-data,
    /// shrinkers, svt-compare.
    #[arg(long)]
    experiment: String,
    /// Rows (default 400).
    #[arg(long)]
    n: Option<usize>,
    /// Columns (defaults to n).
    #[arg(long)]
    m: Option<usize>,
    /// Trials per grid point (default 100).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed spike for experiments that sweep r̂ or p.
    #[arg(long)]
    theta: Option<f64>,
    /// Output CSV; a JSON sidecar with the same stem is written next to it.
    #[arg(long)]
    out: PathBuf,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_validation() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn denoise(args: &DenoiseArgs) -> Result<(), Failure> {
    let loaded = load_matrix_csv(&args.input)?;
    let factors = svd(&loaded.matrix)?;
    let r_hat = match args.rank {
        Some(0) => return Err(usage("--rank must be at least 1")),
        Some(r) => r,
        None => gap_rank_estimate(factors.singular_values()),
    };
    let mut report = optshrink(&factors, r_hat)?;

    // With missing entries the shrunk matrix estimates pS; undo the scale.
    if !loaded.mask.is_full() {
        let p = loaded.mask.observed_fraction();
        if p <= 0.0 {
            return Err(usage("input has no observed entries"));
        }
        report.weights = report.weights.rescaled(p);
        report.mse_estimate /= p * p;
        report.metadata.observed_fraction = Some(p);
    }

    for (i, flagged) in report.metadata.pole_flags.iter().enumerate() {
        if *flagged {
            eprintln!(
                "warning: component {} (singular value {}) is too close to the noise spectrum; weight set to 0",
                i + 1,
                report.sigma_hat[i]
            );
        }
    }
    if report.metadata.rel_mse_out_of_range {
        eprintln!("warning: relative error estimate fell outside [0, 1] and was clamped");
    }

    let estimate = reconstruct(&factors, &report.weights)?;
    save_matrix_csv(&estimate, &args.output)?;
    if let Some(path) = &args.report {
        let file = std::fs::File::create(path).map_err(Error::from)?;
        serde_json::to_writer_pretty(file, &report).map_err(Error::from)?;
    }
    Ok(())
}

fn predict(args: &PredictArgs) -> Result<(), Failure> {
    let mp = MpParams::new(args.c, args.p)?;
    let prediction = predict_spike(args.theta, &mp)?;
    let json = serde_json::to_string_pretty(&prediction).map_err(Error::from)?;
    println!("{json}");
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let experiment: Experiment = args.experiment.parse()?;
    let mut config = ExperimentConfig::defaults(experiment);
    if let Some(n) = args.n {
        config.n = n;
        config.m = n;
    }
    if let Some(m) = args.m {
        config.m = m;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    config.seed = args.seed;
    if let Some(theta) = args.theta {
        if config.thetas.is_empty() {
            return Err(usage(format!(
                "--theta applies only to experiments with a fixed spike, not {experiment}"
            )));
        }
        config.thetas = vec![theta];
    }
    let config = config.normalized()?;
    let rows = harness::run_experiment(&config)?;
    harness::save_csv(&rows, &args.out)?;
    harness::save_sidecar(&config, &rows, &harness::sidecar_path(&args.out))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Denoise(args) => denoise(args),
        Command::Predict(args) => predict(args),
        Command::Simulate(args) => simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
