//! Monte-Carlo experiment runner.
//!
//! Each experiment sweeps one parameter (θ, r̂ or p) over a grid. For every
//! `(grid point, trial)` pair it draws a fresh rank-`r` signal with Haar
//! frames, adds i.i.d. `N(0, 1/m)` noise, optionally masks entries with
//! probability `p`, takes one SVD and scores every requested estimator
//! against the true signal.
//!
//! Trial seeds are `derive_seed(config.seed, grid_index, trial)`; inside a
//! trial the signal frames, noise and mask use sub-streams 1, 2 and 3 of the
//! trial seed. Results are aggregated from the collected per-trial values in
//! index order, so output does not depend on thread scheduling.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{bulk_energy_above, limiting_mse, limiting_mse_for_rank, predict_spike, LimitKind};
use crate::dtransform::MpParams;
use crate::error::{Error, Result};
use crate::linalg::{svd, SvdFactors};
use crate::oracle::{exact_squared_error, oracle_diagonal, oracle_weights, rank_regularized_weights};
use crate::random::{derive_seed, sample_gaussian_matrix, sample_mask, SignalSpec, RNG_NAME};
use crate::shrinkage::{eym_weights, optshrink, svt_weights, ShrinkageWeights};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "OPTSHRINK_THREADS";

pub const CSV_HEADER: &str = "sweep,estimator,mean_weight,mean_nse,stderr,predicted";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Weights and normalized error against θ (r = r̂ = 1).
    WeightsVsTheta,
    /// Error against the retained rank r̂ for a fixed strong spike.
    MseVsRhat,
    /// Data-driven relative error estimate against the realised error.
    RelmseAccuracy,
    /// Weights and error against the observation probability p.
    MissingData,
    /// Shrinkage functions of OptShrink, oracle, truncation and SVT against θ.
    Shrinkers,
    /// OptShrink against soft-thresholding at λ ∈ {1, 2}.
    SvtCompare,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::WeightsVsTheta,
        Experiment::MseVsRhat,
        Experiment::RelmseAccuracy,
        Experiment::MissingData,
        Experiment::Shrinkers,
        Experiment::SvtCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::WeightsVsTheta => "weights-vs-theta",
            Experiment::MseVsRhat => "mse-vs-rhat",
            Experiment::RelmseAccuracy => "relmse-accuracy",
            Experiment::MissingData => "missing-data",
            Experiment::Shrinkers => "shrinkers",
            Experiment::SvtCompare => "svt-compare",
        }
    }

    /// Whether `predicted` overlays a weight (true) or a normalized error.
    fn predicts_weight(self) -> bool {
        matches!(
            self,
            Experiment::WeightsVsTheta | Experiment::MissingData | Experiment::Shrinkers
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown experiment {s:?}; valid: {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    OptShrink,
    Eym,
    /// `(Kᵢᵢ)₊` on the first r̂ components.
    Oracle,
    /// Best r̂-sparse weighting over all q components.
    OracleRankRegularized,
    Svt { lambda: f64 },
    /// OptShrink's own relative error estimate, reported in `mean_nse`.
    RelmseEstimate,
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::OptShrink => "optshrink".into(),
            Estimator::Eym => "eym".into(),
            Estimator::Oracle => "oracle".into(),
            Estimator::OracleRankRegularized => "oracle-rank-regularized".into(),
            Estimator::Svt { lambda } => format!("svt-{lambda}"),
            Estimator::RelmseEstimate => "relmse-estimate".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    /// Sweep values: θ, r̂ or p depending on the experiment.
    pub grid: Vec<f64>,
    /// Fixed spikes for experiments that sweep r̂ or p.
    pub thetas: Vec<f64>,
    /// Retained rank for experiments that do not sweep it.
    pub r_hat: usize,
    pub estimators: Vec<Estimator>,
}

impl ExperimentConfig {
    /// Full-scale defaults: `n = m = 400`, 100 trials.
    pub fn defaults(experiment: Experiment) -> Self {
        use Estimator::*;
        let (grid, thetas, estimators): (Vec<f64>, Vec<f64>, Vec<Estimator>) = match experiment {
            Experiment::WeightsVsTheta => (
                vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0],
                vec![],
                vec![OptShrink, Eym, Oracle],
            ),
            Experiment::MseVsRhat => (
                vec![1.0, 2.0, 3.0, 4.0, 5.0],
                vec![10.0],
                vec![OptShrink, Eym, Oracle, OracleRankRegularized],
            ),
            Experiment::RelmseAccuracy => (
                vec![1.5, 2.0, 4.0, 8.0],
                vec![],
                vec![OptShrink, RelmseEstimate],
            ),
            Experiment::MissingData => (
                vec![0.1, 0.2, 0.3, 0.5, 0.75, 1.0],
                vec![2.0],
                vec![OptShrink, Eym, Oracle],
            ),
            Experiment::Shrinkers => (
                vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
                vec![],
                vec![OptShrink, Oracle, Eym, Svt { lambda: 1.0 }, Svt { lambda: 2.0 }],
            ),
            Experiment::SvtCompare => (
                vec![1.0, 2.0, 3.0, 4.0],
                vec![],
                vec![OptShrink, Oracle, Svt { lambda: 1.0 }, Svt { lambda: 2.0 }],
            ),
        };
        Self {
            experiment,
            n: 400,
            m: 400,
            trials: 100,
            seed: 0,
            grid,
            thetas,
            r_hat: 1,
            estimators,
        }
    }

    /// Validates and puts the config in canonical form: `n ≤ m` (the model
    /// is symmetric under transposition) and an ascending grid.
    pub fn normalized(mut self) -> Result<Self> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("grid must be nonempty".into()));
        }
        if self.grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidArgument("grid values must be finite".into()));
        }
        if self.n < 2 || self.m < 2 {
            return Err(Error::InvalidArgument("dimensions must be at least 2".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators requested".into()));
        }
        if self.n > self.m {
            std::mem::swap(&mut self.n, &mut self.m);
        }
        self.grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Ok(self)
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.n.min(self.m) as f64 / self.n.max(self.m) as f64
    }
}

/// Parameters of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub thetas: Vec<f64>,
    pub r_hat: usize,
    pub p: f64,
}

pub fn grid_point(config: &ExperimentConfig, value: f64) -> Result<GridPoint> {
    let point = match config.experiment {
        Experiment::WeightsVsTheta
        | Experiment::RelmseAccuracy
        | Experiment::Shrinkers
        | Experiment::SvtCompare => GridPoint {
            thetas: vec![value],
            r_hat: config.r_hat,
            p: 1.0,
        },
        Experiment::MseVsRhat => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "retained rank must be a positive integer, got {value}"
                )));
            }
            GridPoint {
                thetas: config.thetas.clone(),
                r_hat: value as usize,
                p: 1.0,
            }
        }
        Experiment::MissingData => GridPoint {
            thetas: config.thetas.clone(),
            r_hat: config.r_hat,
            p: value,
        },
    };
    if point.thetas.is_empty() {
        return Err(Error::InvalidArgument("experiment needs at least one spike".into()));
    }
    Ok(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// Computed, but some component hit the pole guard.
    PoleFlagged,
    /// Preconditions violated; no value.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EstimateOutcome {
    pub estimator: Estimator,
    /// First weight, divided by `p` so it estimates a weight on `S`.
    pub weight: f64,
    /// `‖pS − Σwᵢûᵢv̂ᵢᵀ‖²_F`.
    pub squared_error: f64,
    /// Squared error divided by `‖pS‖²_F`.
    pub normalized_se: f64,
    pub status: Status,
}

impl EstimateOutcome {
    fn failed(estimator: Estimator) -> Self {
        Self {
            estimator,
            weight: f64::NAN,
            squared_error: f64::NAN,
            normalized_se: f64::NAN,
            status: Status::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialOutcome {
    pub seed: u64,
    /// Leading singular values of the observation (up to 6).
    pub top_singular_values: Vec<f64>,
    pub estimates: Vec<EstimateOutcome>,
    /// Squared error of the unconstrained oracle `(Kᵢᵢ)₊` over all q components,
    /// a lower bound for every nonnegative weighting of the same vectors.
    pub full_oracle_se: f64,
}

impl TrialOutcome {
    pub fn estimate(&self, estimator: &Estimator) -> Option<&EstimateOutcome> {
        self.estimates.iter().find(|e| &e.estimator == estimator)
    }
}

/// Draws the observation for one trial and returns its SVD with the target
/// signal `pS`.
pub fn synthesize(n: usize, m: usize, point: &GridPoint, seed: u64) -> Result<(SignalSpec, SvdFactors)> {
    let signal = SignalSpec::random(n, m, point.thetas.clone(), derive_seed(seed, 1, 0))?;
    let noise = sample_gaussian_matrix(n, m, 1.0 / m as f64, derive_seed(seed, 2, 0))?;
    let mut observed = signal.to_matrix().add(&noise)?;
    if point.p < 1.0 {
        let mask = sample_mask(n, m, point.p, derive_seed(seed, 3, 0))?;
        observed = observed.hadamard_mask(&mask)?;
    }
    Ok((signal.scaled(point.p), svd(&observed)?))
}

fn score(
    estimator: Estimator,
    target: &SignalSpec,
    factors: &SvdFactors,
    weights: &ShrinkageWeights,
    p: f64,
    status: Status,
) -> Result<EstimateOutcome> {
    let squared_error = exact_squared_error(target, factors, weights)?;
    Ok(EstimateOutcome {
        estimator,
        weight: weights.weights().first().copied().unwrap_or(0.0) / p,
        squared_error,
        normalized_se: squared_error / target.energy(),
        status,
    })
}

/// Runs a single `(grid point, trial)` pair.
pub fn run_trial(config: &ExperimentConfig, grid_index: usize, trial: usize) -> Result<TrialOutcome> {
    let value = *config
        .grid
        .get(grid_index)
        .ok_or_else(|| Error::InvalidArgument(format!("grid index {grid_index} out of range")))?;
    let point = grid_point(config, value)?;
    if !(point.p > 0.0 && point.p <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "observation probability must be in (0, 1], got {}",
            point.p
        )));
    }
    let seed = derive_seed(config.seed, grid_index as u64, trial as u64);
    let (target, factors) = synthesize(config.n, config.m, &point, seed)?;
    let diag = oracle_diagonal(&target, &factors)?;
    let q = factors.rank_bound();
    let r_hat = point.r_hat;

    let mut estimates = Vec::with_capacity(config.estimators.len());
    for &estimator in &config.estimators {
        let outcome = match estimator {
            Estimator::OptShrink | Estimator::RelmseEstimate => match optshrink(&factors, r_hat) {
                Ok(report) => {
                    let status = if report.has_pole_flags() { Status::PoleFlagged } else { Status::Ok };
                    let mut out = score(estimator, &target, &factors, &report.weights, point.p, status)?;
                    if estimator == Estimator::RelmseEstimate {
                        out.normalized_se = report.rel_mse_estimate;
                        out.squared_error = report.mse_estimate;
                    }
                    out
                }
                Err(Error::RankOutOfRange { .. }) => EstimateOutcome::failed(estimator),
                Err(e) => return Err(e),
            },
            Estimator::Eym => match eym_weights(&factors, r_hat) {
                Ok(w) => score(estimator, &target, &factors, &w, point.p, Status::Ok)?,
                Err(_) => EstimateOutcome::failed(estimator),
            },
            Estimator::Oracle => match oracle_weights(&diag, r_hat) {
                Ok(w) => score(estimator, &target, &factors, &w, point.p, Status::Ok)?,
                Err(_) => EstimateOutcome::failed(estimator),
            },
            Estimator::OracleRankRegularized => match rank_regularized_weights(&diag, r_hat) {
                Ok(w) => score(estimator, &target, &factors, &w, point.p, Status::Ok)?,
                Err(_) => EstimateOutcome::failed(estimator),
            },
            Estimator::Svt { lambda } => match svt_weights(&factors, lambda) {
                Ok(w) => score(estimator, &target, &factors, &w, point.p, Status::Ok)?,
                Err(_) => EstimateOutcome::failed(estimator),
            },
        };
        estimates.push(outcome);
    }

    let full = rank_regularized_weights(&diag, q)?;
    let full_oracle_se = exact_squared_error(&target, &factors, &full)?;

    Ok(TrialOutcome {
        seed,
        top_singular_values: factors.singular_values().iter().take(6).copied().collect(),
        estimates,
        full_oracle_se,
    })
}

/// Aggregated result for one `(grid point, estimator)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultRow {
    pub sweep_value: f64,
    pub estimator: String,
    pub mean_weight: f64,
    pub mean_normalized_se: f64,
    /// Standard error of `mean_normalized_se`.
    pub std_error: f64,
    /// Asymptotic overlay: a weight or a normalized error, matching what the
    /// experiment plots.
    pub predicted: f64,
    pub trials: usize,
    /// Trials where the estimator hit the pole guard or could not run.
    pub flagged: usize,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Soft-thresholding limit for a single spike, plus `(q − 1)` pure-noise
/// components each keeping `∫(t − λ)₊² dμ` of energy.
fn svt_limit(theta: f64, lambda: f64, q: usize, mp: &MpParams) -> Result<f64> {
    let pred = predict_spike(theta, mp)?;
    let top = if pred.above_threshold {
        limiting_mse(&[theta], &[(pred.rho - lambda).max(0.0)], mp)?
    } else {
        theta * theta + (mp.edge() - lambda).max(0.0).powi(2)
    };
    Ok(top + (q as f64 - 1.0) * bulk_energy_above(lambda, mp))
}

/// Overlay value for one row.
pub fn predicted_value(config: &ExperimentConfig, point: &GridPoint, estimator: &Estimator) -> Result<f64> {
    let mp = MpParams::new(config.aspect_ratio(), point.p)?;
    let lead = point.thetas[0];
    let pred = predict_spike(lead, &mp)?;
    let p = point.p;
    let energy: f64 = point.thetas.iter().map(|t| (p * t).powi(2)).sum();

    if config.experiment.predicts_weight() {
        return Ok(match estimator {
            Estimator::OptShrink | Estimator::Oracle | Estimator::OracleRankRegularized => pred.w_opt_limit / p,
            Estimator::Eym => pred.w_eym_limit / p,
            Estimator::Svt { lambda } => (pred.w_eym_limit - lambda).max(0.0) / p,
            Estimator::RelmseEstimate => f64::NAN,
        });
    }

    let value = match config.experiment {
        Experiment::MseVsRhat => {
            let kind = match estimator {
                Estimator::Eym | Estimator::Svt { .. } => LimitKind::Eym,
                _ => LimitKind::Optimal,
            };
            limiting_mse_for_rank(&point.thetas, point.r_hat, &mp, kind, true)? / energy
        }
        _ => match estimator {
            Estimator::Eym => pred.mse_eym_limit / energy,
            Estimator::Svt { lambda } => svt_limit(lead, *lambda, config.n.min(config.m), &mp)? / energy,
            _ => pred.mse_opt_limit / energy,
        },
    };
    Ok(value)
}

#[cfg(feature = "parallel")]
fn run_all<T, F>(jobs: &[(usize, usize)], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        builder = builder.num_threads(k.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|&(g, t)| f(g, t)).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_all<T, F>(jobs: &[(usize, usize)], f: F) -> Result<Vec<T>>
where
    F: Fn(usize, usize) -> Result<T>,
{
    jobs.iter().map(|&(g, t)| f(g, t)).collect()
}

/// Every trial of every grid point, in `(grid, trial)` order.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<Vec<TrialOutcome>>> {
    let config = config.clone().normalized()?;
    let jobs: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|g| (0..config.trials).map(move |t| (g, t)))
        .collect();
    let flat = run_all(&jobs, |g, t| run_trial(&config, g, t))?;
    let mut out: Vec<Vec<TrialOutcome>> = Vec::with_capacity(config.grid.len());
    let mut it = flat.into_iter();
    for _ in 0..config.grid.len() {
        out.push(it.by_ref().take(config.trials).collect());
    }
    Ok(out)
}

pub fn aggregate(config: &ExperimentConfig, trials: &[Vec<TrialOutcome>]) -> Result<Vec<ResultRow>> {
    let config = config.clone().normalized()?;
    let mut rows = Vec::new();
    for (g, per_trial) in trials.iter().enumerate() {
        let value = config.grid[g];
        let point = grid_point(&config, value)?;
        for estimator in &config.estimators {
            let outcomes: Vec<&EstimateOutcome> = per_trial.iter().filter_map(|t| t.estimate(estimator)).collect();
            let usable: Vec<&&EstimateOutcome> = outcomes.iter().filter(|o| o.status != Status::Failed).collect();
            let weights: Vec<f64> = usable.iter().map(|o| o.weight).collect();
            let nse: Vec<f64> = usable.iter().map(|o| o.normalized_se).collect();
            let (mean_weight, _) = mean_and_stderr(&weights);
            let (mean_nse, stderr) = mean_and_stderr(&nse);
            let predicted = predicted_value(&config, &point, estimator).unwrap_or(f64::NAN);
            rows.push(ResultRow {
                sweep_value: value,
                estimator: estimator.label(),
                mean_weight,
                mean_normalized_se: mean_nse,
                std_error: stderr,
                predicted,
                trials: outcomes.len(),
                flagged: outcomes.iter().filter(|o| o.status != Status::Ok).count(),
            });
        }
    }
    Ok(rows)
}

/// Runs every trial and aggregates into one row per `(grid point, estimator)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let trials = run_trials(config)?;
    aggregate(config, &trials)
}

/// Decimal with 10 significant digits; scientific outside `[1e-5, 1e15)`.
pub fn format_sig10(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.9e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..15).contains(&exp) {
        format!("{:.*}", (9 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            format_sig10(row.sweep_value),
            row.estimator,
            format_sig10(row.mean_weight),
            format_sig10(row.mean_normalized_se),
            format_sig10(row.std_error),
            format_sig10(row.predicted)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_csv(rows, std::fs::File::create(path)?)
}

/// Provenance written next to every CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sidecar {
    pub config: ExperimentConfig,
    pub rng: String,
    pub seed: u64,
    pub seed_derivation: String,
    pub library_version: String,
    pub rows: Vec<ResultRow>,
}

impl Sidecar {
    pub fn new(config: &ExperimentConfig, rows: &[ResultRow]) -> Self {
        Self {
            config: config.clone(),
            rng: RNG_NAME.into(),
            seed: config.seed,
            seed_derivation: "trial seed = derive_seed(seed, grid_index, trial); \
                              streams 1/2/3 of the trial seed drive frames/noise/mask"
                .into(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            rows: rows.to_vec(),
        }
    }
}

/// Sidecar path for a CSV output: same stem, `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

pub fn save_sidecar(config: &ExperimentConfig, rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, &Sidecar::new(config, rows))?;
    Ok(())
}
