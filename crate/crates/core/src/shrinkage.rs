//! Estimators that see only the observed matrix: OptShrink, truncated SVD
//! (EYM) and singular value soft-thresholding, plus reconstruction and the
//! data-driven error estimates.

use serde::{Deserialize, Serialize};

use crate::dtransform::{empirical_d_pair, NoiseSpectrum};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SvdFactors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    OptShrink,
    Eym,
    Svt,
    Oracle,
}

/// Per-component weights `wᵢ` applied to `ûᵢ v̂ᵢᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShrinkageWeights {
    weights: Vec<f64>,
    method: Method,
    r_hat: usize,
}

impl ShrinkageWeights {
    pub fn new(weights: Vec<f64>, method: Method, r_hat: usize) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            weights,
            method,
            r_hat,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn r_hat(&self) -> usize {
        self.r_hat
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Same weights divided by `p`; maps an estimate of `pS` to one of `S`.
    pub fn rescaled(&self, p: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w / p).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportMetadata {
    pub rows: usize,
    pub cols: usize,
    pub transposed: bool,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    /// Components whose singular value sat within the pole guard of the noise
    /// spectrum; their weight is 0.
    pub pole_flags: Vec<bool>,
    pub rel_mse_out_of_range: bool,
    /// Fraction of observed entries when the input had missing values.
    pub observed_fraction: Option<f64>,
}

/// Output of [`optshrink`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DenoiseReport {
    pub weights: ShrinkageWeights,
    pub sigma_hat: Vec<f64>,
    /// `D̂(σ̂ᵢ)`; `None` for pole-flagged components.
    pub d_values: Vec<Option<f64>>,
    pub d_prime_values: Vec<Option<f64>>,
    pub mse_estimate: f64,
    pub rel_mse_estimate: f64,
    pub metadata: ReportMetadata,
}

impl DenoiseReport {
    pub fn has_pole_flags(&self) -> bool {
        self.metadata.pole_flags.iter().any(|&f| f)
    }

    /// Signal singular value estimates `θ̂ᵢ = 1/√D̂ᵢ`.
    pub fn theta_estimates(&self) -> Vec<Option<f64>> {
        self.d_values.iter().map(|d| d.map(|d| d.recip().sqrt())).collect()
    }
}

/// OptShrink: `ŵᵢ = −2 D̂(σ̂ᵢ) / D̂′(σ̂ᵢ)` for the top `r_hat` components, with
/// D̂ built from the remaining `q − r_hat` singular values.
pub fn optshrink(factors: &SvdFactors, r_hat: usize) -> Result<DenoiseReport> {
    let q = factors.rank_bound();
    if r_hat == 0 || r_hat >= q {
        return Err(Error::RankOutOfRange {
            rank: r_hat,
            min: 1,
            max: q.saturating_sub(1),
        });
    }
    let sigma = factors.singular_values();
    let spectrum = NoiseSpectrum::from_tail(sigma, factors.rows(), factors.cols(), r_hat)?;

    let mut weights = Vec::with_capacity(r_hat);
    let mut d_values = Vec::with_capacity(r_hat);
    let mut d_prime_values = Vec::with_capacity(r_hat);
    let mut pole_flags = Vec::with_capacity(r_hat);
    let (mut theta_sq_sum, mut w_sq_sum) = (0.0, 0.0);

    for &s in &sigma[..r_hat] {
        match empirical_d_pair(s, &spectrum) {
            Ok((d, dp)) => {
                let w = (-2.0 * d / dp).max(0.0);
                weights.push(w);
                d_values.push(Some(d));
                d_prime_values.push(Some(dp));
                pole_flags.push(false);
                theta_sq_sum += d.recip();
                w_sq_sum += w * w;
            }
            Err(Error::PoleProximity { .. }) => {
                weights.push(0.0);
                d_values.push(None);
                d_prime_values.push(None);
                pole_flags.push(true);
            }
            Err(e) => return Err(e),
        }
    }

    let mse_estimate = theta_sq_sum - w_sq_sum;
    let (rel_mse_estimate, rel_mse_out_of_range) = if theta_sq_sum > 0.0 {
        let raw = 1.0 - w_sq_sum / theta_sq_sum;
        (raw.clamp(0.0, 1.0), !(0.0..=1.0).contains(&raw))
    } else {
        (1.0, false)
    };

    Ok(DenoiseReport {
        weights: ShrinkageWeights::new(weights, Method::OptShrink, r_hat)?,
        sigma_hat: sigma[..r_hat].to_vec(),
        d_values,
        d_prime_values,
        mse_estimate,
        rel_mse_estimate,
        metadata: ReportMetadata {
            rows: factors.rows(),
            cols: factors.cols(),
            transposed: factors.transposed(),
            pole_flags,
            rel_mse_out_of_range,
            ..Default::default()
        },
    })
}

/// Truncated SVD: `wᵢ = σ̂ᵢ` for `i ≤ r_hat`.
pub fn eym_weights(factors: &SvdFactors, r_hat: usize) -> Result<ShrinkageWeights> {
    let q = factors.rank_bound();
    if r_hat == 0 || r_hat > q {
        return Err(Error::RankOutOfRange {
            rank: r_hat,
            min: 1,
            max: q,
        });
    }
    ShrinkageWeights::new(factors.singular_values()[..r_hat].to_vec(), Method::Eym, r_hat)
}

/// Soft-thresholding `wᵢ = (σ̂ᵢ − λ)₊`; zero weights are dropped.
pub fn svt_weights(factors: &SvdFactors, lambda: f64) -> Result<ShrinkageWeights> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold must be nonnegative, got {lambda}"
        )));
    }
    let weights: Vec<f64> = factors
        .singular_values()
        .iter()
        .take_while(|&&s| s > lambda)
        .map(|s| s - lambda)
        .collect();
    let kept = weights.len();
    ShrinkageWeights::new(weights, Method::Svt, kept)
}

/// `Σᵢ wᵢ ûᵢ v̂ᵢᵀ`.
pub fn reconstruct(factors: &SvdFactors, weights: &ShrinkageWeights) -> Result<DenseMatrix> {
    let q = factors.rank_bound();
    if weights.len() > q {
        return Err(Error::DimensionMismatch {
            expected: format!("at most {q} weights"),
            actual: format!("{}", weights.len()),
        });
    }
    let mut out = DenseMatrix::zeros(factors.rows(), factors.cols());
    for (i, &w) in weights.weights().iter().enumerate() {
        out.add_rank_one(w, factors.left(i), factors.right(i));
    }
    Ok(out)
}

/// Rank guess from the largest relative gap `(σ̂ᵢ − σ̂ᵢ₊₁)/σ̂ᵢ` over the top
/// half of the spectrum.
///
/// This is a convenience heuristic only; it has no optimality guarantee.
pub fn gap_rank_estimate(singular_values: &[f64]) -> usize {
    let q = singular_values.len();
    let limit = (q / 2).max(1).min(q.saturating_sub(1));
    let mut best = (1, f64::NEG_INFINITY);
    for i in 0..limit {
        let (a, b) = (singular_values[i], singular_values[i + 1]);
        if a <= 0.0 {
            break;
        }
        let gap = (a - b) / a;
        if gap > best.1 {
            best = (i + 1, gap);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm_sq, svd};
    use crate::random::{derive_seed, sample_gaussian_matrix, SignalSpec};
    use proptest::prelude::*;

    fn diag_factors(values: &[f64], n: usize, m: usize) -> SvdFactors {
        svd(&DenseMatrix::from_diagonal(n, m, values)).unwrap()
    }

    #[test]
    fn toy_spectrum() {
        let f = diag_factors(&[2.0, 1.0], 2, 2);
        let report = optshrink(&f, 1).unwrap();
        assert!((report.weights.weights()[0] - 1.2).abs() < 1e-12);
        assert!((report.d_values[0].unwrap() - 4.0 / 9.0).abs() < 1e-14);
        assert!((report.d_prime_values[0].unwrap() + 20.0 / 27.0).abs() < 1e-14);
        // 1/D = 2.25, w² = 1.44
        assert!((report.mse_estimate - 0.81).abs() < 1e-12);
        assert!((report.rel_mse_estimate - 0.36).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_fixed_point() {
        let signal = SignalSpec::random(10, 10, vec![3.0], 5).unwrap();
        let s = signal.to_matrix();
        let f = svd(&s).unwrap();
        let report = optshrink(&f, 1).unwrap();
        assert!((report.weights.weights()[0] - 3.0).abs() < 1e-9);
        assert!(report.rel_mse_estimate < 1e-9);
        let err = frobenius_norm_sq(&reconstruct(&f, &report.weights).unwrap().sub(&s).unwrap());
        assert!(err.sqrt() < 1e-8 * 3.0);

        // Exactly zero tail, rectangular.
        let f = diag_factors(&[4.0, 2.5, 0.0, 0.0], 4, 7);
        let report = optshrink(&f, 2).unwrap();
        assert!((report.weights.weights()[0] - 4.0).abs() < 1e-12);
        assert!((report.weights.weights()[1] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rank_out_of_range() {
        let f = diag_factors(&[3.0, 2.0, 1.0], 3, 3);
        assert!(matches!(optshrink(&f, 0), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(optshrink(&f, 3), Err(Error::RankOutOfRange { .. })));
        assert!(eym_weights(&f, 4).is_err());
    }

    #[test]
    fn pole_flagged_component_gets_zero() {
        let f = diag_factors(&[3.0, 1.0, 1.0, 0.5], 4, 4);
        let report = optshrink(&f, 2).unwrap();
        assert_eq!(report.metadata.pole_flags, vec![false, true]);
        assert_eq!(report.weights.weights()[1], 0.0);
        assert!(report.d_values[1].is_none());
        assert!(report.weights.weights()[0] > 0.0);
    }

    #[test]
    fn eym_and_svt_examples() {
        let f = diag_factors(&[3.0, 2.0, 1.0], 3, 3);
        assert_eq!(eym_weights(&f, 2).unwrap().weights(), &[3.0, 2.0]);
        assert_eq!(eym_weights(&f, 3).unwrap().weights(), f.singular_values());
        assert_eq!(svt_weights(&f, 2.0).unwrap().weights(), &[1.0]);
        assert_eq!(svt_weights(&f, 1.5).unwrap().weights(), &[1.5, 0.5]);
        assert_eq!(
            svt_weights(&f, 0.0).unwrap().weights(),
            eym_weights(&f, 3).unwrap().weights()
        );
        assert!(svt_weights(&f, -0.1).is_err());
    }

    #[test]
    fn reconstruct_examples() {
        let a = DenseMatrix::from_fn(4, 6, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0);
        let f = svd(&a).unwrap();
        let zero = ShrinkageWeights::new(vec![0.0; 4], Method::Eym, 4).unwrap();
        assert_eq!(frobenius_norm_sq(&reconstruct(&f, &zero).unwrap()), 0.0);
        let full = eym_weights(&f, 4).unwrap();
        let err = frobenius_norm_sq(&reconstruct(&f, &full).unwrap().sub(&a).unwrap()).sqrt();
        assert!(err <= 1e-6 * frobenius_norm_sq(&a).sqrt());
        let one = ShrinkageWeights::new(vec![1.7], Method::Eym, 1).unwrap();
        assert!((frobenius_norm_sq(&reconstruct(&f, &one).unwrap()) - 1.7 * 1.7).abs() < 1e-12);
        let too_many = ShrinkageWeights::new(vec![1.0; 5], Method::Eym, 5).unwrap();
        assert!(reconstruct(&f, &too_many).is_err());
    }

    #[test]
    fn report_serializes_camel_case() {
        let report = optshrink(&diag_factors(&[2.0, 1.0], 2, 2), 1).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for key in ["weights", "sigmaHat", "dValues", "dPrimeValues", "mseEstimate", "relMseEstimate", "metadata"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["weights"]["method"], "optshrink");
        assert_eq!(json["weights"]["rHat"], 1);
    }

    #[test]
    fn deterministic_reports() {
        let x = sample_gaussian_matrix(30, 40, 1.0 / 40.0, 3).unwrap();
        let f = svd(&x).unwrap();
        assert_eq!(optshrink(&f, 2).unwrap(), optshrink(&f, 2).unwrap());
    }

    #[test]
    fn gap_heuristic_finds_spikes() {
        let mut values = vec![10.0, 6.0];
        values.extend((0..40).map(|i| 2.0 - i as f64 * 0.04));
        assert_eq!(gap_rank_estimate(&values), 2);
    }

    /// 100 seeds at n = m = 400: mean OptShrink weight near the 1.5 limit
    /// and mean σ̂₁ near ρ = 2.5.
    #[test]
    fn monte_carlo_weight_and_spike_location() {
        let (n, trials) = (400, 100);
        let (mut w_sum, mut s_sum) = (0.0, 0.0);
        for t in 0..trials {
            let seed = derive_seed(0xD15EA5E, t, 0);
            let signal = SignalSpec::random(n, n, vec![2.0], derive_seed(seed, 1, 0)).unwrap();
            let noise = sample_gaussian_matrix(n, n, 1.0 / n as f64, derive_seed(seed, 2, 0)).unwrap();
            let f = svd(&signal.to_matrix().add(&noise).unwrap()).unwrap();
            w_sum += optshrink(&f, 1).unwrap().weights.weights()[0];
            s_sum += eym_weights(&f, 1).unwrap().weights()[0];
        }
        let (w, s) = (w_sum / trials as f64, s_sum / trials as f64);
        assert!((1.42..=1.58).contains(&w), "mean optshrink weight {w}");
        assert!((2.45..=2.55).contains(&s), "mean sigma_1 {s}");
    }

    fn factors_strategy() -> impl Strategy<Value = (SvdFactors, usize)> {
        (1usize..4, 3usize..12, 0usize..5).prop_flat_map(|(r_hat, tail, extra)| {
            let n = r_hat + tail;
            (
                prop::collection::vec(0.01f64..2.0, tail),
                prop::collection::vec(0.05f64..5.0, r_hat),
            )
                .prop_map(move |(mut noise, bumps)| {
                    noise.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    let mut top = Vec::with_capacity(r_hat);
                    let mut level = noise[0];
                    for b in bumps.iter().rev() {
                        level += b;
                        top.push(level);
                    }
                    top.reverse();
                    let mut values = top;
                    values.extend(noise);
                    (diag_factors(&values, n, n + extra), r_hat)
                })
        })
    }

    proptest! {
        #[test]
        fn weights_shrink_and_mse_is_consistent((f, r_hat) in factors_strategy()) {
            let report = optshrink(&f, r_hat).unwrap();
            for (w, s) in report.weights.weights().iter().zip(&report.sigma_hat) {
                prop_assert!(*w > 0.0 && w < s, "w={} sigma={}", w, s);
            }
            prop_assert!(report.mse_estimate >= 0.0);
            prop_assert!((0.0..1.0).contains(&report.rel_mse_estimate));
            prop_assert!(!report.metadata.rel_mse_out_of_range);
            let inv_d: f64 = report.d_values.iter().map(|d| 1.0 / d.unwrap()).sum();
            let w2: f64 = report.weights.weights().iter().map(|w| w * w).sum();
            prop_assert!((report.mse_estimate - (inv_d - w2)).abs() <= 1e-12 * inv_d);
            prop_assert!((report.rel_mse_estimate - (1.0 - w2 / inv_d)).abs() <= 1e-12);
        }

        #[test]
        fn weight_increases_with_singular_value(noise in prop::collection::vec(0.01f64..2.0, 5)) {
            let mut noise = noise;
            noise.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let spectrum = NoiseSpectrum::new(noise.clone(), 5, 8).unwrap();
            let mut prev = 0.0;
            for k in 1..60 {
                let z = noise[0] * (1.0 + 0.05 * k as f64);
                let (d, dp) = empirical_d_pair(z, &spectrum).unwrap();
                let w = -2.0 * d / dp;
                prop_assert!(w > prev);
                prev = w;
            }
        }
    }
}
