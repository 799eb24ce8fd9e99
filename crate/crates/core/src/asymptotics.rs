//! Large-matrix predictions for Marčenko–Pastur noise with entries observed
//! independently with probability `p`.
//!
//! Masking turns the model into spikes `pθᵢ` plus noise of variance `p/m`,
//! so every formula below is the fully observed one under that
//! substitution; `p = 1` is the fully observed case. Squared errors are for
//! approximating `pS`.

use serde::{Deserialize, Serialize};

use crate::dtransform::{mp_d_transform, mp_d_transform_derivative, MpParams};
use crate::error::{Error, Result};

/// Limits for one spike `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AsymptoticPrediction {
    pub theta: f64,
    pub above_threshold: bool,
    pub rho: f64,
    pub w_opt_limit: f64,
    pub w_eym_limit: f64,
    pub mse_opt_limit: f64,
    pub mse_eym_limit: f64,
}

/// Critical spike `θ_c = c^{1/4}/√p`.
pub fn critical_theta(mp: &MpParams) -> f64 {
    mp.c().powf(0.25) / mp.p().sqrt()
}

pub fn is_above_threshold(theta: f64, mp: &MpParams) -> bool {
    theta > critical_theta(mp)
}

fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "spike strength must be positive, got {theta}"
        )));
    }
    Ok(())
}

/// Almost-sure limit of σ̂ᵢ for an above-threshold spike,
/// `√p·√((1+pθ²)(c+pθ²)/(pθ²))`.
pub fn spike_location(theta: f64, mp: &MpParams) -> Result<f64> {
    check_theta(theta)?;
    if !is_above_threshold(theta, mp) {
        return Err(Error::BelowThreshold {
            theta,
            threshold: critical_theta(mp),
        });
    }
    let (c, p) = (mp.c(), mp.p());
    let s = p * theta * theta;
    Ok(p.sqrt() * ((1.0 + s) * (c + s) / s).sqrt())
}

fn optimal_weight_closed_form(theta: f64, mp: &MpParams) -> f64 {
    let (c, p) = (mp.c(), mp.p());
    let s = p * theta * theta;
    let first = 1.0 - c * (1.0 + s) / (s * (s + c));
    let second = 1.0 - (c + s) / (s * (s + 1.0));
    p * theta * first.max(0.0).sqrt() * second.max(0.0).sqrt()
}

/// `−2 D(ρ)/D′(ρ)` evaluated through the D-transform; agrees with the
/// closed form used by [`predict_spike`].
pub fn optimal_weight_via_dtransform(theta: f64, mp: &MpParams) -> Result<f64> {
    let rho = spike_location(theta, mp)?;
    Ok(-2.0 * mp_d_transform(rho, mp)? / mp_d_transform_derivative(rho, mp)?)
}

pub fn predict_spike(theta: f64, mp: &MpParams) -> Result<AsymptoticPrediction> {
    check_theta(theta)?;
    let signal = mp.p() * theta;
    if is_above_threshold(theta, mp) {
        let rho = spike_location(theta, mp)?;
        let w_opt = optimal_weight_closed_form(theta, mp);
        Ok(AsymptoticPrediction {
            theta,
            above_threshold: true,
            rho,
            w_opt_limit: w_opt,
            w_eym_limit: rho,
            mse_opt_limit: signal * signal - w_opt * w_opt,
            // 4ρ/(θ²D′(ρ)) = −2ρ·w_opt
            mse_eym_limit: signal * signal + rho * rho - 2.0 * rho * w_opt,
        })
    } else {
        let b = mp.edge();
        Ok(AsymptoticPrediction {
            theta,
            above_threshold: false,
            rho: b,
            w_opt_limit: 0.0,
            w_eym_limit: b,
            mse_opt_limit: signal * signal,
            mse_eym_limit: signal * signal + b * b,
        })
    }
}

/// Observation probability below which a spike `θ` becomes uninformative,
/// `√c/θ²`.
pub fn phase_transition_p(theta: f64, c: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "aspect ratio c must be in (0, 1], got {c}"
        )));
    }
    Ok(c.sqrt() / (theta * theta))
}

fn check_descending(thetas: &[f64]) -> Result<()> {
    for &t in thetas {
        check_theta(t)?;
    }
    if thetas.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("spikes must be sorted descending".into()));
    }
    Ok(())
}

/// Number of spikes above the phase transition.
pub fn effective_rank(thetas: &[f64], mp: &MpParams) -> Result<usize> {
    check_descending(thetas)?;
    Ok(thetas.iter().filter(|&&t| is_above_threshold(t, mp)).count())
}

/// Limiting squared error of an arbitrary weighting of the top `r` components,
/// `Σ((pθᵢ)² + wᵢ² + 4wᵢ/((pθᵢ)² D′(ρᵢ)))`. Every spike must be above the
/// threshold.
pub fn limiting_mse(thetas: &[f64], weights: &[f64], mp: &MpParams) -> Result<f64> {
    if thetas.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} weights", thetas.len()),
            actual: format!("{}", weights.len()),
        });
    }
    let mut total = 0.0;
    for (&theta, &w) in thetas.iter().zip(weights) {
        check_theta(theta)?;
        if !is_above_threshold(theta, mp) {
            return Err(Error::BelowThreshold {
                theta,
                threshold: critical_theta(mp),
            });
        }
        let rho = spike_location(theta, mp)?;
        let signal_sq = (mp.p() * theta).powi(2);
        let dp = mp_d_transform_derivative(rho, mp)?;
        total += signal_sq + w * w + 4.0 * w / (signal_sq * dp);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitKind {
    Optimal,
    Eym,
}

/// Limiting squared error when `r_hat` components are kept and spikes below
/// the threshold may be present.
///
/// Components beyond the effective rank are assumed to carry no signal
/// (singular-vector delocalization). That is unproven, so callers must opt in
/// with `assume_delocalization`.
pub fn limiting_mse_for_rank(
    thetas: &[f64],
    r_hat: usize,
    mp: &MpParams,
    kind: LimitKind,
    assume_delocalization: bool,
) -> Result<f64> {
    if !assume_delocalization {
        return Err(Error::InvalidArgument(
            "rank-misspecified limits require assume_delocalization".into(),
        ));
    }
    let r_eff = effective_rank(thetas, mp)?;
    let informative = r_eff.min(r_hat);
    let b2 = mp.edge().powi(2);
    let mut total = 0.0;
    for &theta in &thetas[..informative] {
        let pred = predict_spike(theta, mp)?;
        total += match kind {
            LimitKind::Optimal => pred.mse_opt_limit,
            LimitKind::Eym => pred.mse_eym_limit,
        };
    }
    for i in informative..thetas.len().max(r_hat) {
        let signal_sq = thetas.get(i).map_or(0.0, |t| (mp.p() * t).powi(2));
        // A retained uninformative component costs b² under truncation.
        let retained_penalty = if kind == LimitKind::Eym && i < r_hat { b2 } else { 0.0 };
        total += signal_sq + retained_penalty;
    }
    Ok(total)
}

/// `∫ (t − λ)₊² dμ(t)` over the Marčenko–Pastur singular value law: the
/// limiting per-component energy that soft-thresholding at `λ` keeps from
/// pure-noise components.
pub fn bulk_energy_above(lambda: f64, mp: &MpParams) -> f64 {
    let lo = mp.lower_edge().max(lambda);
    let hi = mp.edge();
    if lo >= hi {
        return 0.0;
    }
    let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
    let steps = 4000;
    let h = std::f64::consts::PI / steps as f64;
    (0..steps)
        .map(|k| {
            let t = h * (k as f64 + 0.5);
            let x = mid + half * t.cos();
            (x - lambda).max(0.0).powi(2) * mp.density(x) * half * t.sin()
        })
        .sum::<f64>()
        * h
}
