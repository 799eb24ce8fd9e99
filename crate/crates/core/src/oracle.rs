//! Oracle estimators that know the true signal.
//!
//! With `Kᵢᵢ = Σⱼ θⱼ (ûᵢᵀuⱼ)(vⱼᵀv̂ᵢ)` the squared error of any weighting on the
//! observed singular vectors is `Σθⱼ² + Σwᵢ² − 2Σwᵢ Kᵢᵢ`, so the best
//! nonnegative weight on each component is `(Kᵢᵢ)₊`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, frobenius_norm_sq, SvdFactors};
use crate::random::SignalSpec;
use crate::shrinkage::{reconstruct, Method, ShrinkageWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleDiagonal {
    k_values: Vec<f64>,
}

impl OracleDiagonal {
    pub fn new(k_values: Vec<f64>) -> Result<Self> {
        if k_values.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidArgument("K diagonal must be finite".into()));
        }
        Ok(Self { k_values })
    }

    pub fn k_values(&self) -> &[f64] {
        &self.k_values
    }

    pub fn len(&self) -> usize {
        self.k_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_values.is_empty()
    }
}

fn check_shapes(signal: &SignalSpec, factors: &SvdFactors) -> Result<()> {
    if signal.rows() != factors.rows() || signal.cols() != factors.cols() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} signal", factors.rows(), factors.cols()),
            actual: format!("{}x{}", signal.rows(), signal.cols()),
        });
    }
    Ok(())
}

pub fn oracle_diagonal(signal: &SignalSpec, factors: &SvdFactors) -> Result<OracleDiagonal> {
    check_shapes(signal, factors)?;
    let k_values = (0..factors.rank_bound())
        .map(|i| {
            signal
                .thetas()
                .iter()
                .enumerate()
                .map(|(j, &theta)| {
                    theta * dot(factors.left(i), signal.left(j)) * dot(signal.right(j), factors.right(i))
                })
                .sum()
        })
        .collect();
    OracleDiagonal::new(k_values)
}

/// `wᵢ = (Kᵢᵢ)₊` for the first `r` components.
pub fn oracle_weights(diag: &OracleDiagonal, r: usize) -> Result<ShrinkageWeights> {
    if r == 0 || r > diag.len() {
        return Err(Error::RankOutOfRange {
            rank: r,
            min: 1,
            max: diag.len(),
        });
    }
    let weights = diag.k_values[..r].iter().map(|k| k.max(0.0)).collect();
    ShrinkageWeights::new(weights, Method::Oracle, r)
}

/// Best weighting with at most `r_hat` nonzeros over all `q` components:
/// the `r_hat` largest `(Kᵢᵢ)₊` kept in place, ties to the lower index.
pub fn rank_regularized_weights(diag: &OracleDiagonal, r_hat: usize) -> Result<ShrinkageWeights> {
    let q = diag.len();
    if r_hat == 0 || r_hat > q {
        return Err(Error::RankOutOfRange {
            rank: r_hat,
            min: 1,
            max: q,
        });
    }
    let positive: Vec<f64> = diag.k_values.iter().map(|k| k.max(0.0)).collect();
    let mut order: Vec<usize> = (0..q).collect();
    // Stable sort: equal values keep index order.
    order.sort_by(|&a, &b| positive[b].partial_cmp(&positive[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut weights = vec![0.0; q];
    for &i in order.iter().take(r_hat) {
        weights[i] = positive[i];
    }
    ShrinkageWeights::new(weights, Method::Oracle, r_hat)
}

/// `Σθⱼ² + Σwᵢ² − 2Σwᵢ Kᵢᵢ`.
pub fn squared_error_expansion(signal: &SignalSpec, diag: &OracleDiagonal, weights: &ShrinkageWeights) -> Result<f64> {
    if weights.len() > diag.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("at most {} weights", diag.len()),
            actual: format!("{}", weights.len()),
        });
    }
    let cross: f64 = weights.weights().iter().zip(&diag.k_values).map(|(w, k)| w * k).sum();
    let w2: f64 = weights.weights().iter().map(|w| w * w).sum();
    Ok(signal.energy() + w2 - 2.0 * cross)
}

/// `‖S − Σᵢ wᵢ ûᵢ v̂ᵢᵀ‖²_F`, computed directly. Debug builds also evaluate the
/// K-diagonal expansion and check agreement.
pub fn exact_squared_error(signal: &SignalSpec, factors: &SvdFactors, weights: &ShrinkageWeights) -> Result<f64> {
    check_shapes(signal, factors)?;
    let estimate = reconstruct(factors, weights)?;
    let direct = frobenius_norm_sq(&signal.to_matrix().sub(&estimate)?);
    #[cfg(debug_assertions)]
    {
        let diag = oracle_diagonal(signal, factors)?;
        let expanded = squared_error_expansion(signal, &diag, weights)?;
        let w2: f64 = weights.weights().iter().map(|w| w * w).sum();
        let scale = (signal.energy() + w2).max(1.0);
        debug_assert!(
            (direct - expanded).abs() <= 1e-10 * scale,
            "squared error paths disagree: direct {direct}, expansion {expanded}"
        );
    }
    Ok(direct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{svd, DenseMatrix};
    use crate::random::{derive_seed, sample_gaussian_matrix};
    use crate::shrinkage::eym_weights;
    use proptest::prelude::*;

    fn identity_factors(n: usize) -> SvdFactors {
        svd(&DenseMatrix::from_diagonal(n, n, &(0..n).map(|i| (n - i) as f64).collect::<Vec<_>>())).unwrap()
    }

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn noise_free_alignment() {
        let signal = SignalSpec::random(6, 8, vec![4.0, 1.5], 3).unwrap();
        let f = svd(&signal.to_matrix()).unwrap();
        let diag = oracle_diagonal(&signal, &f).unwrap();
        assert!((diag.k_values()[0] - 4.0).abs() < 1e-12);
        assert!((diag.k_values()[1] - 1.5).abs() < 1e-12);
        assert!(diag.k_values()[2..].iter().all(|k| k.abs() < 1e-12));
        let w = oracle_weights(&diag, 2).unwrap();
        assert!((w.weights()[0] - 4.0).abs() < 1e-12);
        assert!(exact_squared_error(&signal, &f, &w).unwrap() < 1e-20);
    }

    #[test]
    fn orthogonal_factors_give_zero() {
        let signal = SignalSpec::new(vec![2.0], vec![e(3, 2)], vec![e(3, 2)]).unwrap();
        let f = svd(&DenseMatrix::from_diagonal(3, 3, &[2.0, 1.0, 0.0])).unwrap();
        let diag = oracle_diagonal(&signal, &f).unwrap();
        assert!(diag.k_values()[0].abs() < 1e-15);
        assert!(diag.k_values()[1].abs() < 1e-15);
    }

    #[test]
    fn hand_built_overlaps() {
        // û₁ = e₁, v̂₁ = e₁; u₁ has overlap 0.8 with e₁, v₁ has overlap 0.9,
        // the rest of u₁, v₁ and all of u₂, v₂ live on e₃.
        let f = identity_factors(3);
        let u1 = vec![0.8, 0.0, 0.6];
        let v1 = vec![0.9, 0.0, (1.0f64 - 0.81).sqrt()];
        let u2 = vec![-0.6, 0.0, 0.8];
        let v2 = vec![-(1.0f64 - 0.81).sqrt(), 0.0, 0.9];
        let signal = SignalSpec::new(vec![2.0, 1.0], vec![u1, u2], vec![v1, v2]).unwrap();
        let diag = oracle_diagonal(&signal, &f).unwrap();
        // θ₁·0.8·0.9 + θ₂·(−0.6)(−0.436); the second term is the cross term.
        let cross = 1.0 * 0.6 * (1.0f64 - 0.81).sqrt();
        assert!((diag.k_values()[0] - (1.44 + cross)).abs() < 1e-12);

        // Pure example: cross term switched off by placing u₂ on e₂.
        let signal = SignalSpec::new(
            vec![2.0, 1.0],
            vec![vec![0.8, 0.0, 0.6], e(3, 1)],
            vec![vec![0.9, 0.0, (1.0f64 - 0.81).sqrt()], e(3, 1)],
        )
        .unwrap();
        let diag = oracle_diagonal(&signal, &f).unwrap();
        assert!((diag.k_values()[0] - 1.44).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let signal = SignalSpec::random(4, 4, vec![1.0], 0).unwrap();
        assert!(oracle_diagonal(&signal, &identity_factors(3)).is_err());
    }

    #[test]
    fn positive_part_and_selection() {
        let diag = OracleDiagonal::new(vec![1.5, -0.2]).unwrap();
        assert_eq!(oracle_weights(&diag, 2).unwrap().weights(), &[1.5, 0.0]);
        assert!(oracle_weights(&diag, 3).is_err());

        let diag = OracleDiagonal::new(vec![0.2, 0.9, 0.5]).unwrap();
        assert_eq!(rank_regularized_weights(&diag, 2).unwrap().weights(), &[0.0, 0.9, 0.5]);
        assert_eq!(rank_regularized_weights(&diag, 3).unwrap().weights(), &[0.2, 0.9, 0.5]);
        let ties = OracleDiagonal::new(vec![0.5, 0.7, 0.5, 0.5]).unwrap();
        assert_eq!(rank_regularized_weights(&ties, 2).unwrap().weights(), &[0.5, 0.7, 0.0, 0.0]);
        assert!(rank_regularized_weights(&ties, 0).is_err());
    }

    #[test]
    fn expansion_arithmetic() {
        let f = identity_factors(2);
        let signal = SignalSpec::new(
            vec![2.0],
            vec![vec![(0.75f64).sqrt(), (0.25f64).sqrt()]],
            vec![e(2, 0)],
        )
        .unwrap();
        let diag = oracle_diagonal(&signal, &f).unwrap();
        assert!((diag.k_values()[0] - 2.0 * 0.75f64.sqrt()).abs() < 1e-15);

        // K₁₁ = θ·0.75 = 1.5 by direct construction of the diagonal.
        let diag = OracleDiagonal::new(vec![1.5]).unwrap();
        let w = ShrinkageWeights::new(vec![1.0], Method::Oracle, 1).unwrap();
        let se = squared_error_expansion(&signal, &diag, &w).unwrap();
        assert!((se - 2.0).abs() < 1e-15);

        let zero = ShrinkageWeights::new(vec![0.0], Method::Oracle, 1).unwrap();
        assert!((exact_squared_error(&signal, &f, &zero).unwrap() - 4.0).abs() < 1e-12);
    }

    /// Monte Carlo: mean oracle weight near the 1.5 limit at n = m = 400, θ = 2.
    #[test]
    fn monte_carlo_oracle_weight() {
        let (n, trials) = (400, 100);
        let mut sum = 0.0;
        for t in 0..trials {
            let seed = derive_seed(0x0AC1E, t, 0);
            let signal = SignalSpec::random(n, n, vec![2.0], derive_seed(seed, 1, 0)).unwrap();
            let noise = sample_gaussian_matrix(n, n, 1.0 / n as f64, derive_seed(seed, 2, 0)).unwrap();
            let f = svd(&signal.to_matrix().add(&noise).unwrap()).unwrap();
            let diag = oracle_diagonal(&signal, &f).unwrap();
            sum += oracle_weights(&diag, 1).unwrap().weights()[0];
        }
        let mean = sum / trials as f64;
        assert!((1.42..=1.58).contains(&mean), "mean oracle weight {mean}");
    }

    fn random_instance() -> impl Strategy<Value = (SignalSpec, SvdFactors)> {
        (any::<u64>(), 4usize..9, 0usize..4, 1usize..3).prop_map(|(seed, n, extra, r)| {
            let m = n + extra;
            let thetas: Vec<f64> = (0..r).map(|j| 3.0 / (j as f64 + 1.0)).collect();
            let signal = SignalSpec::random(n, m, thetas, seed).unwrap();
            let noise = sample_gaussian_matrix(n, m, 0.3, seed ^ 0xABCD).unwrap();
            let f = svd(&signal.to_matrix().add(&noise).unwrap()).unwrap();
            (signal, f)
        })
    }

    proptest! {
        #[test]
        fn direct_and_expanded_agree((signal, f) in random_instance(), raw in prop::collection::vec(0.0f64..4.0, 1..5)) {
            let diag = oracle_diagonal(&signal, &f).unwrap();
            let len = raw.len().min(f.rank_bound());
            let w = ShrinkageWeights::new(raw[..len].to_vec(), Method::Svt, len).unwrap();
            let direct = exact_squared_error(&signal, &f, &w).unwrap();
            let expanded = squared_error_expansion(&signal, &diag, &w).unwrap();
            prop_assert!((direct - expanded).abs() <= 1e-10 * direct.abs().max(1.0));
        }

        #[test]
        fn oracle_beats_perturbations((signal, f) in random_instance(), delta in prop::collection::vec(-1.0f64..1.0, 2)) {
            let diag = oracle_diagonal(&signal, &f).unwrap();
            let r = signal.rank();
            let best = oracle_weights(&diag, r).unwrap();
            let perturbed: Vec<f64> = best.weights().iter().zip(&delta).map(|(w, d)| (w + d).max(0.0)).collect();
            let other = ShrinkageWeights::new(perturbed, Method::Svt, r).unwrap();
            let se_best = exact_squared_error(&signal, &f, &best).unwrap();
            prop_assert!(se_best <= exact_squared_error(&signal, &f, &other).unwrap() + 1e-12);
            let eym = eym_weights(&f, r).unwrap();
            prop_assert!(se_best <= exact_squared_error(&signal, &f, &eym).unwrap() + 1e-12);
        }
    }
}
