//! Seeded sampling of noise matrices, orthonormal frames, masks and signals.
//!
//! Every sampler is a pure function of its arguments: a fresh ChaCha8
//! generator is seeded from the 64-bit seed on each call.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix, MaskMatrix};

/// Name of the project-wide generator, echoed in every output file.
pub const RNG_NAME: &str = "ChaCha8Rng::seed_from_u64";

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child seed for an independent stream.
///
/// `derive_seed(seed, a, b) = mix64(mix64(seed ^ mix64(a)) ^ b)`; distinct
/// `(a, b)` pairs give unrelated seeds.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(seed ^ mix64(a)) ^ b)
}

/// `n × m` matrix with i.i.d. `N(0, variance)` entries.
pub fn sample_gaussian_matrix(n: usize, m: usize, variance: f64, seed: u64) -> Result<DenseMatrix> {
    if !variance.is_finite() || variance <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "variance must be positive, got {variance}"
        )));
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    let sd = variance.sqrt();
    let mut g = rng(seed);
    let data = (0..n * m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut g);
            sd * z
        })
        .collect();
    DenseMatrix::new(n, m, data)
}

/// `r` orthonormal vectors of length `n`, distributed uniformly (Haar).
///
/// Gaussian columns orthonormalised by modified Gram–Schmidt with one
/// re-orthogonalisation pass. Returned column-contiguous.
pub fn sample_orthonormal_frame(n: usize, r: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if r > n {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {r} orthonormal vectors in dimension {n}"
        )));
    }
    let mut g = rng(seed);
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(r);
    while frame.len() < r {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut g)).collect();
        for _ in 0..2 {
            for prev in &frame {
                let proj = dot(&v, prev);
                v.iter_mut().zip(prev).for_each(|(x, p)| *x -= proj * p);
            }
        }
        let norm = dot(&v, &v).sqrt();
        // A draw in the span of earlier columns has probability zero; skip it.
        if norm < 1e-10 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        frame.push(v);
    }
    Ok(frame)
}

/// I.i.d. Bernoulli(p) observation mask.
pub fn sample_mask(n: usize, m: usize, p: f64, seed: u64) -> Result<MaskMatrix> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "observation probability must be in (0, 1], got {p}"
        )));
    }
    if p == 1.0 {
        return Ok(MaskMatrix::full(n, m));
    }
    let dist = Bernoulli::new(p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut g = rng(seed);
    let bits = (0..n * m).map(|_| dist.sample(&mut g)).collect();
    MaskMatrix::new(n, m, bits)
}

/// Low-rank signal `S = Σᵢ θᵢ uᵢ vᵢᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    thetas: Vec<f64>,
    rows: usize,
    cols: usize,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
}

impl SignalSpec {
    pub fn new(thetas: Vec<f64>, left: Vec<Vec<f64>>, right: Vec<Vec<f64>>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidArgument("signal needs at least one spike".into()));
        }
        if thetas.iter().any(|&t| !t.is_finite() || t <= 0.0) {
            return Err(Error::InvalidArgument("spikes must be positive and finite".into()));
        }
        if thetas.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidArgument(
                "spikes must be strictly descending".into(),
            ));
        }
        let r = thetas.len();
        if left.len() != r || right.len() != r {
            return Err(Error::DimensionMismatch {
                expected: format!("{r} left and right vectors"),
                actual: format!("{} left, {} right", left.len(), right.len()),
            });
        }
        let rows = left[0].len();
        let cols = right[0].len();
        if left.iter().any(|u| u.len() != rows) || right.iter().any(|v| v.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: "equal-length frame vectors".into(),
                actual: "ragged frame".into(),
            });
        }
        for frame in [&left, &right] {
            for i in 0..r {
                for j in 0..=i {
                    let target = if i == j { 1.0 } else { 0.0 };
                    if (dot(&frame[i], &frame[j]) - target).abs() > 1e-8 {
                        return Err(Error::InvalidArgument(
                            "signal frames must be orthonormal".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self {
            thetas,
            rows,
            cols,
            left,
            right,
        })
    }

    /// Signal with Haar-random frames. Left and right frames use independent
    /// streams derived from `seed`.
    pub fn random(n: usize, m: usize, thetas: Vec<f64>, seed: u64) -> Result<Self> {
        let r = thetas.len();
        let left = sample_orthonormal_frame(n, r, derive_seed(seed, 0x5167_6e61, 1))?;
        let right = sample_orthonormal_frame(m, r, derive_seed(seed, 0x5167_6e61, 2))?;
        Self::new(thetas, left, right)
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn rank(&self) -> usize {
        self.thetas.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn left(&self, j: usize) -> &[f64] {
        &self.left[j]
    }

    pub fn right(&self, j: usize) -> &[f64] {
        &self.right[j]
    }

    /// Same frames with every spike multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            thetas: self.thetas.iter().map(|t| t * factor).collect(),
            ..self.clone()
        }
    }

    /// ‖S‖²_F = Σθᵢ².
    pub fn energy(&self) -> f64 {
        self.thetas.iter().map(|t| t * t).sum()
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (j, &theta) in self.thetas.iter().enumerate() {
            out.add_rank_one(theta, &self.left[j], &self.right[j]);
        }
        out
    }
}
