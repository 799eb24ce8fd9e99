//! D-transforms of singular value distributions.
//!
//! For a measure μ on singular values of an `n × m` matrix (`c = n/m ≤ 1`),
//!
//! ```text
//! D(z) = φ₁(z) · φ₂(z)
//! φ₁(z) = ∫ z/(z² − t²) dμ(t)
//! φ₂(z) = c·φ₁(z) + (1 − c)/z
//! ```
//!
//! The empirical version evaluates the sums over a finite noise spectrum
//! directly; the Marčenko–Pastur version is closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pole guard: evaluation points must exceed `s_max · (1 + GUARD_GAP)`.
pub const GUARD_GAP: f64 = 1e-4;

/// The "noise" singular values left after removing the top `r̂` components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NoiseSpectrum {
    values: Vec<f64>,
    eff_rows: usize,
    eff_cols: usize,
}

impl NoiseSpectrum {
    pub fn new(values: Vec<f64>, eff_rows: usize, eff_cols: usize) -> Result<Self> {
        if eff_rows == 0 || eff_rows > eff_cols {
            return Err(Error::InvalidArgument(format!(
                "effective dimensions must satisfy 0 < rows <= cols, got {eff_rows}x{eff_cols}"
            )));
        }
        if values.len() != eff_rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{eff_rows} noise singular values"),
                actual: format!("{}", values.len()),
            });
        }
        if values.iter().any(|&s| !s.is_finite() || s < 0.0) {
            return Err(Error::InvalidArgument(
                "noise singular values must be finite and nonnegative".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "noise singular values must be sorted descending".into(),
            ));
        }
        Ok(Self {
            values,
            eff_rows,
            eff_cols,
        })
    }

    /// Spectrum of singular values `σ̂_{r̂+1..q}` of an `n × m` matrix.
    pub fn from_tail(singular_values: &[f64], n: usize, m: usize, r_hat: usize) -> Result<Self> {
        let (rows, cols) = (n.min(m), n.max(m));
        if r_hat >= rows {
            return Err(Error::RankOutOfRange {
                rank: r_hat,
                min: 0,
                max: rows - 1,
            });
        }
        Self::new(singular_values[r_hat..].to_vec(), rows - r_hat, cols - r_hat)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eff_rows(&self) -> usize {
        self.eff_rows
    }

    pub fn eff_cols(&self) -> usize {
        self.eff_cols
    }

    /// Largest noise singular value, the finite-sample proxy for the edge `b`.
    pub fn s_max(&self) -> f64 {
        self.values[0]
    }

    fn check_pole(&self, z: f64) -> Result<()> {
        let s_max = self.s_max();
        if !z.is_finite() || z <= 0.0 || z <= s_max * (1.0 + GUARD_GAP) {
            return Err(Error::PoleProximity {
                z,
                singular_value: s_max,
            });
        }
        Ok(())
    }
}

/// `(D̂(z), D̂′(z))` in one pass over the spectrum.
pub fn empirical_d_pair(z: f64, spec: &NoiseSpectrum) -> Result<(f64, f64)> {
    spec.check_pole(z)?;
    let z2 = z * z;
    let (mut sum, mut dsum) = (0.0, 0.0);
    for &s in &spec.values {
        let s2 = s * s;
        let gap = z2 - s2;
        sum += z / gap;
        dsum -= (z2 + s2) / (gap * gap);
    }
    let rows = spec.eff_rows as f64;
    let cols = spec.eff_cols as f64;
    let pad = (spec.eff_cols - spec.eff_rows) as f64;

    let phi1 = sum / rows;
    let phi1_prime = dsum / rows;
    let phi2 = (sum + pad / z) / cols;
    let phi2_prime = (dsum - pad / z2) / cols;
    Ok((phi1 * phi2, phi1_prime * phi2 + phi1 * phi2_prime))
}

/// Empirical D-transform `D̂(z)`.
pub fn empirical_d(z: f64, spec: &NoiseSpectrum) -> Result<f64> {
    empirical_d_pair(z, spec).map(|(d, _)| d)
}

/// Derivative `D̂′(z)`.
pub fn empirical_d_derivative(z: f64, spec: &NoiseSpectrum) -> Result<f64> {
    empirical_d_pair(z, spec).map(|(_, dp)| dp)
}

/// Marčenko–Pastur parameters: aspect ratio `c = n/m` and observation
/// probability `p`. Noise entries have variance `p/m` after masking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpParams {
    c: f64,
    p: f64,
}

impl MpParams {
    pub fn new(c: f64, p: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "aspect ratio c must be in (0, 1], got {c}"
            )));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "observation probability p must be in (0, 1], got {p}"
            )));
        }
        Ok(Self { c, p })
    }

    /// Fully observed noise with aspect ratio `c`.
    pub fn full(c: f64) -> Result<Self> {
        Self::new(c, 1.0)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Lower support edge `a = √p (1 − √c)`.
    pub fn lower_edge(&self) -> f64 {
        self.p.sqrt() * (1.0 - self.c.sqrt())
    }

    /// Upper support edge `b = √p (1 + √c)`.
    pub fn edge(&self) -> f64 {
        self.p.sqrt() * (1.0 + self.c.sqrt())
    }

    /// Singular value density on `(a, b)`.
    pub fn density(&self, x: f64) -> f64 {
        let (c, p) = (self.c, self.p);
        if x <= self.lower_edge() || x >= self.edge() || x <= 0.0 {
            return 0.0;
        }
        let t = x * x - p - p * c;
        let disc = 4.0 * p * p * c - t * t;
        if disc <= 0.0 {
            return 0.0;
        }
        disc.sqrt() / (std::f64::consts::PI * p * c * x)
    }

    fn check_outside(&self, z: f64) -> Result<()> {
        if z.is_nan() || z <= self.edge() {
            return Err(Error::InvalidArgument(format!(
                "z = {z} must exceed the support edge b = {}",
                self.edge()
            )));
        }
        Ok(())
    }
}

/// Closed-form Marčenko–Pastur D-transform,
/// `[z² − p(1+c) − √((z² − p(1+c))² − 4p²c)] / (2p²c)`.
pub fn mp_d_transform(z: f64, mp: &MpParams) -> Result<f64> {
    mp.check_outside(z)?;
    let (c, p) = (mp.c, mp.p);
    let a = z * z - p * (1.0 + c);
    let root = (a * a - 4.0 * p * p * c).max(0.0).sqrt();
    // Rationalised form avoids cancellation for large z.
    Ok(2.0 / (a + root))
}

/// `d/dz` of [`mp_d_transform`]; equals `−2z·D(z)/√((z² − p(1+c))² − 4p²c)`.
pub fn mp_d_transform_derivative(z: f64, mp: &MpParams) -> Result<f64> {
    let d = mp_d_transform(z, mp)?;
    let (c, p) = (mp.c, mp.p);
    let a = z * z - p * (1.0 + c);
    let root = (a * a - 4.0 * p * p * c).max(0.0).sqrt();
    if root == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(-2.0 * z * d / root)
}
