//! Data-driven optimal shrinkage of singular values for low-rank signal
//! recovery.
//!
//! Given a noisy `n × m` matrix `X = S + noise`, [`optshrink`] keeps the top
//! `r̂` singular vectors of `X` and replaces each singular value by a weight
//! estimated from the remaining noise spectrum through its D-transform. No
//! noise variance, distribution or signal strength has to be supplied.
//!
//! Modules:
//! - [`linalg`]: dense matrices, masks and a sorted thin SVD.
//! - [`dtransform`]: empirical and Marčenko–Pastur D-transforms.
//! - [`shrinkage`]: OptShrink, truncated SVD and soft-thresholding weights.
//! - [`oracle`]: signal-aware optimal weights and exact squared errors.
//! - [`asymptotics`]: large-matrix limits for Gaussian noise and missing data.
//! - [`harness`]: seeded Monte-Carlo experiments writing CSV summaries.

pub mod asymptotics;
pub mod dtransform;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod random;
pub mod shrinkage;

pub use asymptotics::{predict_spike, AsymptoticPrediction};
pub use dtransform::{empirical_d, empirical_d_derivative, mp_d_transform, MpParams, NoiseSpectrum};
pub use error::{Error, Result};
pub use linalg::{svd, DenseMatrix, MaskMatrix, SvdFactors};
pub use oracle::{oracle_diagonal, oracle_weights, OracleDiagonal};
pub use random::SignalSpec;
pub use shrinkage::{eym_weights, optshrink, reconstruct, svt_weights, DenoiseReport, Method, ShrinkageWeights};
