//! Dense matrices, the SVD contract and Frobenius arithmetic.
//!
//! Everything here is real-valued. Matrices are stored row-major; singular
//! vectors are stored column-contiguous so that `û_i` and `v̂_i` are plain
//! slices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values closer than this (absolute) keep their original order.
pub const SINGULAR_VALUE_TIE: f64 = 1e-12;

/// Real `rows × cols` matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a validated matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                actual: format!("{} entries", data.len()),
            });
        }
        if let Some(idx) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / cols,
                col: idx % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out.data[i * n + i] = 1.0;
        }
        out
    }

    pub fn from_diagonal(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut out = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            out.data[i * cols + i] = d;
        }
        out
    }

    /// Builds a matrix from column-contiguous storage.
    pub fn from_columns(rows: usize, cols: usize, columns: &[f64]) -> Self {
        debug_assert_eq!(columns.len(), rows * cols);
        let mut out = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                out.data[i * cols + j] = columns[j * rows + i];
            }
        }
        out
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            data: self.data.iter().map(|a| a * factor).collect(),
            ..*self
        }
    }

    /// Element-wise product with a 0/1 mask.
    pub fn hadamard_mask(&self, mask: &MaskMatrix) -> Result<Self> {
        if self.rows != mask.rows() || self.cols != mask.cols() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{} mask", mask.rows(), mask.cols()),
            });
        }
        let data = self
            .data
            .iter()
            .zip(mask.bits())
            .map(|(&a, &bit)| if bit { a } else { 0.0 })
            .collect();
        Ok(Self { data, ..*self })
    }

    /// Σᵢⱼ AᵢⱼBᵢⱼ.
    pub fn frobenius_inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Adds `weight · u vᵀ` in place.
    pub fn add_rank_one(&mut self, weight: f64, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        if weight == 0.0 {
            return;
        }
        for (i, &ui) in u.iter().enumerate() {
            let coeff = weight * ui;
            if coeff == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (dst, &vj) in row.iter_mut().zip(v) {
                *dst += coeff * vj;
            }
        }
    }
}

/// Σᵢⱼ Aᵢⱼ².
pub fn frobenius_norm_sq(a: &DenseMatrix) -> f64 {
    a.data.iter().map(|x| x * x).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Observation mask; `true` marks an observed entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl MaskMatrix {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} mask bits", rows * cols),
                actual: format!("{} mask bits", bits.len()),
            });
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn observed_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of observed entries, the plug-in estimate of `p`.
    pub fn observed_fraction(&self) -> f64 {
        self.observed_count() as f64 / self.bits.len() as f64
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }
}

/// Thin SVD of an `n × m` matrix with `q = min(n, m)` components.
///
/// `left` holds `q` columns of length `n`, `right` holds `q` columns of
/// length `m`, both column-contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    rows: usize,
    cols: usize,
    singular_values: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    transposed: bool,
}

impl SvdFactors {
    /// Assembles factors from parts. Values must be sorted descending.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        singular_values: Vec<f64>,
        left: Vec<f64>,
        right: Vec<f64>,
    ) -> Result<Self> {
        let q = singular_values.len();
        if q != rows.min(cols) || left.len() != rows * q || right.len() != cols * q {
            return Err(Error::DimensionMismatch {
                expected: format!("q={} factors of a {rows}x{cols} matrix", rows.min(cols)),
                actual: format!(
                    "{q} values, {} left entries, {} right entries",
                    left.len(),
                    right.len()
                ),
            });
        }
        if singular_values.windows(2).any(|w| w[0] < w[1]) || singular_values.iter().any(|&s| s < 0.0 || !s.is_finite()) {
            return Err(Error::InvalidArgument(
                "singular values must be finite, nonnegative and sorted descending".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            singular_values,
            left,
            right,
            transposed: false,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of components, `min(rows, cols)`.
    pub fn rank_bound(&self) -> usize {
        self.singular_values.len()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn left(&self, i: usize) -> &[f64] {
        &self.left[i * self.rows..(i + 1) * self.rows]
    }

    pub fn right(&self, i: usize) -> &[f64] {
        &self.right[i * self.cols..(i + 1) * self.cols]
    }

    pub fn left_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_columns(self.rows, self.rank_bound(), &self.left)
    }

    pub fn right_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_columns(self.cols, self.rank_bound(), &self.right)
    }

    /// Whether the input had more rows than columns and was decomposed as
    /// its transpose. The factors always describe the original orientation.
    pub fn transposed(&self) -> bool {
        self.transposed
    }

    /// Σᵢ σ̂ᵢ ûᵢ v̂ᵢᵀ.
    pub fn reconstruct_full(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (i, &s) in self.singular_values.iter().enumerate() {
            out.add_rank_one(s, self.left(i), self.right(i));
        }
        out
    }

    /// Largest deviation of the left and right Gram matrices from identity.
    pub fn orthonormality_error(&self) -> f64 {
        let q = self.rank_bound();
        let mut worst: f64 = 0.0;
        for i in 0..q {
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst
                    .max((dot(self.left(i), self.left(j)) - target).abs())
                    .max((dot(self.right(i), self.right(j)) - target).abs());
            }
        }
        worst
    }
}

/// Full thin SVD with singular values sorted descending.
///
/// Inputs with more rows than columns are decomposed as their transpose and
/// the factors swapped back, so `n ≤ m` holds for the working problem.
pub fn svd(a: &DenseMatrix) -> Result<SvdFactors> {
    if !a.is_finite() {
        let idx = a.data.iter().position(|x| !x.is_finite()).unwrap_or(0);
        return Err(Error::NonFinite {
            row: idx / a.cols,
            col: idx % a.cols,
        });
    }
    let transposed = a.rows > a.cols;
    let (n, m) = if transposed { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let work = faer::Mat::<f64>::from_fn(n, m, |i, j| if transposed { a.get(j, i) } else { a.get(i, j) });
    let decomposition = work.thin_svd().map_err(|_| Error::SvdFailed)?;
    let u = decomposition.U();
    let v = decomposition.V();
    let s = decomposition.S().column_vector();
    let q = n;

    let mut order: Vec<usize> = (0..q).collect();
    // Stable sort keeps original index order for near-ties.
    order.sort_by(|&i, &j| {
        let (si, sj) = (s[i], s[j]);
        if (si - sj).abs() <= SINGULAR_VALUE_TIE {
            std::cmp::Ordering::Equal
        } else {
            sj.partial_cmp(&si).unwrap_or(std::cmp::Ordering::Equal)
        }
    });

    let mut values = Vec::with_capacity(q);
    let mut work_left = Vec::with_capacity(n * q);
    let mut work_right = Vec::with_capacity(m * q);
    for &k in &order {
        values.push(s[k].max(0.0));
        work_left.extend((0..n).map(|i| u[(i, k)]));
        work_right.extend((0..m).map(|j| v[(j, k)]));
    }
    // Restore strict descending order after tie-preserving sort.
    for i in 1..q {
        if values[i] > values[i - 1] {
            values[i] = values[i - 1];
        }
    }

    let (left, right) = if transposed {
        (work_right, work_left)
    } else {
        (work_left, work_right)
    };
    Ok(SvdFactors {
        rows: a.rows,
        cols: a.cols,
        singular_values: values,
        left,
        right,
        transposed,
    })
}
