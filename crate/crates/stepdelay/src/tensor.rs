//! Flat f64 parameter/gradient carriers.
//!
//! Everything is 64-bit: the trajectory-equivalence tests compare runs
//! bitwise, and f64 leaves headroom under the tolerances used elsewhere.

use crate::error::{Result, RuntimeError};

/// Contiguous vector of f64 with an explicit length.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVec {
    data: Vec<f64>,
}

impl DenseVec {
    pub fn zeros(len: usize) -> Self {
        DenseVec {
            data: vec![0.0; len],
        }
    }

    /// Builds from raw storage, rejecting NaN/Inf entries.
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(RuntimeError::NonFinite(format!(
                "vector entry {i} is {}",
                data[i]
            )));
        }
        Ok(DenseVec { data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// self += scale * other
    pub fn add_scaled(&mut self, scale: f64, other: &DenseVec) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.data.iter_mut() {
            *a *= factor;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|a| *a = value);
    }

    pub fn dot(&self, other: &DenseVec) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Largest relative elementwise deviation from `other`, with an absolute
    /// floor for near-zero entries.
    pub fn max_rel_error(&self, other: &DenseVec) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    /// Exact bit-level equality, stricter than `==` (distinguishes -0.0).
    pub fn bits_eq(&self, other: &DenseVec) -> bool {
        self.len() == other.len()
            && self
                .data
                .iter()
                .zip(other.data.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl std::ops::Index<usize> for DenseVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for DenseVec {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Row-major matrix of f64 with explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMat {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_vec(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(RuntimeError::DimensionMismatch(format!(
                "matrix storage {} != {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(RuntimeError::NonFinite(format!(
                "matrix entry {i} is {}",
                data[i]
            )));
        }
        Ok(DenseMat { data, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// One sampled batch of training data: `features` is B x d, `labels` has
/// length B.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub features: DenseMat,
    pub labels: DenseVec,
    pub batch_size: usize,
}

impl Minibatch {
    pub fn new(features: DenseMat, labels: DenseVec) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(RuntimeError::DimensionMismatch(format!(
                "batch features rows {} != labels {}",
                features.rows(),
                labels.len()
            )));
        }
        let batch_size = features.rows();
        Ok(Minibatch {
            features,
            labels,
            batch_size,
        })
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(DenseVec::from_vec(vec![1.0, f64::NAN]).is_err());
        assert!(DenseVec::from_vec(vec![1.0, f64::INFINITY]).is_err());
        assert!(DenseVec::from_vec(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn add_scaled_and_dot() {
        let mut a = DenseVec::from_vec(vec![1.0, 2.0]).unwrap();
        let b = DenseVec::from_vec(vec![10.0, 20.0]).unwrap();
        a.add_scaled(0.5, &b);
        assert_eq!(a.as_slice(), &[6.0, 12.0]);
        assert_eq!(a.dot(&b), 6.0 * 10.0 + 12.0 * 20.0);
    }

    #[test]
    fn minibatch_shape_check() {
        let m = DenseMat::zeros(4, 3);
        let good = DenseVec::zeros(4);
        let bad = DenseVec::zeros(5);
        assert!(Minibatch::new(m.clone(), good).is_ok());
        assert!(Minibatch::new(m, bad).is_err());
    }

    #[test]
    fn matrix_shape_mismatch() {
        assert!(DenseMat::from_vec(vec![0.0; 5], 2, 3).is_err());
    }
}
