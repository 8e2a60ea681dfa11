//! Dense vector helpers and the noise-intensity matrix Γ.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsavError};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Max-norm distance between two equally sized slices.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Row-major m×m matrix Γ scaling the Brownian forcing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMatrix {
    dim: usize,
    entries: Vec<f64>,
    /// Set when Γ = c·I, which lets `apply` skip the mat-vec.
    #[serde(skip)]
    scalar: Option<f64>,
}

impl NoiseMatrix {
    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = c;
        }
        Self {
            dim,
            entries,
            scalar: Some(c),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(SsavError::InvalidModel(format!(
                "noise matrix must be square and non-empty, got {} rows",
                dim
            )));
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(SsavError::InvalidModel("noise matrix has non-finite entries".into()));
        }
        let mut m = Self {
            dim,
            entries,
            scalar: None,
        };
        m.scalar = m.detect_scalar();
        Ok(m)
    }

    fn detect_scalar(&self) -> Option<f64> {
        let c = self.entries[0];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let want = if i == j { c } else { 0.0 };
                if self.entries[i * self.dim + j] != want {
                    return None;
                }
            }
        }
        Some(c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// Trace (Frobenius) norm ‖Γ‖.
    pub fn frobenius_norm(&self) -> f64 {
        norm_sq(&self.entries).sqrt()
    }

    /// `out += scale · Γ x`.
    #[inline]
    pub fn apply_add(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        match self.scalar {
            Some(c) => {
                let s = scale * c;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += s * xi;
                }
            }
            None => {
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &self.entries[i * self.dim..(i + 1) * self.dim];
                    *o += scale * dot(row, x);
                }
            }
        }
    }

    /// Γ Γᵀ, row-major.
    pub fn gram(&self) -> Vec<f64> {
        let m = self.dim;
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                g[i * m + j] = (0..m).map(|k| self.entry(i, k) * self.entry(j, k)).sum();
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_shortcut_matches_dense_product() {
        let a = NoiseMatrix::scaled_identity(3, 1.5);
        let b = NoiseMatrix::from_rows(&[
            vec![1.5, 0.0, 0.0],
            vec![0.0, 1.5, 0.0],
            vec![0.0, 0.0, 1.5],
        ])
        .unwrap();
        assert_eq!(b.scalar, Some(1.5));
        let x = [1.0, -2.0, 0.5];
        let mut ya = [0.0; 3];
        let mut yb = [0.0; 3];
        a.apply_add(&x, 2.0, &mut ya);
        b.apply_add(&x, 2.0, &mut yb);
        assert_eq!(ya, yb);
        assert!((a.frobenius_norm() - (3.0f64 * 2.25).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dense_matrix_applies_rows() {
        let g = NoiseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
        assert!(g.scalar.is_none());
        let mut y = [1.0, 1.0];
        g.apply_add(&[1.0, 1.0], 1.0, &mut y);
        assert_eq!(y, [4.0, 4.0]);
        assert_eq!(g.gram(), vec![5.0, 6.0, 6.0, 9.0]);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(NoiseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0]]).is_err());
    }
}
