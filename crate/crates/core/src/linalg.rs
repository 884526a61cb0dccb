//! Thin singular value decomposition and the solves built on it.
//!
//! nalgebra's complex SVD loses accuracy on rank-deficient inputs (exactly
//! the low-rank Hankel lifts this crate works with), so decompositions are
//! delegated to faer and handed back as nalgebra matrices.

use faer::MatRef;
use num_complex::Complex64;

use crate::error::{RadarError, Result};
use crate::tensor::{CMatrix, CVector};

/// `M = U·diag(s)·Vᴴ` with `s` non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

pub fn svd(m: &CMatrix) -> Result<Svd> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Svd {
            u: CMatrix::zeros(rows, 0),
            singular_values: vec![],
            v: CMatrix::zeros(cols, 0),
        });
    }
    let view = MatRef::from_column_major_slice(m.as_slice(), rows, cols);
    let dec = view
        .thin_svd()
        .map_err(|e| RadarError::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (dec.U(), dec.S(), dec.V());
    let k = rows.min(cols);
    let mut order: Vec<usize> = (0..k).collect();
    let sv: Vec<f64> = (0..k).map(|i| s[i].re).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    Ok(Svd {
        u: CMatrix::from_fn(rows, k, |i, j| u[(i, order[j])]),
        singular_values: order.iter().map(|&i| sv[i]).collect(),
        v: CMatrix::from_fn(cols, k, |i, j| v[(i, order[j])]),
    })
}

impl Svd {
    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Minimum-norm least-squares solution, discarding singular values at or
    /// below `rel_tol · σ₁`.
    pub fn solve(&self, b: &CVector, rel_tol: f64) -> CVector {
        let cutoff = rel_tol * self.largest();
        let mut x = CVector::zeros(self.v.nrows());
        for (k, &s) in self.singular_values.iter().enumerate() {
            if s > cutoff && s > 0.0 {
                let coeff: Complex64 = self.u.column(k).dotc(b) / s;
                x += self.v.column(k) * coeff;
            }
        }
        x
    }

    pub fn recompose(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.u.nrows(), self.v.nrows());
        for (k, &s) in self.singular_values.iter().enumerate() {
            out += (self.u.column(k) * self.v.column(k).adjoint()).scale(s);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_hankel_is_reconstructed() {
        // a case that trips the nalgebra complex SVD
        let v: Vec<Complex64> = (0..20).map(|i| Complex64::from_polar(1.7, 0.9 * i as f64)).collect();
        let h = CMatrix::from_fn(11, 10, |i, j| v[i + j]);
        let d = svd(&h).unwrap();
        assert!((d.recompose() - &h).norm() < 1e-12 * h.norm());
        assert!(d.singular_values[1] < 1e-12 * d.singular_values[0]);
    }

    #[test]
    fn values_are_sorted_and_vectors_orthonormal() {
        let m = CMatrix::from_fn(5, 3, |i, j| Complex64::new((i * 3 + j) as f64, (i as f64 - j as f64).sin()));
        let d = svd(&m).unwrap();
        assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let gram = d.u.adjoint() * &d.u;
        assert!((gram - CMatrix::identity(3, 3)).norm() < 1e-12);
        assert!((d.recompose() - &m).norm() < 1e-12 * m.norm());
    }

    #[test]
    fn solve_is_minimum_norm() {
        // x1 + x2 = 2 has minimum-norm solution (1, 1)
        let m = CMatrix::from_element(1, 2, Complex64::new(1.0, 0.0));
        let x = svd(&m).unwrap().solve(&CVector::from_element(1, Complex64::new(2.0, 0.0)), 1e-12);
        assert!((x[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((x[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }
}
