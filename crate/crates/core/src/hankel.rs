//! Hankel lifting of factor vectors and the low-rank tools built on it.

use num_complex::Complex64;

use crate::error::{RadarError, Result};
use crate::linalg::svd;
use crate::tensor::{CMatrix, CVector};

/// Row count of the near-square Hankel lift of a length-`n` vector.
pub fn hankel_rows(n: usize) -> usize {
    (n + 2) / 2
}

/// `H[i, j] = v[i + j]`, of shape `⌈(n+1)/2⌉ x (n + 1 − ⌈(n+1)/2⌉)`.
pub fn hankelize(v: &CVector) -> Result<CMatrix> {
    let n = v.len();
    if n < 2 {
        return Err(RadarError::Argument(format!(
            "Hankel lift needs at least 2 entries, got {n}"
        )));
    }
    let rows = hankel_rows(n);
    let cols = n + 1 - rows;
    Ok(CMatrix::from_fn(rows, cols, |i, j| v[i + j]))
}

/// Adjoint of [`hankelize`]: sums each anti-diagonal back into one entry.
pub fn hankel_adjoint(h: &CMatrix) -> CVector {
    let n = h.nrows() + h.ncols() - 1;
    let mut out = CVector::zeros(n);
    for j in 0..h.ncols() {
        for i in 0..h.nrows() {
            out[i + j] += h[(i, j)];
        }
    }
    out
}

/// How many Hankel entries each vector entry feeds (`diag(HᴴH)`).
pub fn anti_diagonal_counts(n: usize) -> Vec<f64> {
    let rows = hankel_rows(n);
    let cols = n + 1 - rows;
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(cols - 1);
            let hi = k.min(rows - 1);
            (hi + 1 - lo) as f64
        })
        .collect()
}

/// Non-increasing singular values; a single NaN if the decomposition fails.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    svd(m).map(|d| d.singular_values).unwrap_or_else(|_| vec![f64::NAN])
}

/// Nuclear norm of the Hankel lift; vectors shorter than 2 contribute `|v|`.
pub fn hankel_nuclear_norm(v: &CVector) -> f64 {
    match hankelize(v) {
        Ok(h) => singular_values(&h).iter().sum(),
        Err(_) => v.norm(),
    }
}

/// Singular-value soft thresholding: the proximal map of `threshold · ‖·‖_*`.
pub fn singular_value_threshold(m: &CMatrix, threshold: f64) -> CMatrix {
    let Ok(d) = svd(m) else {
        return CMatrix::from_element(m.nrows(), m.ncols(), Complex64::new(f64::NAN, f64::NAN));
    };
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for (k, &s) in d.singular_values.iter().enumerate() {
        let shrunk = s - threshold;
        if shrunk <= 0.0 {
            break;
        }
        out += (d.u.column(k) * d.v.column(k).adjoint()).scale(shrunk);
    }
    out
}

/// Number of singular values above `rel_tol · σ₁`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > rel_tol * top).count(),
        _ => 0,
    }
}

/// Dominant pole `z` of a vector modelled as `c·[1, z, z², …]`.
///
/// Matrix pencil on the Hankel lift: the dominant left singular vector `u`
/// spans the signal subspace, and shift invariance `u[1..] ≈ z·u[..r-1]` is
/// solved in the least-squares sense. Falls back to the lag-one
/// autocorrelation when the lift is degenerate.
pub fn dominant_pole(v: &CVector) -> Option<Complex64> {
    let n = v.len();
    if n < 2 {
        return None;
    }
    let h = hankelize(v).ok()?;
    if let Ok(d) = svd(&h) {
        let top = d.largest();
        if top > 0.0 && top.is_finite() && d.u.nrows() >= 2 {
            let col = d.u.column(0);
            let r = col.len();
            let head = col.rows(0, r - 1);
            let tail = col.rows(1, r - 1);
            let den = head.norm_squared();
            if den > 1e-12 {
                let z = head.dotc(&tail) / den;
                if z.norm() > 1e-12 && z.re.is_finite() && z.im.is_finite() {
                    return Some(z);
                }
            }
        }
    }
    phase_difference_pole(v)
}

/// Weighted average of successive phase differences, `Σ conj(v[i]) v[i+1]`.
pub fn phase_difference_pole(v: &CVector) -> Option<Complex64> {
    let acc: Complex64 = v
        .iter()
        .zip(v.iter().skip(1))
        .map(|(a, b)| a.conj() * b)
        .sum();
    (acc.norm() > 0.0 && acc.re.is_finite()).then_some(acc)
}
