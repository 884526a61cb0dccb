//! Dense third-order tensors, dictionary matrices and the multilinear /
//! Khatri-Rao algebra used by synthesis and recovery.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{RadarError, Result};
use crate::model::{RadarConfig, Target};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Column-major dense tensor: the first index runs fastest, so the flat
/// storage is exactly `vec(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<Complex64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![Complex64::new(0.0, 0.0); dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(RadarError::Shape(format!(
                "{} values cannot fill a {dims:?} tensor",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    /// Outer product `a ∘ b ∘ c`.
    pub fn outer(a: &CVector, b: &CVector, c: &CVector) -> Self {
        Self::from_fn([a.len(), b.len(), c.len()], |i, j, k| a[i] * b[j] * c[k])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Σ conj(self) · other`.
    pub fn inner(&self, other: &Tensor3) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn axpy(&mut self, alpha: Complex64, other: &Tensor3) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Mode-`mode` product `X ×_mode M`: the `mode` dimension becomes `M.nrows()`.
    pub fn mode_product(&self, mat: &CMatrix, mode: usize) -> Result<Tensor3> {
        if mat.ncols() != self.dims[mode] {
            return Err(RadarError::Shape(format!(
                "mode-{} product: matrix has {} columns, tensor mode has size {}",
                mode + 1,
                mat.ncols(),
                self.dims[mode]
            )));
        }
        let mut dims = self.dims;
        dims[mode] = mat.nrows();
        let mut out = Tensor3::zeros(dims);
        let [d0, d1, d2] = self.dims;
        match mode {
            0 => {
                for k in 0..d2 {
                    for j in 0..d1 {
                        for a in 0..d0 {
                            let x = self[[a, j, k]];
                            if x == Complex64::new(0.0, 0.0) {
                                continue;
                            }
                            for i in 0..dims[0] {
                                let o = out.offset(i, j, k);
                                out.data[o] += mat[(i, a)] * x;
                            }
                        }
                    }
                }
            }
            1 => {
                for k in 0..d2 {
                    for b in 0..d1 {
                        for j in 0..dims[1] {
                            let m = mat[(j, b)];
                            for i in 0..d0 {
                                let o = out.offset(i, j, k);
                                out.data[o] += m * self[[i, b, k]];
                            }
                        }
                    }
                }
            }
            2 => {
                for c in 0..d2 {
                    for k in 0..dims[2] {
                        let m = mat[(k, c)];
                        for j in 0..d1 {
                            for i in 0..d0 {
                                let o = out.offset(i, j, k);
                                out.data[o] += m * self[[i, j, c]];
                            }
                        }
                    }
                }
            }
            _ => return Err(RadarError::Shape(format!("no mode {mode} in a 3-tensor"))),
        }
        Ok(out)
    }
}

impl Index<[usize; 3]> for Tensor3 {
    type Output = Complex64;
    #[inline]
    fn index(&self, idx: [usize; 3]) -> &Complex64 {
        &self.data[self.offset(idx[0], idx[1], idx[2])]
    }
}

impl IndexMut<[usize; 3]> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, idx: [usize; 3]) -> &mut Complex64 {
        let o = self.offset(idx[0], idx[1], idx[2]);
        &mut self.data[o]
    }
}

/// `⟦X; A, B, F⟧`: out[i,j,k] = Σ X[a,b,c] A[i,a] B[j,b] F[k,c].
pub fn multilinear_product(x: &Tensor3, a: &CMatrix, b: &CMatrix, f: &CMatrix) -> Result<Tensor3> {
    x.mode_product(a, 0)?.mode_product(b, 1)?.mode_product(f, 2)
}

/// Full square dictionaries whose row selections give the per-transmitter
/// delay, steering and Doppler matrices.
#[derive(Debug, Clone)]
pub struct Dictionaries {
    /// `TN x TN`, `A[g, n] = exp(-j 2π g n / TN)`.
    pub delay: CMatrix,
    /// `TR x TR`, `B[v, j] = exp(+j π v (-1 + 2 j / TR))`.
    pub steering: CMatrix,
    /// `P x P`, `F[p, c] = exp(-j 2π p c / P)`.
    pub doppler: CMatrix,
}

impl Dictionaries {
    pub fn adjoints(&self) -> (CMatrix, CMatrix, CMatrix) {
        (
            self.delay.adjoint(),
            self.steering.adjoint(),
            self.doppler.adjoint(),
        )
    }

    /// Atom `A[:, n] ∘ B[:, j] ∘ F[:, p]` evaluated at one observed triple.
    #[inline]
    pub fn atom(&self, row: [usize; 3], col: [usize; 3]) -> Complex64 {
        self.delay[(row[0], col[0])] * self.steering[(row[1], col[1])] * self.doppler[(row[2], col[2])]
    }
}

pub fn build_dictionaries(config: &RadarConfig) -> Result<Dictionaries> {
    config.validate()?;
    Ok(dictionaries_for_shape(config.grid_shape()))
}

pub fn dictionaries_for_shape([tn, tr, p]: [usize; 3]) -> Dictionaries {
    Dictionaries {
        delay: dft_matrix(tn),
        steering: steering_matrix(tr),
        doppler: dft_matrix(p),
    }
}

/// Dictionaries on a grid `factor` times finer in every mode: same rows,
/// `factor·TN`, `factor·TR` and `factor·P` columns. Column `factor·n` of the
/// refined delay dictionary is column `n` of the native one, and likewise for
/// the other modes.
pub fn oversampled_dictionaries([tn, tr, p]: [usize; 3], factor: usize) -> Dictionaries {
    let fine = |n: usize| n * factor.max(1);
    Dictionaries {
        delay: CMatrix::from_fn(tn, fine(tn), |r, c| {
            let e = (r * c) % fine(tn);
            Complex64::from_polar(1.0, -2.0 * PI * e as f64 / fine(tn) as f64)
        }),
        steering: CMatrix::from_fn(tr, fine(tr), |v, j| {
            steering_phase(v, -1.0 + 2.0 * j as f64 / fine(tr) as f64)
        }),
        doppler: CMatrix::from_fn(p, fine(p), |r, c| {
            let e = (r * c) % fine(p);
            Complex64::from_polar(1.0, -2.0 * PI * e as f64 / fine(p) as f64)
        }),
    }
}

/// `exp(-j 2π r c / n)` with the exponent reduced modulo `n` for accuracy.
pub fn dft_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |r, c| {
        let e = (r * c) % n;
        Complex64::from_polar(1.0, -2.0 * PI * e as f64 / n as f64)
    })
}

pub fn steering_matrix(tr: usize) -> CMatrix {
    CMatrix::from_fn(tr, tr, |v, j| steering_phase(v, -1.0 + 2.0 * j as f64 / tr as f64))
}

#[inline]
fn steering_phase(v: usize, doa: f64) -> Complex64 {
    Complex64::from_polar(1.0, PI * v as f64 * doa)
}

/// Column-wise Kronecker product: column `l` is `left[:, l] ⊗ right[:, l]`.
pub fn khatri_rao(left: &CMatrix, right: &CMatrix) -> Result<CMatrix> {
    if left.ncols() != right.ncols() {
        return Err(RadarError::Shape(format!(
            "Khatri-Rao operands have {} and {} columns",
            left.ncols(),
            right.ncols()
        )));
    }
    let rr = right.nrows();
    Ok(CMatrix::from_fn(left.nrows() * rr, left.ncols(), |r, c| {
        left[(r / rr, c)] * right[(r % rr, c)]
    }))
}

/// Measurement matrix on a candidate support: one row per observed triple,
/// one column per support triple. Row `e` of column `l` is
/// `A[g_e, n_l] · B[v_e, j_l] · F[p_e, c_l]`, i.e. the Khatri-Rao column of
/// the selected dictionary columns restricted to the observed entries, in
/// the order of `observed`.
pub fn khatri_rao_support(
    support: &[[usize; 3]],
    dicts: &Dictionaries,
    observed: &[[usize; 3]],
) -> Result<CMatrix> {
    let shape = [
        dicts.delay.ncols(),
        dicts.steering.ncols(),
        dicts.doppler.ncols(),
    ];
    let rows = [
        dicts.delay.nrows(),
        dicts.steering.nrows(),
        dicts.doppler.nrows(),
    ];
    if let Some(s) = support.iter().find(|s| (0..3).any(|d| s[d] >= shape[d])) {
        return Err(RadarError::Index(format!(
            "support triple {s:?} outside grid {shape:?}"
        )));
    }
    if let Some(o) = observed.iter().find(|o| (0..3).any(|d| o[d] >= rows[d])) {
        return Err(RadarError::Index(format!(
            "observed triple {o:?} outside measurement grid {rows:?}"
        )));
    }
    Ok(CMatrix::from_fn(observed.len(), support.len(), |e, l| {
        dicts.atom(observed[e], support[l])
    }))
}

/// Vandermonde factor vectors `(a, b, f)` of one target, of lengths
/// `TN`, `TR` and `P`, each with unit first entry.
pub fn vandermonde_vectors(target: &Target, config: &RadarConfig) -> Result<(CVector, CVector, CVector)> {
    target.validate(config)?;
    let [tn, tr, p] = config.grid_shape();
    let a = geometric(tn, -2.0 * PI * target.delay / config.pri);
    let b = geometric(tr, PI * target.doa);
    let f = geometric(p, -2.0 * PI * target.doppler * config.pri);
    Ok((a, b, f))
}

/// `[1, e^{jω}, e^{j2ω}, …]` of length `n`.
pub fn geometric(n: usize, omega: f64) -> CVector {
    CVector::from_fn(n, |i, _| Complex64::from_polar(1.0, omega * i as f64))
}
