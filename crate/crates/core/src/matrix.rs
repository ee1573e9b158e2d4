//! Dense symmetric matrices and the spectral operations built on them.
//!
//! Every matrix in the pipeline (covariances, precisions, multipliers) is a
//! small dense symmetric matrix, so a single newtype over [`DMatrix`] carries
//! them all. Symmetry is exact: constructors mirror or average the two
//! triangles so `a[(k, s)] == a[(s, k)]` holds bit-for-bit.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// `U diag(values) Uᵀ` with the triangles averaged so the result is exactly symmetric.
    pub fn reconstruct_with(&self, values: &[f64]) -> SymmetricMatrix {
        let u = &self.eigenvectors;
        let scaled = DMatrix::from_fn(u.nrows(), u.ncols(), |r, c| u[(r, c)] * values[c]);
        SymmetricMatrix::symmetrize(scaled * u.transpose())
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.reconstruct_with(self.eigenvalues.as_slice())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }
}

impl SymmetricMatrix {
    /// Builds a matrix from the upper triangle of `f`; the lower triangle is mirrored.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            for s in k..dim {
                let v = f(k, s);
                m[(k, s)] = v;
                m[(s, k)] = v;
            }
        }
        SymmetricMatrix(m)
    }

    /// Accepts a square finite matrix and averages its two triangles.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be >= 1".into()));
        }
        for (idx, v) in m.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: idx % m.nrows(),
                    col: idx / m.nrows(),
                });
            }
        }
        Ok(Self::symmetrize(m))
    }

    /// Row-major nested slices, mainly for tests and fixtures.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::NotSquare {
                rows: p,
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        Self::from_matrix(DMatrix::from_fn(p, p, |r, c| rows[r][c]))
    }

    pub(crate) fn symmetrize(m: DMatrix<f64>) -> Self {
        let p = m.nrows();
        Self::from_fn(p, |k, s| {
            if k == s {
                m[(k, k)]
            } else {
                0.5 * (m[(k, s)] + m[(s, k)])
            }
        })
    }

    pub fn identity(dim: usize) -> Self {
        SymmetricMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymmetricMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.0[(k, k)]).collect()
    }

    /// Sets both `(k, s)` and `(s, k)`.
    pub fn set(&mut self, k: usize, s: usize, value: f64) {
        self.0[(k, s)] = value;
        self.0[(s, k)] = value;
    }

    pub fn map_entries(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        Self::from_fn(self.dim(), |k, s| f(k, s, self.0[(k, s)]))
    }

    pub fn scale(&self, c: f64) -> Self {
        SymmetricMatrix(&self.0 * c)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `tr(A B)` for symmetric `A`, `B`, without forming the product.
    pub fn trace_product(&self, other: &SymmetricMatrix) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SymmetricMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn eigen(&self) -> EigenDecomposition {
        let dec = SymmetricEigen::new(self.0.clone());
        let p = self.dim();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| dec.eigenvalues[b].total_cmp(&dec.eigenvalues[a]));
        let eigenvalues = DVector::from_iterator(p, order.iter().map(|&i| dec.eigenvalues[i]));
        let eigenvectors = DMatrix::from_fn(p, p, |r, c| dec.eigenvectors[(r, order[c])]);
        EigenDecomposition {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `Σ f(σ_j) u_j u_jᵀ` over the eigenpairs of `self`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dec = self.eigen();
        let mut mapped = Vec::with_capacity(self.dim());
        for (index, &eigenvalue) in dec.eigenvalues.iter().enumerate() {
            let v = f(eigenvalue);
            if !v.is_finite() {
                return Err(Error::SpectralDomain { index, eigenvalue });
            }
            mapped.push(v);
        }
        Ok(dec.reconstruct_with(&mapped))
    }

    /// Raises every eigenvalue below `delta` to `delta`.
    ///
    /// Returns an unchanged copy when the spectrum already clears the floor.
    pub fn clip_eigenvalues(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eigenvalue floor must be positive, got {delta}"
            )));
        }
        let mut shifted = self.0.clone();
        for k in 0..self.dim() {
            shifted[(k, k)] -= delta;
        }
        // A − δI positive definite means nothing to clip
        if shifted.cholesky().is_some() {
            return Ok(self.clone());
        }
        let dec = self.eigen();
        if dec.min_eigenvalue() >= delta {
            return Ok(self.clone());
        }
        let clipped: Vec<f64> = dec.eigenvalues.iter().map(|&v| v.max(delta)).collect();
        Ok(dec.reconstruct_with(&clipped))
    }

    /// Rescales to unit diagonal: `r_ks = a_ks / sqrt(a_kk a_ss)`.
    pub fn cov2cor(&self) -> Result<Self> {
        let diag = self.diagonal();
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveDiagonal { index, value });
        }
        let sd: Vec<f64> = diag.iter().map(|v| v.sqrt()).collect();
        Ok(self.map_entries(|k, s, v| if k == s { 1.0 } else { v / (sd[k] * sd[s]) }))
    }

    /// `D A D` for the diagonal matrix `D = diag(d)`.
    pub fn scale_by_diagonal(&self, d: &[f64]) -> Self {
        self.map_entries(|k, s, v| d[k] * v * d[s])
    }

    fn cholesky(&self) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.0.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: self.min_eigenvalue(),
        })
    }

    /// Inverse of a positive definite matrix.
    pub fn inverse(&self) -> Result<Self> {
        Ok(Self::symmetrize(self.cholesky()?.inverse()))
    }

    /// `log det` of a positive definite matrix.
    pub fn log_det(&self) -> Result<f64> {
        let chol = self.cholesky()?;
        Ok(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
    }

    pub fn is_positive_definite(&self) -> bool {
        self.0.clone().cholesky().is_some()
    }

    /// Lower-triangular Cholesky factor.
    pub fn cholesky_factor(&self) -> Result<DMatrix<f64>> {
        Ok(self.cholesky()?.unpack())
    }

    /// Quadratic form `xᵀ A⁻¹ x` for a positive definite `A`.
    pub fn inverse_quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let chol = self.cholesky()?;
        let v = DVector::from_column_slice(x);
        let solved = chol.solve(&v);
        Ok(v.dot(&solved))
    }

    /// `P A Pᵀ` where row `k` of the result is row `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.dim(), |k, s| self.0[(perm[k], perm[s])])
    }

    /// Unordered off-diagonal pairs `(k, s)`, `k < s`, with nonzero entries.
    pub fn off_diagonal_support(&self) -> Vec<(usize, usize)> {
        let p = self.dim();
        let mut out = Vec::new();
        for k in 0..p {
            for s in (k + 1)..p {
                if self.0[(k, s)] != 0.0 {
                    out.push((k, s));
                }
            }
        }
        out
    }

    /// Row-major nested vectors.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| self.0[(r, c)]).collect())
            .collect()
    }
}

impl fmt::Debug for SymmetricMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymmetricMatrix{:?}", self.to_rows())
    }
}

impl Index<(usize, usize)> for SymmetricMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl Add for &SymmetricMatrix {
    type Output = SymmetricMatrix;

    fn add(self, rhs: &SymmetricMatrix) -> SymmetricMatrix {
        SymmetricMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymmetricMatrix {
    type Output = SymmetricMatrix;

    fn sub(self, rhs: &SymmetricMatrix) -> SymmetricMatrix {
        SymmetricMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymmetricMatrix {
    type Output = SymmetricMatrix;

    fn mul(self, rhs: f64) -> SymmetricMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymmetricMatrix {
    type Output = SymmetricMatrix;

    fn neg(self) -> SymmetricMatrix {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> SymmetricMatrix {
        SymmetricMatrix::from_diagonal(v)
    }

    #[test]
    fn spectral_map_identity_cases() {
        let i3 = SymmetricMatrix::identity(3);
        assert!(i3.spectral_map(|x| x).unwrap().max_abs_diff(&i3) < 1e-14);
        assert!(i3.spectral_map(f64::sqrt).unwrap().max_abs_diff(&i3) < 1e-14);
        let d = diag(&[4.0, 9.0]).spectral_map(f64::sqrt).unwrap();
        assert!(d.max_abs_diff(&diag(&[2.0, 3.0])) < 1e-14);
    }

    #[test]
    fn spectral_map_reports_offending_eigenvalue() {
        let err = diag(&[1.0, -4.0]).spectral_map(f64::sqrt).unwrap_err();
        match err {
            Error::SpectralDomain { eigenvalue, .. } => assert_eq!(eigenvalue, -4.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn clip_forced_cases() {
        let i3 = SymmetricMatrix::identity(3);
        assert_eq!(i3.clip_eigenvalues(0.01).unwrap(), i3);
        let clipped = diag(&[1.0, -1.0]).clip_eigenvalues(0.5).unwrap();
        assert!(clipped.max_abs_diff(&diag(&[1.0, 0.5])) < 1e-14);
        assert!(i3.clip_eigenvalues(0.0).is_err());
    }

    #[test]
    fn cov2cor_cases() {
        let a = SymmetricMatrix::from_rows(&[&[4.0, 2.0], &[2.0, 9.0]]).unwrap();
        let r = a.cov2cor().unwrap();
        assert_eq!(r[(0, 0)], 1.0);
        assert!((r[(0, 1)] - 1.0 / 3.0).abs() < 1e-15);
        let rr = r.cov2cor().unwrap();
        assert!(rr.max_abs_diff(&r) < 1e-15);
        let i4 = SymmetricMatrix::identity(4);
        assert_eq!(i4.cov2cor().unwrap(), i4);
        let bad = diag(&[1.0, 0.0, 2.0]);
        assert!(matches!(
            bad.cov2cor(),
            Err(Error::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn from_matrix_rejects_bad_shapes() {
        assert!(SymmetricMatrix::from_matrix(DMatrix::zeros(2, 3)).is_err());
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(
            SymmetricMatrix::from_matrix(m),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn eigen_is_descending_and_orthonormal() {
        let a = SymmetricMatrix::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 4.0]]).unwrap();
        let dec = a.eigen();
        assert!(dec.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let utu = dec.eigenvectors.transpose() * &dec.eigenvectors;
        assert!((utu - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!(dec.reconstruct().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn log_det_and_inverse() {
        let a = diag(&[2.0, 3.0]);
        assert!((a.log_det().unwrap() - 6f64.ln()).abs() < 1e-14);
        assert!(a.inverse().unwrap().max_abs_diff(&diag(&[0.5, 1.0 / 3.0])) < 1e-15);
        assert!(diag(&[1.0, -1.0]).inverse().is_err());
    }
}
