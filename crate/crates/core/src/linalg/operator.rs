use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DVector;
use num_complex::Complex64;

use super::{CMat, eigh};
use crate::error::{Result, dim_err};

/// Dense complex Hermitian matrix.
///
/// Every constructor symmetrizes its input as `(A + A†)/2`, so the stored
/// entries satisfy `a[i][j] == conj(a[j][i])` bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    mat: CMat,
}

fn symmetrize(m: &CMat) -> CMat {
    let d = m.nrows();
    let mut out = CMat::zeros(d, d);
    for i in 0..d {
        out[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..d {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

impl HermitianOperator {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return dim_err(format!("operator must be square, got {}x{}", m.nrows(), m.ncols()));
        }
        if m.nrows() == 0 {
            return dim_err("operator must have positive dimension");
        }
        Ok(Self { mat: symmetrize(&m) })
    }

    /// Wraps an already Hermitian matrix. Only the symmetrization is applied.
    pub(crate) fn from_square(m: CMat) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { mat: symmetrize(&m) }
    }

    pub fn zeros(d: usize) -> Self {
        Self { mat: CMat::zeros(d, d) }
    }

    pub fn identity(d: usize) -> Self {
        Self { mat: CMat::identity(d, d) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self { mat: CMat::from_diagonal(&DVector::from_vec(v)) }
    }

    /// `|v⟩⟨v|` (not normalized).
    pub fn outer(v: &DVector<Complex64>) -> Self {
        Self::from_square(v * v.adjoint())
    }

    /// `|i⟩⟨i|` in dimension `d`.
    pub fn basis_projector(d: usize, i: usize) -> Self {
        let mut m = CMat::zeros(d, d);
        m[(i, i)] = Complex64::new(1.0, 0.0);
        Self { mat: m }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// `Re Tr[A B]`, exact for Hermitian pairs.
    pub fn trace_with(&self, other: &HermitianOperator) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let p = self.mat[(i, j)] * other.mat[(j, i)];
                acc += p.re;
            }
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { mat: &self.mat * Complex64::new(s, 0.0) }
    }

    pub fn kron(&self, other: &HermitianOperator) -> Self {
        Self::from_square(self.mat.kronecker(&other.mat))
    }

    /// Entrywise transpose, which equals the complex conjugate for Hermitian input.
    pub fn transpose(&self) -> Self {
        Self { mat: self.mat.transpose() }
    }

    /// `B A B` for Hermitian `B`.
    pub fn sandwich(&self, b: &HermitianOperator) -> Self {
        Self::from_square(&b.mat * &self.mat * &b.mat)
    }

    /// `U A U†` for an arbitrary (possibly rectangular) `U`.
    pub fn conjugate_by(&self, u: &CMat) -> Result<Self> {
        if u.ncols() != self.dim() {
            return dim_err(format!("cannot conjugate dim {} by {}x{}", self.dim(), u.nrows(), u.ncols()));
        }
        Ok(Self::from_square(u * &self.mat * u.adjoint()))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eigh(self)?.values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*eigh(self)?.values.last().expect("nonempty"))
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(eigh(self)?.values[0])
    }

    /// Sum of absolute eigenvalues.
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(eigh(self)?.values.iter().map(|x| x.abs()).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff dimension mismatch");
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Re-symmetrizes after an in-place style computation on the raw matrix.
    pub fn map_matrix(&self, f: impl FnOnce(&CMat) -> CMat) -> Result<Self> {
        Self::new(f(&self.mat))
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.mat[(i, j)].norm() <= tol))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch in add");
        HermitianOperator { mat: &self.mat + &rhs.mat }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch in sub");
        HermitianOperator { mat: &self.mat - &rhs.mat }
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        HermitianOperator { mat: -&self.mat }
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}
