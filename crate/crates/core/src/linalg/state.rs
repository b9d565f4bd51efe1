use std::ops::Deref;

use nalgebra::DVector;
use num_complex::Complex64;

use super::{CMat, HermitianOperator, eigh};
use crate::error::{Error, Result, dim_err};

/// Allowed negativity of the smallest eigenvalue of a state.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed deviation of the trace of a state from one.
pub const TRACE_TOL: f64 = 1e-10;

/// Density operator: PSD and unit trace within `PSD_TOL` / `TRACE_TOL`.
#[derive(Clone, Debug, PartialEq)]
pub struct State(HermitianOperator);

impl State {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        Self::with_tolerances(op, PSD_TOL, TRACE_TOL)
    }

    pub fn with_tolerances(op: HermitianOperator, psd_tol: f64, trace_tol: f64) -> Result<Self> {
        let tr = op.trace();
        if !tr.is_finite() || (tr - 1.0).abs() > trace_tol {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = *eigh(&op)?.values.last().expect("nonempty");
        if min < -psd_tol {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:e} is negative")));
        }
        Ok(Self(op))
    }

    pub fn from_matrix(m: CMat) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    pub fn from_diagonal(p: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::from_real_diagonal(p))
    }

    /// Normalized `|ψ⟩⟨ψ|`.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("pure state vector has zero norm".into()));
        }
        Self::new(HermitianOperator::outer(&(v / Complex64::new(n, 0.0))))
    }

    /// `|i⟩⟨i|` in dimension `d`.
    pub fn basis(d: usize, i: usize) -> Self {
        assert!(i < d, "basis index out of range");
        Self(HermitianOperator::basis_projector(d, i))
    }

    /// `π_M = (1/M)|0⟩⟨0| + (1 − 1/M)|1⟩⟨1|` for real `M ≥ 1`.
    pub fn pi_m(m: f64) -> Result<Self> {
        if !(m >= 1.0) || m.is_infinite() {
            return Err(Error::Domain(format!("pi_M needs finite M >= 1, got {m}")));
        }
        let p = 1.0 / m;
        Self::from_diagonal(&[p, 1.0 - p])
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(HermitianOperator::identity(d).scale(1.0 / d as f64))
    }

    /// Builds a state from an operator that is PSD and unit-trace up to roundoff,
    /// clipping negative eigenvalues and renormalizing.
    pub fn project(op: &HermitianOperator) -> Result<Self> {
        let e = eigh(op)?;
        let clipped = e.reconstruct_with(|x| x.max(0.0));
        let tr = clipped.trace();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::Numerical("cannot normalize operator with non-positive trace".into()));
        }
        Self::new(clipped.scale(1.0 / tr))
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.0
    }

    pub fn tensor(&self, other: &State) -> State {
        State(self.0.kron(&other.0))
    }

    pub fn tensor_power(&self, n: usize) -> State {
        assert!(n >= 1, "tensor power needs n >= 1");
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tensor(self);
        }
        acc
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (self.0.trace_with(&self.0) - 1.0).abs() <= tol
    }
}

impl Deref for State {
    type Target = HermitianOperator;
    fn deref(&self) -> &HermitianOperator {
        &self.0
    }
}

impl AsRef<HermitianOperator> for State {
    fn as_ref(&self) -> &HermitianOperator {
        &self.0
    }
}

/// Ordered pair of states on the same space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBox {
    pub first: State,
    pub second: State,
}

impl StateBox {
    pub fn new(first: State, second: State) -> Result<Self> {
        if first.dim() != second.dim() {
            return dim_err(format!("box states have dims {} and {}", first.dim(), second.dim()));
        }
        Ok(Self { first, second })
    }

    /// `m` bits of asymmetric distinguishability, `(|0⟩⟨0|, π_{2^m})`.
    pub fn bits(m: f64) -> Result<Self> {
        if !(m >= 0.0) {
            return Err(Error::Domain(format!("bit count must be nonnegative, got {m}")));
        }
        Ok(Self { first: State::basis(2, 0), second: State::pi_m(m.exp2())? })
    }

    /// `(|0⟩⟨0|, |1⟩⟨1|)`.
    pub fn orthogonal_bits() -> Self {
        Self { first: State::basis(2, 0), second: State::basis(2, 1) }
    }

    pub fn dim(&self) -> usize {
        self.first.dim()
    }

    pub fn tensor(&self, other: &StateBox) -> StateBox {
        StateBox { first: self.first.tensor(&other.first), second: self.second.tensor(&other.second) }
    }

    pub fn tensor_power(&self, n: usize) -> StateBox {
        StateBox { first: self.first.tensor_power(n), second: self.second.tensor_power(n) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(State::from_diagonal(&[0.5, 0.5]).is_ok());
        assert!(matches!(State::from_diagonal(&[0.6, 0.5]), Err(Error::InvalidState(_))));
        assert!(matches!(State::from_diagonal(&[1.5, -0.5]), Err(Error::InvalidState(_))));
        assert!(State::from_diagonal(&[1.0 + 5e-11, -5e-11]).is_ok());
    }

    #[test]
    fn pure_normalizes() {
        let s = State::pure(&[Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)]).unwrap();
        assert!((s.trace() - 1.0).abs() < 1e-15);
        assert!(s.is_pure(1e-12));
    }

    #[test]
    fn box_dims_must_match() {
        assert!(StateBox::new(State::basis(2, 0), State::basis(3, 0)).is_err());
    }
}
