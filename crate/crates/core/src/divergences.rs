//! Closed-form distinguishability measures between states. Logs are base 2.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, dim_err, domain_err};
use crate::linalg::{DEFAULT_RANK_TOL, HermitianOperator, MatrixFunction, State, eigh, matrix_fn, support_projector};

/// `Tr[Π_ρ σ]` at or below this value makes `D_min` infinite.
pub const INFINITY_TOL: f64 = 1e-12;
/// `Tr[(I − Π_σ) ρ]` above this value is a support violation.
pub const SUPPORT_LEAK_TOL: f64 = 1e-9;

/// A divergence in bits, or the explicit infinity marker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DivergenceValue {
    Finite(f64),
    Infinite,
}

impl DivergenceValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, DivergenceValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            DivergenceValue::Finite(v) => Some(v),
            DivergenceValue::Infinite => None,
        }
    }

    /// The value as an `f64`, with `+inf` for the marker.
    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY { DivergenceValue::Infinite } else { DivergenceValue::Finite(v) }
    }
}

impl fmt::Display for DivergenceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceValue::Finite(v) => write!(f, "{v}"),
            DivergenceValue::Infinite => f.write_str("inf"),
        }
    }
}

/// Rényi order `α > 0`, `α ≠ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenyiOrder(f64);

impl RenyiOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return domain_err(format!("Rényi order must be positive and finite, got {alpha}"));
        }
        if alpha == 1.0 {
            return domain_err("Rényi order 1 is the relative entropy; use rel_entropy");
        }
        Ok(Self(alpha))
    }

    pub fn alpha(&self) -> f64 {
        self.0
    }

    /// Petz data processing is known to hold for `α ∈ (0,1) ∪ (1,2]`.
    pub fn petz_data_processing(&self) -> bool {
        self.0 <= 2.0
    }

    /// Sandwiched data processing is known to hold for `α ∈ [1/2,1) ∪ (1,∞)`.
    pub fn sandwiched_data_processing(&self) -> bool {
        self.0 >= 0.5
    }
}

fn check_dims(rho: &State, sigma: &State) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return dim_err(format!("states have dims {} and {}", rho.dim(), sigma.dim()));
    }
    Ok(())
}

/// `Tr[(I − Π_σ) ρ]`.
pub fn support_leak(rho: &State, sigma: &State) -> Result<f64> {
    check_dims(rho, sigma)?;
    let p = support_projector(sigma, DEFAULT_RANK_TOL)?;
    Ok((1.0 - p.trace_with(rho)).max(0.0))
}

pub fn support_contained(rho: &State, sigma: &State) -> Result<bool> {
    Ok(support_leak(rho, sigma)? <= SUPPORT_LEAK_TOL)
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &State, sigma: &State) -> Result<f64> {
    check_dims(rho, sigma)?;
    Ok(0.5 * (rho.operator() - sigma.operator()).trace_norm()?)
}

/// `‖√ρ √σ‖₁²`.
pub fn fidelity(rho: &State, sigma: &State) -> Result<f64> {
    check_dims(rho, sigma)?;
    let sr = matrix_fn(rho, MatrixFunction::Pow(0.5), false)?;
    let inner = sigma.sandwich(&sr);
    let root_sum = spectral_sum(&inner, 0.5)?;
    Ok((root_sum * root_sum).min(1.0))
}

/// `Σ λᵢ^t` over the support of a PSD operator.
fn spectral_sum(a: &HermitianOperator, t: f64) -> Result<f64> {
    let e = eigh(a)?;
    let cut = DEFAULT_RANK_TOL * e.scale();
    Ok(e.values.iter().filter(|&&x| x > cut).map(|x| x.powf(t)).sum())
}

/// `−log₂ Tr[Π_ρ σ]`.
pub fn d_min(rho: &State, sigma: &State) -> Result<DivergenceValue> {
    check_dims(rho, sigma)?;
    let p = support_projector(rho, DEFAULT_RANK_TOL)?;
    let overlap = p.trace_with(sigma);
    if overlap <= INFINITY_TOL {
        return Ok(DivergenceValue::Infinite);
    }
    Ok(DivergenceValue::Finite(-overlap.min(1.0).log2()))
}

/// `log₂ λ_max(σ^{-1/2} ρ σ^{-1/2})` on the support of σ.
pub fn d_max(rho: &State, sigma: &State) -> Result<DivergenceValue> {
    if !support_contained(rho, sigma)? {
        return Ok(DivergenceValue::Infinite);
    }
    let s = matrix_fn(sigma, MatrixFunction::Pow(-0.5), true)?;
    let lam = rho.sandwich(&s).max_eigenvalue()?;
    Ok(DivergenceValue::Finite(lam.log2()))
}

fn entropy_term(rho: &HermitianOperator) -> Result<f64> {
    // Tr[ρ log₂ ρ] from the spectrum.
    let e = eigh(rho)?;
    let cut = DEFAULT_RANK_TOL * e.scale();
    Ok(e.values.iter().filter(|&&x| x > cut).map(|&x| x * x.log2()).sum())
}

/// `Tr[ρ (log₂ ρ − log₂ σ)]`.
pub fn rel_entropy(rho: &State, sigma: &State) -> Result<DivergenceValue> {
    if !support_contained(rho, sigma)? {
        return Ok(DivergenceValue::Infinite);
    }
    let log_sigma = matrix_fn(sigma, MatrixFunction::Log2, true)?;
    Ok(DivergenceValue::Finite(entropy_term(rho)? - rho.trace_with(&log_sigma)))
}

/// `Tr[ρ (log₂ ρ − log₂ σ − D)²]`.
pub fn rel_entropy_variance(rho: &State, sigma: &State) -> Result<f64> {
    if !support_contained(rho, sigma)? {
        return domain_err("relative entropy variance needs supp(ρ) ⊆ supp(σ)");
    }
    let d = rel_entropy(rho, sigma)?.to_f64();
    let l = &matrix_fn(rho, MatrixFunction::Log2, true)? - &matrix_fn(sigma, MatrixFunction::Log2, true)?;
    let k = &l - &HermitianOperator::identity(rho.dim()).scale(d);
    let k2 = HermitianOperator::from_square(k.matrix() * k.matrix());
    Ok(rho.trace_with(&k2))
}

fn renyi_from_quasi(q: f64, alpha: f64) -> DivergenceValue {
    if alpha < 1.0 && q <= INFINITY_TOL {
        return DivergenceValue::Infinite;
    }
    DivergenceValue::Finite(q.log2() / (alpha - 1.0))
}

/// `(1/(α−1)) log₂ Tr[ρ^α σ^{1−α}]`.
pub fn petz_renyi(rho: &State, sigma: &State, alpha: RenyiOrder) -> Result<DivergenceValue> {
    check_dims(rho, sigma)?;
    let a = alpha.alpha();
    if a > 1.0 && !support_contained(rho, sigma)? {
        return Ok(DivergenceValue::Infinite);
    }
    let ra = matrix_fn(rho, MatrixFunction::Pow(a), true)?;
    let sb = matrix_fn(sigma, MatrixFunction::Pow(1.0 - a), true)?;
    Ok(renyi_from_quasi(ra.trace_with(&sb), a))
}

/// `(1/(α−1)) log₂ Tr[(σ^{(1−α)/2α} ρ σ^{(1−α)/2α})^α]`.
pub fn sandwiched_renyi(rho: &State, sigma: &State, alpha: RenyiOrder) -> Result<DivergenceValue> {
    check_dims(rho, sigma)?;
    let a = alpha.alpha();
    if a > 1.0 && !support_contained(rho, sigma)? {
        return Ok(DivergenceValue::Infinite);
    }
    let s = matrix_fn(sigma, MatrixFunction::Pow((1.0 - a) / (2.0 * a)), true)?;
    let inner = rho.sandwich(&s);
    let q = spectral_sum(&inner, a)?;
    Ok(renyi_from_quasi(q, a))
}
