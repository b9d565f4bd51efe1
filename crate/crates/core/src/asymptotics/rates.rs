use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::divergences::{DivergenceValue, rel_entropy, rel_entropy_variance, support_contained};
use crate::error::{Result, domain_err};
use crate::linalg::{State, StateBox};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// `Φ⁻¹(ε)` for `ε ∈ (0, 1)`.
pub fn inv_normal_cdf(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain_err(format!("inverse normal CDF needs eps in (0, 1), got {eps}"));
    }
    // Evaluate in the lower half and reflect, so both tails get the same accuracy.
    if eps > 0.5 {
        return Ok(-standard_normal().inverse_cdf(1.0 - eps));
    }
    Ok(standard_normal().inverse_cdf(eps))
}

fn d_and_v(rho: &State, sigma: &State) -> Result<(f64, f64)> {
    if !support_contained(rho, sigma)? {
        return domain_err("second-order terms need supp(rho) inside supp(sigma)");
    }
    let d = rel_entropy(rho, sigma)?.to_f64();
    Ok((d, rel_entropy_variance(rho, sigma)?))
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return domain_err("need n >= 1");
    }
    Ok(())
}

/// `nD + √(nV) Φ⁻¹(ε)`, the distillable distinguishability of `n` copies up
/// to an `O(log n)` term that is not included.
pub fn second_order_distill(rho: &State, sigma: &State, eps: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    let (d, v) = d_and_v(rho, sigma)?;
    let n = n as f64;
    Ok(n * d + (n * v).sqrt() * inv_normal_cdf(eps)?)
}

/// `nD − √(nV) Φ⁻¹(ε)`, without the `O(log n)` term.
///
/// With infidelity smoothing this is the second-order expansion of the cost.
/// With trace-distance smoothing it only brackets the cost up to `O(√n)`.
pub fn second_order_cost(rho: &State, sigma: &State, eps: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    let (d, v) = d_and_v(rho, sigma)?;
    let n = n as f64;
    Ok(n * d - (n * v).sqrt() * inv_normal_cdf(eps)?)
}

/// Which supports are contained, deciding the form of the rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportCase {
    /// `supp ρ ⊆ supp σ` and `supp τ ⊆ supp ω` with `τ ≠ ω`.
    BothContained,
    /// Only the target's support condition fails: rate zero.
    TargetViolated,
    /// Only the source's support condition fails: rate infinite.
    SourceViolated,
    /// Both `D` values are infinite; the ratio has no value.
    BothViolated,
    /// `τ = ω`: the target is free to prepare, rate infinite.
    TrivialTarget,
}

/// Value of an asymptotic conversion rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    Finite(f64),
    Zero,
    Infinite,
    Undefined,
}

impl Rate {
    /// `0`, `inf` and `NaN` for the markers.
    pub fn to_f64(&self) -> f64 {
        match *self {
            Rate::Finite(r) => r,
            Rate::Zero => 0.0,
            Rate::Infinite => f64::INFINITY,
            Rate::Undefined => f64::NAN,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateResult {
    pub rate: Rate,
    /// `D(ρ‖σ)`.
    pub numerator: DivergenceValue,
    /// `D(τ‖ω)`.
    pub denominator: DivergenceValue,
    pub support_case: SupportCase,
}

/// Zero `D(τ‖ω)` below this counts as `τ = ω`.
const TRIVIAL_TARGET_TOL: f64 = 1e-12;

/// Optimal asymptotic rate `D(ρ‖σ)/D(τ‖ω)` of `(ρ,σ) → (τ,ω)`.
pub fn box_rate(source: &StateBox, target: &StateBox) -> Result<RateResult> {
    let numerator = rel_entropy(&source.first, &source.second)?;
    let denominator = rel_entropy(&target.first, &target.second)?;
    let (rate, support_case) = match (numerator, denominator) {
        (DivergenceValue::Infinite, DivergenceValue::Infinite) => (Rate::Undefined, SupportCase::BothViolated),
        (DivergenceValue::Finite(_), DivergenceValue::Infinite) => (Rate::Zero, SupportCase::TargetViolated),
        (DivergenceValue::Infinite, DivergenceValue::Finite(b)) => (
            Rate::Infinite,
            if b <= TRIVIAL_TARGET_TOL { SupportCase::TrivialTarget } else { SupportCase::SourceViolated },
        ),
        (DivergenceValue::Finite(_), DivergenceValue::Finite(b)) if b <= TRIVIAL_TARGET_TOL => {
            (Rate::Infinite, SupportCase::TrivialTarget)
        }
        (DivergenceValue::Finite(a), DivergenceValue::Finite(b)) => {
            let r = a.max(0.0) / b;
            (if r == 0.0 { Rate::Zero } else { Rate::Finite(r) }, SupportCase::BothContained)
        }
    };
    Ok(RateResult { rate, numerator, denominator, support_case })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn inverse_normal_values() {
        assert_eq!(inv_normal_cdf(0.5).unwrap(), 0.0);
        assert!((inv_normal_cdf(0.8413447461).unwrap() - 1.0).abs() < 1e-6);
        assert!((inv_normal_cdf(0.05).unwrap() + 1.6448536).abs() < 1e-6);
        for e in [1e-9, 1e-4, 0.05, 0.3, 0.7, 0.999] {
            let x = inv_normal_cdf(e).unwrap();
            assert!((normal_cdf(x) - e).abs() < 1e-10);
            // 1 − e is rounded, so the reflected value carries that rounding.
            let slack = 1e-10 + f64::EPSILON / normal_pdf(x);
            assert!((inv_normal_cdf(1.0 - e).unwrap() + x).abs() < slack);
        }
        assert!(inv_normal_cdf(0.0).is_err() && inv_normal_cdf(1.0).is_err());
    }

    #[test]
    fn second_order_special_cases() {
        let b = StateBox::bits(1.0).unwrap();
        let v = second_order_distill(&b.first, &b.second, 0.05, 10).unwrap();
        assert!((v - 10.0).abs() < 1e-9);
        let rho = State::from_diagonal(&[0.9, 0.1]).unwrap();
        let sigma = State::maximally_mixed(2);
        let d = rel_entropy(&rho, &sigma).unwrap().to_f64();
        assert!((second_order_cost(&rho, &sigma, 0.5, 7).unwrap() - 7.0 * d).abs() < 1e-12);
        let a = second_order_cost(&rho, &sigma, 0.2, 50).unwrap();
        let b = second_order_distill(&rho, &sigma, 0.8, 50).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!(second_order_distill(&sigma, &State::basis(2, 0), 0.1, 3).is_err());
    }

    #[test]
    fn rate_cases() {
        let one = StateBox::bits(1.0).unwrap();
        let two = StateBox::bits(2.0).unwrap();
        let r = box_rate(&one, &two).unwrap();
        assert!((r.rate.to_f64() - 0.5).abs() < 1e-12);
        assert_eq!(r.support_case, SupportCase::BothContained);
        let same = StateBox::new(State::from_diagonal(&[0.3, 0.7]).unwrap(), State::maximally_mixed(2)).unwrap();
        assert!((box_rate(&same, &same).unwrap().rate.to_f64() - 1.0).abs() < 1e-12);
        let orth = StateBox::orthogonal_bits();
        assert_eq!(box_rate(&orth, &one).unwrap().rate, Rate::Infinite);
        assert_eq!(box_rate(&one, &orth).unwrap().rate, Rate::Zero);
        assert_eq!(box_rate(&orth, &orth).unwrap().support_case, SupportCase::BothViolated);
        let free = StateBox::new(State::maximally_mixed(2), State::maximally_mixed(2)).unwrap();
        assert_eq!(box_rate(&one, &free).unwrap().support_case, SupportCase::TrivialTarget);
    }
}
