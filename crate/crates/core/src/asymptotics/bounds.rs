use std::collections::BTreeMap;
use std::collections::HashMap;

use serde::Serialize;

use crate::divergences::{
    DivergenceValue, RenyiOrder, fidelity, petz_renyi, rel_entropy, sandwiched_renyi, support_contained, trace_distance,
};
use crate::error::{Result, domain_err};
use crate::linalg::{DEFAULT_DEGENERACY_TOL, State, StateBox, pinch};
use crate::sdp::{SmoothingBall, smooth_dmax, smooth_dmin};

/// Default margin below zero still counted as a pass.
pub const BATTERY_TOL: f64 = 1e-7;

/// Sandwiched orders `α ∈ (1/2, 1)` paired with `β = α/(2α − 1)`.
pub const SANDWICHED_ALPHAS: [f64; 3] = [0.55, 0.75, 0.95];
/// Petz orders `α ∈ (0, 1)` paired with `β = 2 − α`.
pub const PETZ_ALPHAS: [f64; 3] = [0.3, 0.6, 0.9];

/// One evaluated inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`; `+inf` for a vacuous check.
    pub margin: f64,
    /// `lhs = −inf` or `rhs = +inf`, so the inequality holds trivially.
    pub vacuous: bool,
    pub parameters: BTreeMap<String, f64>,
}

impl InequalityCheck {
    /// The claim `lhs ≤ rhs`.
    pub fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        let vacuous = lhs == f64::NEG_INFINITY || rhs == f64::INFINITY;
        let margin = if vacuous { f64::INFINITY } else { rhs - lhs };
        Self { name: name.to_string(), lhs, rhs, margin, vacuous, parameters: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    /// Vacuous, or `margin ≥ −tol`. A NaN margin fails.
    pub fn passes(&self, tol: f64) -> bool {
        self.vacuous || self.margin >= -tol
    }
}

fn order(alpha: f64) -> Result<RenyiOrder> {
    RenyiOrder::new(alpha)
}

/// `β = α/(2α − 1)`.
pub fn sandwiched_partner(alpha: f64) -> Result<f64> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return domain_err(format!("sandwiched order must lie in (1/2, 1), got {alpha}"));
    }
    Ok(alpha / (2.0 * alpha - 1.0))
}

/// `β = 2 − α`.
pub fn petz_partner(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain_err(format!("Petz order must lie in (0, 1), got {alpha}"));
    }
    Ok(2.0 - alpha)
}

fn neg_log2_one_minus(eps: f64) -> f64 {
    -(1.0 - eps).log2()
}

fn check_protocol(n: usize, m: usize, eps: f64) -> Result<()> {
    if n == 0 || m == 0 {
        return domain_err("need n, m >= 1");
    }
    if !(0.0..=1.0).contains(&eps) {
        return domain_err(format!("protocol error must lie in [0, 1], got {eps}"));
    }
    Ok(())
}

/// `((1−α)/2α)(R D̃_α(τ‖ω) − D̃_β(ρ‖σ))` with `R = m/n`: a lower bound on
/// `−(1/n) log2(1 − ε)` for any `(n, m, ε)` protocol.
pub fn sandwiched_exponent_bound(source: &StateBox, target: &StateBox, n: usize, m: usize, alpha: f64) -> Result<f64> {
    let beta = sandwiched_partner(alpha)?;
    let r = m as f64 / n as f64;
    let dt = sandwiched_renyi(&target.first, &target.second, order(alpha)?)?.to_f64();
    let ds = sandwiched_renyi(&source.first, &source.second, order(beta)?)?.to_f64();
    Ok((1.0 - alpha) / (2.0 * alpha) * (r * dt - ds))
}

/// `((1−α)/2)(R D_α(τ‖ω) − D_β(ρ‖σ))`, the Petz analogue with `β = 2 − α`.
pub fn petz_exponent_bound(source: &StateBox, target: &StateBox, n: usize, m: usize, alpha: f64) -> Result<f64> {
    let beta = petz_partner(alpha)?;
    let r = m as f64 / n as f64;
    let dt = petz_renyi(&target.first, &target.second, order(alpha)?)?.to_f64();
    let ds = petz_renyi(&source.first, &source.second, order(beta)?)?.to_f64();
    Ok((1.0 - alpha) / 2.0 * (r * dt - ds))
}

fn strong_converse(name: &str, bound: f64, n: usize, m: usize, alpha: f64, beta: f64, eps: f64) -> InequalityCheck {
    InequalityCheck::le(name, bound, neg_log2_one_minus(eps) / n as f64)
        .with("n", n as f64)
        .with("m", m as f64)
        .with("alpha", alpha)
        .with("beta", beta)
        .with("eps", eps)
}

/// Checks the sandwiched strong-converse bound for a protocol taking
/// `(ρ^{⊗n}, σ^{⊗n})` to within trace distance `eps` of `τ^{⊗m}`.
pub fn strong_converse_sandwiched(
    source: &StateBox,
    target: &StateBox,
    n: usize,
    m: usize,
    alpha: f64,
    eps: f64,
) -> Result<InequalityCheck> {
    check_protocol(n, m, eps)?;
    let bound = sandwiched_exponent_bound(source, target, n, m, alpha)?;
    Ok(strong_converse("strong_converse_sandwiched", bound, n, m, alpha, sandwiched_partner(alpha)?, eps))
}

/// The Petz version of [`strong_converse_sandwiched`].
pub fn strong_converse_petz(
    source: &StateBox,
    target: &StateBox,
    n: usize,
    m: usize,
    alpha: f64,
    eps: f64,
) -> Result<InequalityCheck> {
    check_protocol(n, m, eps)?;
    let bound = petz_exponent_bound(source, target, n, m, alpha)?;
    Ok(strong_converse("strong_converse_petz", bound, n, m, alpha, petz_partner(alpha)?, eps))
}

/// The sandwiched bound for a protocol with infidelity `eps_f`, where the
/// prefactor doubles to `(1−α)/α`.
pub fn strong_converse_sandwiched_infidelity(
    source: &StateBox,
    target: &StateBox,
    n: usize,
    m: usize,
    alpha: f64,
    eps_f: f64,
) -> Result<InequalityCheck> {
    check_protocol(n, m, eps_f)?;
    let bound = 2.0 * sandwiched_exponent_bound(source, target, n, m, alpha)?;
    Ok(strong_converse("strong_converse_sandwiched_infidelity", bound, n, m, alpha, sandwiched_partner(alpha)?, eps_f))
}

fn require_support(rho0: &State, sigma: &State) -> Result<()> {
    if !support_contained(rho0, sigma)? {
        return domain_err("pseudo-continuity needs supp(rho0) inside supp(sigma)");
    }
    Ok(())
}

/// `(α/(1−α)) log2 F(ρ₀,ρ₁) ≤ D̃_β(ρ₀‖σ) − D̃_α(ρ₁‖σ)`.
pub fn pseudo_continuity_sandwiched(rho0: &State, rho1: &State, sigma: &State, alpha: f64) -> Result<InequalityCheck> {
    let beta = sandwiched_partner(alpha)?;
    require_support(rho0, sigma)?;
    let f = fidelity(rho0, rho1)?;
    let lhs = if f > 0.0 { alpha / (1.0 - alpha) * f.log2() } else { f64::NEG_INFINITY };
    let rhs = sandwiched_renyi(rho0, sigma, order(beta)?)?.to_f64() - sandwiched_renyi(rho1, sigma, order(alpha)?)?.to_f64();
    Ok(InequalityCheck::le("pseudo_continuity_sandwiched", lhs, rhs).with("alpha", alpha).with("beta", beta))
}

/// `(2/(1−α)) log2[1 − ½‖ρ₀−ρ₁‖₁] ≤ D_β(ρ₀‖σ) − D_α(ρ₁‖σ)`.
pub fn pseudo_continuity_petz(rho0: &State, rho1: &State, sigma: &State, alpha: f64) -> Result<InequalityCheck> {
    let beta = petz_partner(alpha)?;
    require_support(rho0, sigma)?;
    let overlap = 1.0 - trace_distance(rho0, rho1)?;
    let lhs = if overlap > 0.0 { 2.0 / (1.0 - alpha) * overlap.log2() } else { f64::NEG_INFINITY };
    let rhs = petz_renyi(rho0, sigma, order(beta)?)?.to_f64() - petz_renyi(rho1, sigma, order(alpha)?)?.to_f64();
    Ok(InequalityCheck::le("pseudo_continuity_petz", lhs, rhs).with("alpha", alpha).with("beta", beta))
}

/// Parameter grids for [`bridge_bounds`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BridgeParams {
    /// `(ε₁, ε₂)` with `ε₁ + ε₂ < 1`.
    pub pairs: Vec<(f64, f64)>,
    /// Smoothing parameters in `(0, 1)`.
    pub eps: Vec<f64>,
    /// Orders in `[1/2, 1)` for the sandwiched lower bound.
    pub sandwiched_lower: Vec<f64>,
    /// Orders in `(0, 1)` for the Petz lower bound.
    pub petz_lower: Vec<f64>,
    /// Orders above 1 for the sandwiched upper bound.
    pub sandwiched_upper: Vec<f64>,
}

impl Default for BridgeParams {
    fn default() -> Self {
        let upper = SANDWICHED_ALPHAS.iter().map(|&a| sandwiched_partner(a).expect("grid order")).collect();
        Self {
            pairs: vec![(0.0, 0.0), (0.1, 0.1), (0.05, 0.3), (0.3, 0.05), (0.0, 0.25), (0.25, 0.0), (0.45, 0.45)],
            eps: vec![0.05, 0.1, 0.25, 0.4],
            sandwiched_lower: std::iter::once(0.5).chain(SANDWICHED_ALPHAS).collect(),
            petz_lower: PETZ_ALPHAS.to_vec(),
            sandwiched_upper: upper,
        }
    }
}

/// Memoized SDP values for one pair `(ρ, σ)`.
struct Smoothed<'a> {
    rho: &'a State,
    sigma: &'a State,
    dmin: HashMap<u64, f64>,
    dmax: HashMap<(u64, bool), f64>,
}

impl<'a> Smoothed<'a> {
    fn new(rho: &'a State, sigma: &'a State) -> Self {
        Self { rho, sigma, dmin: HashMap::new(), dmax: HashMap::new() }
    }

    fn dmin(&mut self, eps: f64) -> Result<f64> {
        if let Some(&v) = self.dmin.get(&eps.to_bits()) {
            return Ok(v);
        }
        let v = smooth_dmin(self.rho, self.sigma, eps)?.value.to_f64();
        self.dmin.insert(eps.to_bits(), v);
        Ok(v)
    }

    fn dmax(&mut self, eps: f64, infidelity: bool) -> Result<f64> {
        let key = (eps.to_bits(), infidelity);
        if let Some(&v) = self.dmax.get(&key) {
            return Ok(v);
        }
        let ball = if infidelity { SmoothingBall::infidelity(eps)? } else { SmoothingBall::trace(eps)? };
        let v = smooth_dmax(self.rho, self.sigma, ball)?.value.to_f64();
        self.dmax.insert(key, v);
        Ok(v)
    }
}

fn to_f64(v: DivergenceValue) -> f64 {
    v.to_f64()
}

fn check_open_unit(what: &str, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain_err(format!("{what} must lie in (0, 1), got {eps}"));
    }
    Ok(())
}

/// The trace-distance bounds relating `D_min^ε`, `D_max^ε` and the Rényi
/// families: the operational bridge, the spectrum-count bound, and Rényi
/// lower and upper bounds on `D_max^ε`.
pub fn bridge_bounds(rho: &State, sigma: &State, params: &BridgeParams) -> Result<Vec<InequalityCheck>> {
    let mut s = Smoothed::new(rho, sigma);
    let mut out = Vec::new();
    for &(e1, e2) in &params.pairs {
        if !(e1 >= 0.0 && e2 >= 0.0 && e1 + e2 < 1.0) {
            return domain_err(format!("bridge pair ({e1}, {e2}) needs eps1 + eps2 < 1"));
        }
        let lhs = s.dmin(e1)?;
        let rhs = s.dmax(e2, false)? + neg_log2_one_minus(e1 + e2);
        out.push(InequalityCheck::le("bridge_operational", lhs, rhs).with("eps1", e1).with("eps2", e2));
    }
    let (_, spec) = pinch(rho, sigma, DEFAULT_DEGENERACY_TOL)?;
    let d = to_f64(rel_entropy(rho, sigma)?);
    let td = trace_distance(rho, sigma)?;
    for &eps in &params.eps {
        check_open_unit("smoothing parameter", eps)?;
        let dmax = s.dmax(eps, false)?;
        let e2 = eps * eps;
        let rhs = s.dmin(1.0 - e2)? + (spec as f64).log2() + neg_log2_one_minus(e2);
        out.push(InequalityCheck::le("dmax_spec_count", dmax, rhs).with("eps", eps).with("spec_count", spec as f64));
        for &a in &params.sandwiched_lower {
            let lhs = to_f64(sandwiched_renyi(rho, sigma, order(a)?)?) + 2.0 * a / (a - 1.0) * neg_log2_one_minus(eps);
            out.push(InequalityCheck::le("dmax_lower_sandwiched", lhs, dmax).with("eps", eps).with("alpha", a));
        }
        for &a in &params.petz_lower {
            let lhs = to_f64(petz_renyi(rho, sigma, order(a)?)?) + 2.0 / (a - 1.0) * neg_log2_one_minus(eps);
            out.push(InequalityCheck::le("dmax_lower_petz", lhs, dmax).with("eps", eps).with("alpha", a));
        }
        // ‖ρ−σ‖₁/(2 ln 2) is the normalized trace distance over ln 2.
        let rhs = (d + td / std::f64::consts::LN_2) / e2 + neg_log2_one_minus(e2);
        out.push(InequalityCheck::le("dmax_upper_rel_entropy", dmax, rhs).with("eps", eps));
        for &a in &params.sandwiched_upper {
            let rhs = to_f64(sandwiched_renyi(rho, sigma, order(a)?)?) + 2.0 * (1.0 / eps).log2() / (a - 1.0)
                + neg_log2_one_minus(e2);
            out.push(InequalityCheck::le("dmax_upper_sandwiched", dmax, rhs).with("eps", eps).with("alpha", a));
        }
    }
    Ok(out)
}

/// Parameter grids for [`infidelity_bounds`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfidelityParams {
    /// `(ε_F, ε_F′)` with `√ε_F + √ε_F′ < 1`.
    pub pairs: Vec<(f64, f64)>,
    /// Infidelity radii in `(0, 1)`.
    pub eps: Vec<f64>,
    pub sandwiched_lower: Vec<f64>,
    pub sandwiched_upper: Vec<f64>,
}

impl Default for InfidelityParams {
    fn default() -> Self {
        let b = BridgeParams::default();
        Self {
            pairs: vec![(0.0, 0.0), (0.01, 0.04), (0.04, 0.01), (0.0, 0.2), (0.2, 0.0), (0.1, 0.1)],
            eps: vec![0.02, 0.1, 0.3],
            sandwiched_lower: b.sandwiched_lower,
            sandwiched_upper: b.sandwiched_upper,
        }
    }
}

/// The bounds of [`bridge_bounds`] restated for infidelity smoothing of `D_max`.
/// `D_min^ε` keeps its trace-distance meaning.
pub fn infidelity_bounds(rho: &State, sigma: &State, params: &InfidelityParams) -> Result<Vec<InequalityCheck>> {
    let mut s = Smoothed::new(rho, sigma);
    let mut out = Vec::new();
    for &(e, ep) in &params.pairs {
        let root = e.sqrt() + ep.sqrt();
        if !(e >= 0.0 && ep >= 0.0 && root < 1.0) {
            return domain_err(format!("infidelity pair ({e}, {ep}) needs sqrt(e) + sqrt(e') < 1"));
        }
        let lhs = s.dmin(e)?;
        let rhs = s.dmax(ep, true)? + neg_log2_one_minus(root * root);
        out.push(InequalityCheck::le("bridge_infidelity", lhs, rhs).with("eps_f", e).with("eps_f_prime", ep));
    }
    let (_, spec) = pinch(rho, sigma, DEFAULT_DEGENERACY_TOL)?;
    for &eps in &params.eps {
        check_open_unit("infidelity radius", eps)?;
        let dmax = s.dmax(eps, true)?;
        let rhs = s.dmin(1.0 - eps)? + (spec as f64).log2() + neg_log2_one_minus(eps);
        out.push(
            InequalityCheck::le("dmax_spec_count_infidelity", dmax, rhs).with("eps_f", eps).with("spec_count", spec as f64),
        );
        for &a in &params.sandwiched_lower {
            let lhs = to_f64(sandwiched_renyi(rho, sigma, order(a)?)?) + a / (a - 1.0) * neg_log2_one_minus(eps);
            out.push(InequalityCheck::le("dmax_lower_sandwiched_infidelity", lhs, dmax).with("eps_f", eps).with("alpha", a));
        }
        for &a in &params.sandwiched_upper {
            let rhs = to_f64(sandwiched_renyi(rho, sigma, order(a)?)?)
                + neg_log2_one_minus(eps)
                + (1.0 / eps).log2() / (a - 1.0);
            out.push(InequalityCheck::le("dmax_upper_sandwiched_infidelity", dmax, rhs).with("eps_f", eps).with("alpha", a));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuous_and_violated() {
        let c = InequalityCheck::le("x", 1.0, f64::INFINITY);
        assert!(c.vacuous && c.passes(0.0));
        let c = InequalityCheck::le("x", f64::INFINITY, 1.0);
        assert!(!c.vacuous && !c.passes(1e-7));
        let c = InequalityCheck::le("x", 1.0, 1.0 - 2e-7);
        assert!(!c.passes(1e-7) && c.passes(1e-6));
    }

    #[test]
    fn partners() {
        assert!((sandwiched_partner(0.75).unwrap() - 1.5).abs() < 1e-15);
        assert!((petz_partner(0.3).unwrap() - 1.7).abs() < 1e-15);
        assert!(sandwiched_partner(0.5).is_err() && petz_partner(1.0).is_err());
    }

    #[test]
    fn pseudo_continuity_equal_and_orthogonal() {
        let sigma = State::from_diagonal(&[0.4, 0.6]).unwrap();
        let rho = State::from_diagonal(&[0.8, 0.2]).unwrap();
        for a in SANDWICHED_ALPHAS {
            let c = pseudo_continuity_sandwiched(&rho, &rho, &sigma, a).unwrap();
            assert!(c.lhs.abs() < 1e-12 && c.margin >= 0.0);
            let o = pseudo_continuity_sandwiched(&State::basis(2, 0), &State::basis(2, 1), &sigma, a).unwrap();
            assert!(o.vacuous);
        }
        for a in PETZ_ALPHAS {
            assert!(pseudo_continuity_petz(&rho, &rho, &sigma, a).unwrap().margin >= 0.0);
            assert!(pseudo_continuity_petz(&State::basis(2, 0), &State::basis(2, 1), &sigma, a).unwrap().vacuous);
        }
        assert!(pseudo_continuity_petz(&rho, &rho, &State::basis(2, 0), 0.5).is_err());
    }

    #[test]
    fn strong_converse_identity_protocol() {
        let b = StateBox::new(State::from_diagonal(&[0.8, 0.2]).unwrap(), State::from_diagonal(&[0.3, 0.7]).unwrap()).unwrap();
        for a in SANDWICHED_ALPHAS {
            assert!(strong_converse_sandwiched(&b, &b, 1, 1, a, 0.0).unwrap().passes(0.0));
        }
        for a in PETZ_ALPHAS {
            assert!(strong_converse_petz(&b, &b, 1, 1, a, 0.0).unwrap().passes(0.0));
        }
        // Below the ratio the bound on the exponent is nonpositive.
        let bits = StateBox::bits(1.0).unwrap();
        assert!(sandwiched_exponent_bound(&bits, &StateBox::bits(0.5).unwrap(), 1, 1, 0.75).unwrap() <= 0.0);
    }

    #[test]
    fn bounds_on_equal_states() {
        let rho = State::from_diagonal(&[0.3, 0.7]).unwrap();
        for c in bridge_bounds(&rho, &rho, &BridgeParams::default()).unwrap() {
            assert!(c.passes(1e-9), "{c:?}");
            if c.name == "bridge_operational" {
                let (e1, e2) = (c.parameters["eps1"], c.parameters["eps2"]);
                assert!((c.rhs + (1.0 - e1 - e2).log2()).abs() < 1e-7);
            }
        }
        for c in infidelity_bounds(&rho, &rho, &InfidelityParams::default()).unwrap() {
            assert!(c.passes(1e-9), "{c:?}");
        }
    }

    #[test]
    fn bridge_saturates_on_bits() {
        let b = StateBox::bits(2.0).unwrap();
        let checks = bridge_bounds(&b.first, &b.second, &BridgeParams::default()).unwrap();
        for c in &checks {
            assert!(c.passes(1e-7), "{c:?}");
            if c.name == "bridge_operational" && c.parameters["eps2"] == 0.0 {
                assert!(c.margin.abs() < 1e-6, "{c:?}");
            }
        }
        let checks = infidelity_bounds(&b.first, &b.second, &InfidelityParams::default()).unwrap();
        for c in &checks {
            assert!(c.passes(1e-7), "{c:?}");
            if c.name == "bridge_infidelity" && c.parameters["eps_f_prime"] == 0.0 {
                assert!(c.margin.abs() < 1e-6, "{c:?}");
            }
        }
    }
}
