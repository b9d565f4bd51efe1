use serde::{Deserialize, Serialize};

use super::families::*;
use super::program::{ConicProgram, SolveResult, SolveStatus, SolverSettings, solve_with};
use crate::divergences::{DivergenceValue, INFINITY_TOL, SUPPORT_LEAK_TOL, fidelity, trace_distance};
use crate::error::{Error, Result, dim_err, domain_err};
use crate::linalg::{Channel, DEFAULT_RANK_TOL, HermitianOperator, State, StateBox, eigh, support_projector, support_split};

/// Distance used to define a smoothing ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TraceDistance,
    Infidelity,
}

impl Metric {
    /// `½‖ρ−σ‖₁` or `1 − F(ρ,σ)`.
    pub fn distance(&self, rho: &State, sigma: &State) -> Result<f64> {
        match self {
            Metric::TraceDistance => trace_distance(rho, sigma),
            Metric::Infidelity => Ok(1.0 - fidelity(rho, sigma)?),
        }
    }
}

/// Normalized states within `radius` of a center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingBall {
    pub metric: Metric,
    pub radius: f64,
}

impl SmoothingBall {
    pub fn new(metric: Metric, radius: f64) -> Result<Self> {
        check_eps(radius)?;
        Ok(Self { metric, radius })
    }

    pub fn trace(radius: f64) -> Result<Self> {
        Self::new(Metric::TraceDistance, radius)
    }

    pub fn infidelity(radius: f64) -> Result<Self> {
        Self::new(Metric::Infidelity, radius)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return domain_err(format!("smoothing parameter must lie in [0, 1), got {eps}"));
    }
    Ok(())
}

fn check_dims(rho: &State, sigma: &State) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return dim_err(format!("states have dims {} and {}", rho.dim(), sigma.dim()));
    }
    Ok(())
}

/// Numerical controls shared by the SDP quantities and bisection drivers.
#[derive(Clone, Copy, Debug)]
pub struct SdpConfig {
    pub solver: SolverSettings,
    /// `ε*` at or below this counts as an exact transformation.
    pub feasibility_tol: f64,
    /// Upper end of the `log2 M` search range.
    pub log_m_max: f64,
    /// Bisection stops once the bracket is this narrow.
    pub resolution: f64,
    /// Largest entrywise correction accepted when extracting a channel from a solver Choi matrix.
    pub channel_drift: f64,
}

impl Default for SdpConfig {
    fn default() -> Self {
        Self {
            solver: SolverSettings::configured(),
            feasibility_tol: 1e-8,
            log_m_max: 60.0,
            resolution: 1e-4,
            channel_drift: 1e-7,
        }
    }
}

/// Optimal values of a primal program and of its separately built and solved dual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub primal: f64,
    pub dual: f64,
    /// `|primal − dual|`.
    pub gap: f64,
    pub iterations: u32,
}

impl Certificate {
    fn from_pair(cfg: &SdpConfig, what: &str, p: &SolveResult, d: &SolveResult) -> Result<Self> {
        for (side, r) in [("primal", p), ("dual", d)] {
            if r.status != SolveStatus::Optimal {
                return Err(Error::Numerical(format!(
                    "{what}: {side} program ended with {} (objective {}, gap {:e}, residuals {:e}/{:e})",
                    r.solver_status, r.primal_value, r.gap, r.primal_residual, r.dual_residual
                )));
            }
        }
        let gap = (p.primal_value - d.primal_value).abs();
        let scale = p.primal_value.abs().max(d.primal_value.abs()).max(1.0);
        if !(gap <= cfg.solver.gap_tol * scale) {
            return Err(Error::Numerical(format!(
                "{what}: primal {} and dual {} disagree by {gap:e}",
                p.primal_value, d.primal_value
            )));
        }
        Ok(Self {
            primal: p.primal_value,
            dual: d.primal_value,
            gap,
            iterations: p.iterations + d.iterations,
        })
    }
}

fn solve_pair(cfg: &SdpConfig, primal: &ConicProgram, dual: &ConicProgram) -> (SolveResult, SolveResult) {
    (solve_with(primal, &cfg.solver), solve_with(dual, &cfg.solver))
}

fn certify(cfg: &SdpConfig, what: &str, primal: &ConicProgram, dual: &ConicProgram) -> Result<(SolveResult, Certificate)> {
    let (rp, rd) = solve_pair(cfg, primal, dual);
    let c = Certificate::from_pair(cfg, what, &rp, &rd)?;
    Ok((rp, c))
}

/// Trace distance computed as an SDP, with its optimal measurement operator.
#[derive(Clone, Debug)]
pub struct TraceDistanceSdp {
    pub value: f64,
    pub measurement: HermitianOperator,
    pub certificate: Certificate,
}

pub fn trace_distance_sdp(rho: &State, sigma: &State, cfg: &SdpConfig) -> Result<TraceDistanceSdp> {
    check_dims(rho, sigma)?;
    let (p, lam) = trace_distance_primal(rho, sigma);
    let (d, _) = trace_distance_dual(rho, sigma);
    let (rp, rd) = solve_pair(cfg, &p, &d);
    let certificate = Certificate::from_pair(cfg, "trace distance", &rp, &rd)?;
    Ok(TraceDistanceSdp { value: rp.primal_value, measurement: rp.hermitian(&lam), certificate })
}

/// Hypothesis-testing relative entropy and an optimal test.
#[derive(Clone, Debug)]
pub struct SmoothDmin {
    pub value: DivergenceValue,
    /// Optimal `Λ`, clipped into `[0, I]`.
    pub test: HermitianOperator,
    /// Absent when the value is infinite by a support argument.
    pub certificate: Option<Certificate>,
}

pub fn smooth_dmin(rho: &State, sigma: &State, eps: f64) -> Result<SmoothDmin> {
    smooth_dmin_with(rho, sigma, eps, &SdpConfig::default())
}

pub fn smooth_dmin_with(rho: &State, sigma: &State, eps: f64, cfg: &SdpConfig) -> Result<SmoothDmin> {
    check_dims(rho, sigma)?;
    check_eps(eps)?;
    // A test supported on ker σ with enough weight on ρ makes the value infinite.
    let kernel = &HermitianOperator::identity(rho.dim()) - &support_projector(sigma, DEFAULT_RANK_TOL)?;
    if kernel.trace_with(rho) >= 1.0 - eps - SUPPORT_LEAK_TOL {
        return Ok(SmoothDmin { value: DivergenceValue::Infinite, test: kernel, certificate: None });
    }
    let (beta, test, certificate) = if eps == 0.0 {
        // Tr[Λρ] ≥ 1 with Λ ≤ I pins Λ to Π_ρ on the support of ρ; without this
        // reduction the program has no strictly feasible point.
        let (supp, ker) = support_split(rho, DEFAULT_RANK_TOL)?;
        let pi_rho = HermitianOperator::new(&supp * supp.adjoint())?;
        if ker.ncols() == 0 {
            let v = pi_rho.trace_with(sigma);
            (v, pi_rho, Certificate { primal: v, dual: v, gap: 0.0, iterations: 0 })
        } else {
            let (p, lam) = dmin_face_primal(sigma, &pi_rho, &ker);
            let d = dmin_face_dual(sigma, &pi_rho, &ker);
            let (rp, c) = certify(cfg, "D_min face", &p, &d)?;
            let inner = eigh(&rp.hermitian(&lam))?.reconstruct_with(|x| x.clamp(0.0, 1.0));
            let lifted = HermitianOperator::new(&ker * inner.matrix() * ker.adjoint())?;
            (rp.primal_value, &pi_rho + &lifted, c)
        }
    } else {
        let (p, lam) = smooth_dmin_primal(rho, sigma, eps);
        let d = smooth_dmin_dual(rho, sigma, eps);
        let (rp, c) = certify(cfg, "smooth D_min", &p, &d)?;
        (rp.primal_value, eigh(&rp.hermitian(&lam))?.reconstruct_with(|x| x.clamp(0.0, 1.0)), c)
    };
    let value = if beta <= INFINITY_TOL { DivergenceValue::Infinite } else { DivergenceValue::Finite(-beta.log2()) };
    Ok(SmoothDmin { value, test, certificate: Some(certificate) })
}

/// Smoothed max-relative entropy and a minimizing state in the ball.
#[derive(Clone, Debug)]
pub struct SmoothDmax {
    pub value: DivergenceValue,
    pub smoothed: Option<State>,
    pub certificate: Option<Certificate>,
}

pub fn smooth_dmax(rho: &State, sigma: &State, ball: SmoothingBall) -> Result<SmoothDmax> {
    smooth_dmax_with(rho, sigma, ball, &SdpConfig::default())
}

pub fn smooth_dmax_with(rho: &State, sigma: &State, ball: SmoothingBall, cfg: &SdpConfig) -> Result<SmoothDmax> {
    check_dims(rho, sigma)?;
    check_eps(ball.radius)?;
    let eps = ball.radius;
    if eps == 0.0 {
        // Both balls shrink to {ρ}; solve D_max directly to avoid the empty interior.
        let (p, _) = dmax_primal(rho, sigma);
        let d = dmax_dual(rho, sigma);
        let rp = solve_with(&p, &cfg.solver);
        if rp.status == SolveStatus::Infeasible {
            return infinite_dmax(cfg, &d);
        }
        let certificate = Certificate::from_pair(cfg, "D_max", &rp, &solve_with(&d, &cfg.solver))?;
        return finish_dmax(rp.primal_value, rho.clone(), certificate);
    }
    if ball.metric == Metric::Infidelity {
        // The largest fidelity between ρ and a state on supp σ is Tr[Π_σ ρ],
        // attained by the normalized compression of ρ.
        let leak = 1.0 - support_projector(sigma, DEFAULT_RANK_TOL)?.trace_with(rho);
        if eps < leak - SUPPORT_LEAK_TOL {
            return Ok(SmoothDmax { value: DivergenceValue::Infinite, smoothed: None, certificate: None });
        }
    }
    let ((p, vars), d) = match ball.metric {
        Metric::TraceDistance => (smooth_dmax_trace_primal(rho, sigma, eps), smooth_dmax_trace_dual(rho, sigma, eps)),
        Metric::Infidelity => (smooth_dmax_fid_primal(rho, sigma, eps), smooth_dmax_fid_dual(rho, sigma, eps)),
    };
    let rp = solve_with(&p, &cfg.solver);
    if rp.status == SolveStatus::Infeasible {
        return infinite_dmax(cfg, &d);
    }
    let rd = solve_with(&d, &cfg.solver);
    if rp.status != SolveStatus::Optimal && rd.status == SolveStatus::Unbounded {
        // An unbounded dual certifies primal infeasibility on its own.
        return Ok(SmoothDmax { value: DivergenceValue::Infinite, smoothed: None, certificate: None });
    }
    let certificate = Certificate::from_pair(cfg, "smooth D_max", &rp, &rd)?;
    let smoothed = State::project(&vars.smoothed_value(&rp.x))?;
    let dist = ball.metric.distance(&smoothed, rho)?;
    if dist > eps + 1e-6 {
        return Err(Error::Numerical(format!("smooth D_max: returned state is {dist} from the center")));
    }
    finish_dmax(rp.primal_value, smoothed, certificate)
}

fn infinite_dmax(cfg: &SdpConfig, dual: &ConicProgram) -> Result<SmoothDmax> {
    // The dual must agree: unbounded above, or at least without a finite optimum.
    if solve_with(dual, &cfg.solver).status == SolveStatus::Optimal {
        return Err(Error::Numerical("smooth D_max: primal infeasible but dual has a finite optimum".into()));
    }
    Ok(SmoothDmax { value: DivergenceValue::Infinite, smoothed: None, certificate: None })
}

fn finish_dmax(lambda: f64, smoothed: State, certificate: Certificate) -> Result<SmoothDmax> {
    if !(lambda > 0.0) {
        return Err(Error::Numerical(format!("smooth D_max: non-positive optimal lambda {lambda}")));
    }
    Ok(SmoothDmax {
        value: DivergenceValue::Finite(lambda.log2().max(0.0)),
        smoothed: Some(smoothed),
        certificate: Some(certificate),
    })
}

/// Optimal approximate box transformation.
#[derive(Clone, Debug)]
pub struct BoxTransform {
    pub error: f64,
    pub channel: Channel,
    pub certificate: Certificate,
}

pub fn box_transform_error(source: &StateBox, target: &StateBox) -> Result<BoxTransform> {
    box_transform_error_with(source, target, &SdpConfig::default())
}

pub fn box_transform_error_with(source: &StateBox, target: &StateBox, cfg: &SdpConfig) -> Result<BoxTransform> {
    let (rho, sigma, tau, omega) = (&source.first, &source.second, &target.first, &target.second);
    let face = box_transform_face(sigma, omega)?;
    let (p, vars) = box_transform_primal(rho, sigma, tau, omega, face.as_ref());
    let d = box_transform_dual(rho, sigma, tau, omega, face.as_ref());
    let (rp, rd) = solve_pair(cfg, &p, &d);
    let certificate = Certificate::from_pair(cfg, "box transformation", &rp, &rd)?;
    let channel = Channel::from_choi_repaired(vars.dim_in, vars.dim_out, &vars.choi_value(&rp.x), cfg.channel_drift)?;
    Ok(BoxTransform { error: rp.primal_value.clamp(0.0, 1.0), channel, certificate })
}

pub fn exact_transform_feasible(source: &StateBox, target: &StateBox, tol: f64) -> Result<bool> {
    let cfg = SdpConfig { feasibility_tol: tol, ..SdpConfig::default() };
    Ok(box_transform_error_with(source, target, &cfg)?.error <= tol)
}

/// `sup log2 M` such that `pred(log2 M)` holds, over `[0, log_m_max]`.
/// `pred(0)` is assumed true; returns `None` when `pred(log_m_max)` also holds.
///
/// The bracket is grown from 1 bit by doubling before bisecting, so that
/// small values never require solves at large `M`, where `π_M` is nearly
/// singular.
fn bisect_sup(cfg: &SdpConfig, mut pred: impl FnMut(f64) -> Result<bool>) -> Result<Option<f64>> {
    if pred(cfg.log_m_max)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, cfg.log_m_max.min(1.0));
    while hi < cfg.log_m_max && pred(hi)? {
        lo = hi;
        hi = (2.0 * hi).min(cfg.log_m_max);
    }
    while hi - lo > cfg.resolution {
        let (mid, ok) = split(&mut pred, lo, hi)?;
        if ok {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Evaluates `pred` inside `(lo, hi)`, at the midpoint first. Points where the
/// programs cannot be certified (typically right at the feasibility threshold,
/// where the dual multipliers blow up) are skipped in favour of nearby ones.
fn split(pred: &mut impl FnMut(f64) -> Result<bool>, lo: f64, hi: f64) -> Result<(f64, bool)> {
    let mut first_err = None;
    for t in [0.5, 0.4, 0.6, 0.3, 0.7] {
        let x = lo + t * (hi - lo);
        match pred(x) {
            Ok(v) => return Ok((x, v)),
            Err(Error::Numerical(msg)) => {
                first_err.get_or_insert(Error::Numerical(msg));
            }
            Err(e) => return Err(e),
        }
    }
    Err(first_err.expect("at least one point tried"))
}

/// `inf log2 M` such that `pred(log2 M)` holds. `None` when even `log_m_max`
/// fails. Same bracketing as [`bisect_sup`].
fn bisect_inf(cfg: &SdpConfig, mut pred: impl FnMut(f64) -> Result<bool>) -> Result<Option<f64>> {
    if !pred(cfg.log_m_max)? {
        return Ok(None);
    }
    if pred(0.0)? {
        return Ok(Some(0.0));
    }
    let (mut lo, mut hi) = (0.0, cfg.log_m_max.min(1.0));
    while hi < cfg.log_m_max && !pred(hi)? {
        lo = hi;
        hi = (2.0 * hi).min(cfg.log_m_max);
    }
    while hi - lo > cfg.resolution {
        let (mid, ok) = split(&mut pred, lo, hi)?;
        if ok {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

fn distill_error(b: &StateBox, log_m: f64, cfg: &SdpConfig) -> Result<f64> {
    Ok(box_transform_error_with(b, &StateBox::bits(log_m)?, cfg)?.error)
}

fn dilute_error(b: &StateBox, log_m: f64, cfg: &SdpConfig) -> Result<f64> {
    Ok(box_transform_error_with(&StateBox::bits(log_m)?, b, cfg)?.error)
}

/// `lim_{M→∞} ε((|0⟩⟨0|, π_M) → b)`.
///
/// For `log2 M` beyond roughly 30 bits, `π_M` cannot be told apart from
/// `|1⟩⟨1|` at solver precision, so the finite-`M` program cannot decide
/// whether a cost is infinite. The limit is well posed: the first output may
/// be any state supported on `supp ω`.
pub fn unbounded_bits_error(b: &StateBox, cfg: &SdpConfig) -> Result<f64> {
    let (supp, _) = support_split(&b.second, DEFAULT_RANK_TOL)?;
    let p = supported_approx_primal(&b.first, &supp).0;
    let d = supported_approx_dual(&b.first, &supp);
    Ok(certify(cfg, "unbounded-bits limit", &p, &d)?.0.primal_value.clamp(0.0, 1.0))
}

/// Largest `log2 M` reachable exactly from `b`, found by channel search.
pub fn distillable_exact(b: &StateBox) -> Result<DivergenceValue> {
    distillable_exact_with(b, &SdpConfig::default())
}

pub fn distillable_exact_with(b: &StateBox, cfg: &SdpConfig) -> Result<DivergenceValue> {
    let orth = box_transform_error_with(b, &StateBox::orthogonal_bits(), cfg)?.error;
    if orth <= cfg.feasibility_tol {
        return Ok(DivergenceValue::Infinite);
    }
    let sup = bisect_sup(cfg, |m| Ok(distill_error(b, m, cfg)? <= cfg.feasibility_tol))?;
    Ok(sup.map_or(DivergenceValue::Infinite, DivergenceValue::Finite))
}

/// Largest `log2 M` reachable from `b` within error `eps`, found by channel search.
pub fn distillable_approx(b: &StateBox, eps: f64) -> Result<DivergenceValue> {
    distillable_approx_with(b, eps, &SdpConfig::default())
}

pub fn distillable_approx_with(b: &StateBox, eps: f64, cfg: &SdpConfig) -> Result<DivergenceValue> {
    check_eps(eps)?;
    let thr = eps + cfg.feasibility_tol;
    let orth = box_transform_error_with(b, &StateBox::orthogonal_bits(), cfg)?.error;
    if orth <= thr {
        return Ok(DivergenceValue::Infinite);
    }
    let sup = bisect_sup(cfg, |m| Ok(distill_error(b, m, cfg)? <= thr))?;
    Ok(sup.map_or(DivergenceValue::Infinite, DivergenceValue::Finite))
}

/// Smallest `log2 M` from which `b` is produced exactly.
pub fn cost_exact(b: &StateBox) -> Result<DivergenceValue> {
    cost_exact_with(b, &SdpConfig::default())
}

pub fn cost_exact_with(b: &StateBox, cfg: &SdpConfig) -> Result<DivergenceValue> {
    if unbounded_bits_error(b, cfg)? > cfg.feasibility_tol {
        return Ok(DivergenceValue::Infinite);
    }
    let inf = bisect_inf(cfg, |m| Ok(dilute_error(b, m, cfg)? <= cfg.feasibility_tol))?;
    Ok(inf.map_or(DivergenceValue::Infinite, DivergenceValue::Finite))
}

/// Smallest `log2 M` from which `b` is produced within trace-distance error `eps`.
pub fn cost_approx(b: &StateBox, eps: f64) -> Result<DivergenceValue> {
    cost_approx_with(b, eps, &SdpConfig::default())
}

pub fn cost_approx_with(b: &StateBox, eps: f64, cfg: &SdpConfig) -> Result<DivergenceValue> {
    check_eps(eps)?;
    let thr = eps + cfg.feasibility_tol;
    if unbounded_bits_error(b, cfg)? > thr {
        return Ok(DivergenceValue::Infinite);
    }
    let inf = bisect_inf(cfg, |m| Ok(dilute_error(b, m, cfg)? <= thr))?;
    Ok(inf.map_or(DivergenceValue::Infinite, DivergenceValue::Finite))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::{d_max, d_min};
    use crate::testkit::{InstanceStream, Seed};

    fn cfg() -> SdpConfig {
        SdpConfig::default()
    }

    #[test]
    fn trace_distance_orthogonal_is_one() {
        let r = trace_distance_sdp(&State::basis(2, 0), &State::basis(2, 1), &cfg()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn trace_distance_matches_eigen_value() {
        let mut s = InstanceStream::new(Seed(11));
        for _ in 0..10 {
            let (a, b) = (s.state(3, 3), s.state(3, 2));
            let r = trace_distance_sdp(&a, &b, &cfg()).unwrap();
            assert!((r.value - trace_distance(&a, &b).unwrap()).abs() < 1e-8);
            assert!(r.certificate.gap <= 1e-7);
        }
    }

    #[test]
    fn smooth_dmin_bit_anchor() {
        let r = smooth_dmin(&State::basis(2, 0), &State::pi_m(4.0).unwrap(), 0.5).unwrap();
        assert!((r.value.to_f64() - 3.0).abs() < 1e-6, "{:?}", r.value);
    }

    #[test]
    fn smooth_dmin_zero_eps_is_dmin() {
        let mut s = InstanceStream::new(Seed(5));
        for _ in 0..5 {
            let b = s.state_box(3, false);
            let r = smooth_dmin(&b.first, &b.second, 0.0).unwrap();
            let exact = d_min(&b.first, &b.second).unwrap().to_f64();
            assert!((r.value.to_f64() - exact).abs() < 1e-6, "{} vs {exact}", r.value);
        }
    }

    #[test]
    fn smooth_dmin_orthogonal_is_infinite() {
        let r = smooth_dmin(&State::basis(2, 0), &State::basis(2, 1), 0.1).unwrap();
        assert_eq!(r.value, DivergenceValue::Infinite);
    }

    #[test]
    fn smooth_dmax_limits() {
        let mut s = InstanceStream::new(Seed(9));
        for _ in 0..5 {
            let b = s.state_box(2, true);
            let r = smooth_dmax(&b.first, &b.second, SmoothingBall::trace(0.0).unwrap()).unwrap();
            let exact = d_max(&b.first, &b.second).unwrap().to_f64();
            assert!((r.value.to_f64() - exact).abs() < 1e-6, "{} vs {exact}", r.value);
            let f = smooth_dmax(&b.first, &b.second, SmoothingBall::infidelity(0.0).unwrap()).unwrap();
            assert!((f.value.to_f64() - exact).abs() < 1e-5, "{} vs {exact}", f.value);
        }
        let rho = State::maximally_mixed(3);
        for metric in [Metric::TraceDistance, Metric::Infidelity] {
            let r = smooth_dmax(&rho, &rho, SmoothingBall::new(metric, 0.3).unwrap()).unwrap();
            assert!(r.value.to_f64().abs() < 1e-7);
        }
    }

    #[test]
    fn smooth_dmax_support_obstruction() {
        let r = smooth_dmax(&State::basis(2, 0), &State::basis(2, 1), SmoothingBall::trace(0.5).unwrap()).unwrap();
        assert_eq!(r.value, DivergenceValue::Infinite);
        let r = smooth_dmax(&State::basis(2, 0), &State::basis(2, 1), SmoothingBall::infidelity(0.5).unwrap()).unwrap();
        assert_eq!(r.value, DivergenceValue::Infinite);
    }

    #[test]
    fn smooth_dmax_ball_reaches_support() {
        // The only state on supp σ is |0⟩, at trace distance and infidelity 0.3.
        let rho = State::from_diagonal(&[0.7, 0.3]).unwrap();
        let sigma = State::basis(2, 0);
        for ball in [SmoothingBall::trace(0.29).unwrap(), SmoothingBall::infidelity(0.29).unwrap()] {
            assert_eq!(smooth_dmax(&rho, &sigma, ball).unwrap().value, DivergenceValue::Infinite);
        }
        for ball in [SmoothingBall::trace(0.31).unwrap(), SmoothingBall::infidelity(0.31).unwrap()] {
            let r = smooth_dmax(&rho, &sigma, ball).unwrap();
            assert!(r.value.to_f64().abs() < 1e-7, "{:?}", r.value);
        }
    }

    #[test]
    fn box_error_bits() {
        let r = box_transform_error(&StateBox::bits(1.0).unwrap(), &StateBox::bits(2.0).unwrap()).unwrap();
        assert!((r.error - 0.5).abs() < 1e-6);
        assert!(r.certificate.gap <= 1e-7);
        let same = box_transform_error(&StateBox::bits(1.0).unwrap(), &StateBox::bits(1.0).unwrap()).unwrap();
        assert!(same.error.abs() < 1e-7);
    }

    #[test]
    fn extracted_channel_reproduces_error() {
        let mut s = InstanceStream::new(Seed(21));
        let src = s.state_box(3, true);
        let tgt = s.state_box(2, true);
        let r = box_transform_error(&src, &tgt).unwrap();
        let out_rho = r.channel.apply(&src.first).unwrap();
        let out_sigma = r.channel.apply(&src.second).unwrap();
        assert!((trace_distance(&out_rho, &tgt.first).unwrap() - r.error).abs() < 1e-6);
        assert!(out_sigma.max_abs_diff(&tgt.second) < 1e-6);
    }

    #[test]
    fn operational_exact_matches_entropic_on_bits() {
        let b = StateBox::new(State::basis(2, 0), State::maximally_mixed(2)).unwrap();
        assert!((distillable_exact(&b).unwrap().to_f64() - 1.0).abs() < 1e-3);
        assert!((cost_exact(&b).unwrap().to_f64() - 1.0).abs() < 1e-3);
        let same = StateBox::new(State::maximally_mixed(2), State::maximally_mixed(2)).unwrap();
        assert!(distillable_exact(&same).unwrap().to_f64().abs() < 1e-3);
        assert!(cost_exact(&same).unwrap().to_f64().abs() < 1e-3);
    }

    #[test]
    fn infinite_operational_values() {
        let orth = StateBox::orthogonal_bits();
        assert_eq!(distillable_exact(&orth).unwrap(), DivergenceValue::Infinite);
        assert_eq!(cost_exact(&orth).unwrap(), DivergenceValue::Infinite);
    }

    #[test]
    fn rejects_bad_eps() {
        assert!(SmoothingBall::trace(1.0).unwrap_err().is_domain());
        assert!(smooth_dmin(&State::basis(2, 0), &State::basis(2, 0), -0.1).is_err());
    }
}
