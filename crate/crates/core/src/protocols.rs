//! Explicit distillation, dilution and bit-standardization channels, and
//! replay of a channel on a box.

use serde::Serialize;

use crate::divergences::{INFINITY_TOL, d_max, d_min};
use crate::error::{Result, dim_err, domain_err};
use crate::linalg::{CMat, Channel, DEFAULT_RANK_TOL, HermitianOperator, State, StateBox, support_projector};
use crate::sdp::{Metric, SmoothingBall, smooth_dmax, smooth_dmin};

/// Relative margin added to `2^λ` before forming the dilution state.
pub const DILUTION_MARGIN: f64 = 1e-12;

/// `m` bits of asymmetric distinguishability, `(|0⟩⟨0|, π_{2^m})` for real `m ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BitsBox {
    m: f64,
}

impl BitsBox {
    pub fn new(m: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return domain_err(format!("bit count must be finite and nonnegative, got {m}"));
        }
        Ok(Self { m })
    }

    pub fn bits(&self) -> f64 {
        self.m
    }

    /// `M = 2^m`.
    pub fn size(&self) -> f64 {
        self.m.exp2()
    }

    pub fn to_box(&self) -> StateBox {
        StateBox::bits(self.m).expect("validated bit count")
    }

    /// `(|0⟩⟨0|^{⊗m}, π^{⊗m})` on `m` qubits.
    pub fn tensor_form(m: usize) -> Result<StateBox> {
        if m == 0 {
            return domain_err("tensor form needs at least one qubit");
        }
        let one = StateBox { first: State::basis(2, 0), second: State::maximally_mixed(2) };
        Ok(one.tensor_power(m))
    }
}

/// What a channel achieves on a box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProtocolReport {
    /// Distance from `N(ρ)` to `τ` in the chosen metric.
    pub first_state_error: f64,
    /// `max_ij |N(σ) − ω|_ij`.
    pub second_state_residual: f64,
    /// `D_max` of the source box. For a bit box this is its bit count.
    pub bits_in: f64,
    /// `D_min` of the target box. For a bit box this is its bit count.
    pub bits_out: f64,
}

/// Result of a distillation construction.
#[derive(Clone, Debug)]
pub enum Distillation {
    /// The channel and the size `M` of the produced `π_M`.
    Channel { channel: Channel, m: f64 },
    /// `ρ` and `σ` are orthogonal, so any number of bits can be extracted.
    InfiniteDistinguishability,
}

impl Distillation {
    pub fn bits(&self) -> f64 {
        match self {
            Distillation::Channel { m, .. } => m.log2(),
            Distillation::InfiniteDistinguishability => f64::INFINITY,
        }
    }
}

/// Result of a dilution construction.
#[derive(Clone, Debug)]
pub enum Dilution {
    /// The channel and `λ`, the bits it consumes.
    Channel { channel: Channel, lambda: f64 },
    /// The support of `ρ` leaves that of `σ`; no finite number of bits suffices.
    InfiniteCost,
}

impl Dilution {
    pub fn bits(&self) -> f64 {
        match self {
            Dilution::Channel { lambda, .. } => *lambda,
            Dilution::InfiniteCost => f64::INFINITY,
        }
    }
}

fn check_same_dim(rho: &State, sigma: &State) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return dim_err(format!("states have dims {} and {}", rho.dim(), sigma.dim()));
    }
    Ok(())
}

/// `ω ↦ Tr[Λω]|0⟩⟨0| + Tr[(I−Λ)ω]|1⟩⟨1|`.
fn binary_test_channel(test: &HermitianOperator) -> Result<Channel> {
    let rest = &HermitianOperator::identity(test.dim()) - test;
    Channel::measure_prepare(&[test.clone(), rest], &[State::basis(2, 0), State::basis(2, 1)])
}

/// The measurement `{Π_ρ, I − Π_ρ}` with outcomes recorded in a qubit.
/// Maps `ρ ↦ |0⟩⟨0|` and `σ ↦ π_M` with `M = 1/Tr[Π_ρ σ]`.
pub fn exact_distill_channel(rho: &State, sigma: &State) -> Result<Distillation> {
    check_same_dim(rho, sigma)?;
    let pi_rho = support_projector(rho, DEFAULT_RANK_TOL)?;
    let overlap = pi_rho.trace_with(sigma);
    if overlap <= INFINITY_TOL {
        return Ok(Distillation::InfiniteDistinguishability);
    }
    let channel = binary_test_channel(&pi_rho)?;
    Ok(Distillation::Channel { channel, m: 1.0 / overlap.min(1.0) })
}

/// `τ ↦ ⟨0|τ|0⟩ρ + ⟨1|τ|1⟩ω` with `ω = (2^λσ − ρ)/(2^λ − 1)` and `λ = D_max(ρ‖σ)`.
/// Maps `|0⟩⟨0| ↦ ρ` and `π_{2^λ} ↦ σ`.
pub fn exact_dilute_channel(rho: &State, sigma: &State) -> Result<Dilution> {
    check_same_dim(rho, sigma)?;
    let Some(lambda) = d_max(rho, sigma)?.finite() else {
        return Ok(Dilution::InfiniteCost);
    };
    if lambda <= DILUTION_MARGIN {
        return Ok(Dilution::Channel { channel: Channel::replacer(2, rho), lambda: 0.0 });
    }
    let k = lambda.exp2() * (1.0 + DILUTION_MARGIN);
    let omega = State::project(&(&sigma.operator().scale(k) - rho.operator()).scale(1.0 / (k - 1.0)))?;
    let channel = Channel::measure_prepare(
        &[HermitianOperator::basis_projector(2, 0), HermitianOperator::basis_projector(2, 1)],
        &[rho.clone(), omega],
    )?;
    Ok(Dilution::Channel { channel, lambda: k.log2() })
}

/// Distillation with error: the binary measurement built from the optimal
/// hypothesis test of `D_min^ε(ρ‖σ)`.
#[derive(Clone, Debug)]
pub struct ApproxDistillation {
    pub outcome: Distillation,
    /// `Tr[(I − Λ)ρ]`, the trace distance from `N(ρ)` to `|0⟩⟨0|`.
    pub first_state_error: f64,
}

pub fn approx_distill_channel(rho: &State, sigma: &State, eps: f64) -> Result<ApproxDistillation> {
    check_same_dim(rho, sigma)?;
    let sd = smooth_dmin(rho, sigma, eps)?;
    let test = sd.test;
    let first_state_error = (1.0 - test.trace_with(rho)).max(0.0);
    let overlap = test.trace_with(sigma);
    if !sd.value.is_finite() || overlap <= INFINITY_TOL {
        return Ok(ApproxDistillation { outcome: Distillation::InfiniteDistinguishability, first_state_error });
    }
    let channel = binary_test_channel(&test)?;
    Ok(ApproxDistillation { outcome: Distillation::Channel { channel, m: 1.0 / overlap.min(1.0) }, first_state_error })
}

/// Direction of [`standardize_bits`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BitsDirection {
    /// `m` qubits to one qubit: `(|0⟩⟨0|^{⊗m}, π^{⊗m}) → (|0⟩⟨0|, π_{2^m})`.
    Compress,
    /// One qubit to `m` qubits, the reverse.
    Expand,
}

/// Conversion between the tensor-power and single-qubit forms of `m` bits.
pub fn standardize_bits(direction: BitsDirection, m: usize) -> Result<Channel> {
    if m == 0 {
        return domain_err("bit standardization needs m >= 1");
    }
    let d = 1usize << m;
    let p0 = HermitianOperator::basis_projector(d, 0);
    let rest = &HermitianOperator::identity(d) - &p0;
    match direction {
        BitsDirection::Compress => binary_test_channel(&p0),
        BitsDirection::Expand => Channel::measure_prepare(
            &[HermitianOperator::basis_projector(2, 0), HermitianOperator::basis_projector(2, 1)],
            &[State::basis(d, 0), State::new(rest.scale(1.0 / (d - 1) as f64))?],
        ),
    }
}

/// `T^m(ω) = ⟨0|ω|0⟩|0⟩⟨0| + ⟨1|ω|1⟩π_{2^m}`, sending `(|0⟩⟨0|, |1⟩⟨1|)` to `m` bits.
pub fn orthogonal_to_bits_channel(m: f64) -> Result<Channel> {
    let target = BitsBox::new(m)?.to_box();
    Channel::measure_prepare(
        &[HermitianOperator::basis_projector(2, 0), HermitianOperator::basis_projector(2, 1)],
        &[target.first, target.second],
    )
}

/// Left inverse of the isometric channel `ρ ↦ UρU†`:
/// `θ ↦ U†θU + Tr[(I − UU†)θ] τ`.
pub fn isometry_inverter(u: &CMat, tau: &State) -> Result<Channel> {
    let (dout, din) = (u.nrows(), u.ncols());
    if tau.dim() != din {
        return dim_err(format!("fallback state has dim {}, isometry input dim is {din}", tau.dim()));
    }
    let dev = (u.adjoint() * u - CMat::identity(din, din)).norm();
    if !(dev <= 1e-10) {
        return domain_err(format!("matrix is not an isometry (deviation {dev:e})"));
    }
    let leak = CMat::identity(dout, dout) - u * u.adjoint();
    let t = tau.matrix().clone();
    Channel::from_linear_map(dout, din, |x| u.adjoint() * x * u + &t * (&leak * x).trace())
}

/// Runs `N` on the source box and compares with the target box.
pub fn replay(n: &Channel, source: &StateBox, target: &StateBox, metric: Metric) -> Result<ProtocolReport> {
    if n.dim_in() != source.dim() || n.dim_out() != target.dim() {
        return dim_err(format!(
            "channel is {}->{}, boxes have dims {} and {}",
            n.dim_in(),
            n.dim_out(),
            source.dim(),
            target.dim()
        ));
    }
    let out_first = n.apply(&source.first)?;
    let out_second = n.apply_operator(&source.second)?;
    Ok(ProtocolReport {
        first_state_error: metric.distance(&out_first, &target.first)?.max(0.0),
        second_state_residual: out_second.max_abs_diff(&target.second),
        bits_in: d_max(&source.first, &source.second)?.to_f64(),
        bits_out: d_min(&target.first, &target.second)?.to_f64(),
    })
}

/// Dilution to the smoothed box followed by approximate distillation.
#[derive(Clone, Debug, Serialize)]
pub struct BridgeReport {
    pub eps1: f64,
    pub eps2: f64,
    /// The composite channel replayed from `(|0⟩⟨0|, π_M)` to `(|0⟩⟨0|, π_K)`.
    /// `bits_in = log2 M = D_max^{ε₂}`, `bits_out = log2 K = D_min^{ε₁}`.
    pub report: ProtocolReport,
    /// `log2 M + log2(1/(1−ε₁−ε₂)) − log2 K`.
    pub margin: f64,
    /// Set when an infinite operand made the bound hold trivially.
    pub vacuous: bool,
}

pub fn bridge_protocol(rho: &State, sigma: &State, eps1: f64, eps2: f64) -> Result<BridgeReport> {
    check_same_dim(rho, sigma)?;
    if !(eps1 >= 0.0 && eps2 >= 0.0 && eps1 + eps2 < 1.0) {
        return domain_err(format!("bridge needs eps1, eps2 >= 0 with eps1 + eps2 < 1, got {eps1}, {eps2}"));
    }
    let slack = -(1.0 - eps1 - eps2).log2();
    let vacuous = |bits_in: f64, bits_out: f64| BridgeReport {
        eps1,
        eps2,
        report: ProtocolReport { first_state_error: 0.0, second_state_residual: 0.0, bits_in, bits_out },
        margin: f64::INFINITY,
        vacuous: true,
    };
    let sd = smooth_dmax(rho, sigma, SmoothingBall::trace(eps2)?)?;
    let Some(smoothed) = sd.smoothed else {
        return Ok(vacuous(f64::INFINITY, smooth_dmin(rho, sigma, eps1)?.value.to_f64()));
    };
    let dilute = match exact_dilute_channel(&smoothed, sigma)? {
        Dilution::Channel { channel, lambda } => (channel, lambda),
        Dilution::InfiniteCost => return Ok(vacuous(f64::INFINITY, smooth_dmin(rho, sigma, eps1)?.value.to_f64())),
    };
    let distill = approx_distill_channel(rho, sigma, eps1)?;
    let (channel, k) = match distill.outcome {
        Distillation::Channel { channel, m } => (channel, m),
        Distillation::InfiniteDistinguishability => return Ok(vacuous(dilute.1, f64::INFINITY)),
    };
    let composite = channel.compose(&dilute.0)?;
    let source = BitsBox::new(dilute.1)?.to_box();
    let target = StateBox { first: State::basis(2, 0), second: State::pi_m(k)? };
    let report = replay(&composite, &source, &target, Metric::TraceDistance)?;
    let report = ProtocolReport { bits_in: dilute.1, bits_out: k.log2(), ..report };
    Ok(BridgeReport { eps1, eps2, margin: report.bits_in + slack - report.bits_out, report, vacuous: false })
}

/// Distills `(ρ, σ)` exactly to bits, then dilutes those bits back with the
/// exact dilution channel for `(ρ, σ)`. Returns the larger of the two
/// trace distances to the original box, or `None` when either step is
/// infinite.
///
/// Zero when `D_min = D_max`; otherwise the bits obtained are fewer than the
/// dilution consumes and the second state comes back wrong.
pub fn distill_dilute_round_trip(b: &StateBox) -> Result<Option<f64>> {
    let Distillation::Channel { channel: distill, .. } = exact_distill_channel(&b.first, &b.second)? else {
        return Ok(None);
    };
    let Dilution::Channel { channel: dilute, .. } = exact_dilute_channel(&b.first, &b.second)? else {
        return Ok(None);
    };
    let round = dilute.compose(&distill)?;
    let first = Metric::TraceDistance.distance(&round.apply(&b.first)?, &b.first)?;
    let second = Metric::TraceDistance.distance(&round.apply(&b.second)?, &b.second)?;
    Ok(Some(first.max(second)))
}
