use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::bounds::*;
use crate::divergences::{
    DivergenceValue, RenyiOrder, d_max, d_min, fidelity, petz_renyi, rel_entropy, sandwiched_renyi, trace_distance,
};
use crate::error::{Error, Result};
use crate::linalg::{Channel, State, StateBox};
use crate::sdp::box_transform_error;
use crate::testkit::{InstanceStream, Seed};

/// Petz orders for the data-processing suite.
pub const DP_PETZ_ALPHAS: [f64; 4] = [0.3, 0.7, 1.5, 2.0];
/// Sandwiched orders for the data-processing suite.
pub const DP_SANDWICHED_ALPHAS: [f64; 4] = [0.5, 0.8, 1.5, 3.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Bridge,
    Infidelity,
    Dp,
    PseudoContinuity,
    StrongConverse,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Bridge, Suite::Infidelity, Suite::Dp, Suite::PseudoContinuity, Suite::StrongConverse];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Bridge => "bridge",
            Suite::Infidelity => "infidelity",
            Suite::Dp => "dp",
            Suite::PseudoContinuity => "pseudo-continuity",
            Suite::StrongConverse => "strong-converse",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown suite '{s}'")))
    }
}

/// One generated instance with the checks evaluated on it.
#[derive(Clone, Debug)]
pub struct InstanceReport {
    pub index: usize,
    pub seed: Seed,
    pub description: String,
    /// Named inputs, enough to replay the instance.
    pub states: Vec<(String, State)>,
    pub channel: Option<Channel>,
    pub checks: Vec<InequalityCheck>,
    /// Set when evaluation failed; such an instance counts as failed.
    pub error: Option<String>,
}

impl InstanceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passes(tol))
    }
}

#[derive(Clone, Debug)]
pub struct BatteryReport {
    pub suite: Suite,
    pub seed: Seed,
    pub tolerance: f64,
    pub instances: Vec<InstanceReport>,
}

impl BatteryReport {
    pub fn checks(&self) -> impl Iterator<Item = &InequalityCheck> {
        self.instances.iter().flat_map(|i| i.checks.iter())
    }

    pub fn check_count(&self) -> usize {
        self.checks().count()
    }

    pub fn vacuous_count(&self) -> usize {
        self.checks().filter(|c| c.vacuous).count()
    }

    /// Smallest non-vacuous margin.
    pub fn min_margin(&self) -> f64 {
        self.checks().filter(|c| !c.vacuous).map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn failed(&self) -> Vec<&InstanceReport> {
        self.instances.iter().filter(|i| !i.passes(self.tolerance)).collect()
    }

    pub fn passed(&self) -> bool {
        self.failed().is_empty()
    }
}

/// Runs `count` seeded instances of a suite. Instances are independent and
/// evaluated in parallel; the report is ordered by instance index, so it does
/// not depend on scheduling.
pub fn run_battery(suite: Suite, seed: Seed, count: usize) -> BatteryReport {
    let instances =
        (0..count).into_par_iter().map(|i| run_instance(suite, i, seed.derive(i as u64))).collect::<Vec<_>>();
    BatteryReport { suite, seed, tolerance: BATTERY_TOL, instances }
}

/// Regenerates and evaluates a single instance.
pub fn run_instance(suite: Suite, index: usize, seed: Seed) -> InstanceReport {
    let mut s = InstanceStream::new(seed);
    let generated = match suite {
        Suite::Bridge | Suite::Infidelity => pair_instance(&mut s, index),
        Suite::Dp => dp_instance(&mut s, index),
        Suite::PseudoContinuity => triple_instance(&mut s, index),
        Suite::StrongConverse => protocol_instance(&mut s, index),
    };
    let mut report = InstanceReport {
        index,
        seed,
        description: generated.description,
        states: generated.states,
        channel: generated.channel,
        checks: Vec::new(),
        error: None,
    };
    match evaluate(suite, &report) {
        Ok(checks) => report.checks = checks,
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

struct Generated {
    description: String,
    states: Vec<(String, State)>,
    channel: Option<Channel>,
}

fn named(pairs: Vec<(&str, State)>) -> Vec<(String, State)> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// A random pair in dimension 2 or 3, cycling through full-rank, low-rank
/// first state, commuting, nearly equal, and rank-deficient second state.
fn random_pair(s: &mut InstanceStream, index: usize) -> (String, State, State) {
    let dim = 2 + index % 2;
    match (index / 2) % 5 {
        0 => ("full rank".into(), s.state(dim, dim), s.state(dim, dim)),
        1 => {
            let r = 1 + s.index(dim - 1);
            (format!("rank-{r} first state"), s.state(dim, r), s.state(dim, dim))
        }
        2 => ("commuting".into(), s.diagonal_state(dim), s.diagonal_state(dim)),
        3 => {
            let w = s.uniform_range(0.02, 0.3);
            let b = s.mixed_box(dim, w);
            (format!("mixed with weight {w:.3}"), b.first, b.second)
        }
        _ => {
            let r = 1 + s.index(dim - 1);
            (format!("rank-{r} second state"), s.state(dim, dim), s.state(dim, r))
        }
    }
}

fn pair_instance(s: &mut InstanceStream, index: usize) -> Generated {
    let (kind, rho, sigma) = random_pair(s, index);
    Generated {
        description: format!("dim {} {kind}", rho.dim()),
        states: named(vec![("rho", rho), ("sigma", sigma)]),
        channel: None,
    }
}

fn dp_instance(s: &mut InstanceStream, index: usize) -> Generated {
    let (kind, rho, sigma) = random_pair(s, index);
    let din = rho.dim();
    let dout = 2 + s.index(2);
    let env = (1 + s.index(3)).max(din.div_ceil(dout));
    let channel = s.channel(din, dout, env);
    Generated {
        description: format!("dim {din} {kind}, channel to dim {dout} with environment {env}"),
        states: named(vec![("rho", rho), ("sigma", sigma)]),
        channel: Some(channel),
    }
}

fn triple_instance(s: &mut InstanceStream, index: usize) -> Generated {
    let dim = 2 + index % 2;
    let sigma = s.state(dim, dim);
    let r0 = 1 + s.index(dim);
    let rho0 = s.state(dim, r0);
    let (kind, rho1) = match (index / 2) % 3 {
        0 => {
            let r1 = 1 + s.index(dim);
            ("independent".to_string(), s.state(dim, r1))
        }
        1 => {
            let t = s.uniform_range(0.0, 0.2);
            let other = s.state(dim, dim);
            let mix = &rho0.operator().scale(1.0 - t) + &other.operator().scale(t);
            (format!("perturbed by {t:.3}"), State::project(&mix).expect("convex mixture"))
        }
        _ => ("pure".to_string(), s.pure_state(dim)),
    };
    Generated {
        description: format!("dim {dim}, second state {kind}"),
        states: named(vec![("rho0", rho0), ("rho1", rho1), ("sigma", sigma)]),
        channel: None,
    }
}

/// Copy counts `(n, m)` of the protocols searched; Choi dimension stays at most 8.
pub const PROTOCOL_SHAPES: [(usize, usize); 3] = [(1, 1), (1, 2), (2, 1)];

fn protocol_instance(s: &mut InstanceStream, index: usize) -> Generated {
    let (n, m) = PROTOCOL_SHAPES[index % 3];
    let source = if (index / 3) % 2 == 0 { s.state_box(2, true) } else { s.mixed_box(2, 0.05) };
    let (kind, target) = if (index / 6) % 2 == 0 {
        let bits = s.uniform_range(0.2, 2.0);
        (format!("{bits:.3} bits"), StateBox::bits(bits).expect("nonnegative"))
    } else {
        ("random qubit box".to_string(), s.mixed_box(2, 0.1))
    };
    Generated {
        description: format!("n={n} m={m} qubit source to {kind}"),
        states: named(vec![
            ("rho", source.first),
            ("sigma", source.second),
            ("tau", target.first),
            ("omega", target.second),
        ]),
        channel: None,
    }
}

fn state<'a>(r: &'a InstanceReport, name: &str) -> &'a State {
    &r.states.iter().find(|(k, _)| k == name).expect("generated state").1
}

fn evaluate(suite: Suite, r: &InstanceReport) -> Result<Vec<InequalityCheck>> {
    match suite {
        Suite::Bridge => bridge_bounds(state(r, "rho"), state(r, "sigma"), &BridgeParams::default()),
        Suite::Infidelity => infidelity_bounds(state(r, "rho"), state(r, "sigma"), &InfidelityParams::default()),
        Suite::Dp => dp_checks(state(r, "rho"), state(r, "sigma"), r.channel.as_ref().expect("dp instance has a channel")),
        Suite::PseudoContinuity => triple_checks(state(r, "rho0"), state(r, "rho1"), state(r, "sigma")),
        Suite::StrongConverse => {
            let source = StateBox::new(state(r, "rho").clone(), state(r, "sigma").clone())?;
            let target = StateBox::new(state(r, "tau").clone(), state(r, "omega").clone())?;
            let (n, m) = PROTOCOL_SHAPES[r.index % 3];
            strong_converse_checks(&source, &target, n, m)
        }
    }
}

/// `D(N(ρ)‖N(σ)) ≤ D(ρ‖σ)` for every divergence in the data-processing list.
pub fn dp_checks(rho: &State, sigma: &State, n: &Channel) -> Result<Vec<InequalityCheck>> {
    let (nr, ns) = (n.apply(rho)?, n.apply(sigma)?);
    let pair = |f: &dyn Fn(&State, &State) -> Result<DivergenceValue>| -> Result<(f64, f64)> {
        Ok((f(&nr, &ns)?.to_f64(), f(rho, sigma)?.to_f64()))
    };
    let mut out = Vec::new();
    let (a, b) = pair(&rel_entropy)?;
    out.push(InequalityCheck::le("dp_rel_entropy", a, b));
    let (a, b) = pair(&d_min)?;
    out.push(InequalityCheck::le("dp_d_min", a, b));
    let (a, b) = pair(&d_max)?;
    out.push(InequalityCheck::le("dp_d_max", a, b));
    for alpha in DP_PETZ_ALPHAS {
        let o = RenyiOrder::new(alpha)?;
        let (a, b) = pair(&|x, y| petz_renyi(x, y, o))?;
        out.push(InequalityCheck::le("dp_petz", a, b).with("alpha", alpha));
    }
    for alpha in DP_SANDWICHED_ALPHAS {
        let o = RenyiOrder::new(alpha)?;
        let (a, b) = pair(&|x, y| sandwiched_renyi(x, y, o))?;
        out.push(InequalityCheck::le("dp_sandwiched", a, b).with("alpha", alpha));
    }
    out.push(InequalityCheck::le("dp_trace_distance", trace_distance(&nr, &ns)?, trace_distance(rho, sigma)?));
    out.push(InequalityCheck::le("dp_fidelity", fidelity(rho, sigma)?, fidelity(&nr, &ns)?));
    Ok(out)
}

fn triple_checks(rho0: &State, rho1: &State, sigma: &State) -> Result<Vec<InequalityCheck>> {
    let mut out = Vec::new();
    for a in SANDWICHED_ALPHAS {
        out.push(pseudo_continuity_sandwiched(rho0, rho1, sigma, a)?);
    }
    for a in PETZ_ALPHAS {
        out.push(pseudo_continuity_petz(rho0, rho1, sigma, a)?);
    }
    Ok(out)
}

/// Trace-distance and infidelity errors of the trace-distance-optimal
/// `(n, m)` protocol, replayed from its extracted channel.
pub fn optimal_protocol_errors(source: &StateBox, target: &StateBox, n: usize, m: usize) -> Result<(f64, f64)> {
    let src = source.tensor_power(n);
    let tgt = target.tensor_power(m);
    let opt = box_transform_error(&src, &tgt)?;
    let out = opt.channel.apply(&src.first)?;
    Ok((trace_distance(&out, &tgt.first)?, (1.0 - fidelity(&out, &tgt.first)?).clamp(0.0, 1.0)))
}

pub fn strong_converse_checks(source: &StateBox, target: &StateBox, n: usize, m: usize) -> Result<Vec<InequalityCheck>> {
    let (eps, eps_f) = optimal_protocol_errors(source, target, n, m)?;
    let (eps, eps_f) = (eps.min(1.0), eps_f);
    let mut out = Vec::new();
    for a in SANDWICHED_ALPHAS {
        out.push(strong_converse_sandwiched(source, target, n, m, a, eps)?);
        out.push(strong_converse_sandwiched_infidelity(source, target, n, m, a, eps_f)?);
    }
    for a in PETZ_ALPHAS {
        out.push(strong_converse_petz(source, target, n, m, a, eps)?);
    }
    Ok(out)
}
