use std::path::{Path, PathBuf};

use adlab_core::asymptotics::{
    BATTERY_TOL, BatteryReport, InstanceReport, Rate, Suite, box_rate, run_battery, run_instance,
    second_order_cost, second_order_distill,
};
use adlab_core::divergences::{
    RenyiOrder, d_max, d_min, petz_renyi, rel_entropy, rel_entropy_variance, sandwiched_renyi, trace_distance,
};
use adlab_core::linalg::{CMat, Channel, State, StateBox};
use adlab_core::sdp::{
    Certificate, Metric, SdpConfig, SmoothingBall, box_transform_error_with, cost_approx_with, cost_exact_with,
    distillable_exact_with, smooth_dmax_with, smooth_dmin_with,
};
use adlab_core::testkit::Seed;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Value, json};

use crate::report::{Report, div_value, fmt_f64, num};
use crate::statefile::{StateFile, StateFileError, state_value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<adlab_core::Error> for CliError {
    fn from(e: adlab_core::Error) -> Self {
        if e.is_domain() { CliError::Input(e.to_string()) } else { CliError::Numerical(e.to_string()) }
    }
}

impl From<StateFileError> for CliError {
    fn from(e: StateFileError) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Text to print, an optional file to write, and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub file: Option<(PathBuf, String)>,
    pub code: i32,
}

#[derive(Parser, Debug)]
#[command(name = "adlab", version, about = "Distinguishability resource numerics: divergences, SDPs and inequality batteries")]
pub struct Cli {
    #[command(flatten)]
    pub tolerances: Tolerances,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Tolerances {
    /// Solver primal-dual gap tolerance [default: ADLAB_GAP_TOL or 1e-7].
    #[arg(long, global = true)]
    pub gap_tol: Option<f64>,
    /// Transformation error counted as exact.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub feasibility_tol: f64,
    /// Bracket width at which bisections stop, in bits.
    #[arg(long, global = true, default_value_t = 1e-4)]
    pub resolution: f64,
}

impl Tolerances {
    pub fn config(&self) -> CliResult<SdpConfig> {
        let mut cfg = SdpConfig::default();
        if let Some(g) = self.gap_tol {
            if !(g > 0.0 && g.is_finite()) {
                return Err(CliError::Input(format!("--gap-tol must be positive, got {g}")));
            }
            cfg.solver.gap_tol = g;
        }
        if !(self.feasibility_tol >= 0.0 && self.resolution > 0.0) {
            return Err(CliError::Input("--feasibility-tol must be nonnegative and --resolution positive".into()));
        }
        cfg.feasibility_tol = self.feasibility_tol;
        cfg.resolution = self.resolution;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate one quantity on a pair of states.
    Compute(ComputeArgs),
    /// Run a seeded inequality battery and write its report.
    Battery(BatteryArgs),
    /// Asymptotic conversion rate between two boxes.
    Rate(RateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Dmin,
    Dmax,
    Rel,
    Var,
    Petz,
    Sandwiched,
    SmoothDmin,
    SmoothDmax,
    BoxError,
    DistillExact,
    CostExact,
    CostApprox,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricArg {
    Trace,
    Fid,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Trace => Metric::TraceDistance,
            MetricArg::Fid => Metric::Infidelity,
        }
    }
}

#[derive(Args, Debug)]
pub struct ComputeArgs {
    #[arg(value_enum)]
    pub quantity: Quantity,
    #[arg(long)]
    pub rho: PathBuf,
    #[arg(long)]
    pub sigma: PathBuf,
    /// Target first state, for box-error.
    #[arg(long)]
    pub tau: Option<PathBuf>,
    /// Target second state, for box-error.
    #[arg(long)]
    pub omega: Option<PathBuf>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Rényi order, for petz and sandwiched.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "trace")]
    pub metric: MetricArg,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse::<Suite>().map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
pub struct BatteryArgs {
    /// bridge, infidelity, dp, pseudo-continuity or strong-converse.
    #[arg(value_parser = parse_suite)]
    pub suite: Suite,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Margin below zero still accepted.
    #[arg(long, default_value_t = BATTERY_TOL, allow_negative_numbers = true)]
    pub tolerance: f64,
    /// Rerun only this instance index.
    #[arg(long)]
    pub index: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RateArgs {
    #[arg(long)]
    pub source_rho: PathBuf,
    #[arg(long)]
    pub source_sigma: PathBuf,
    #[arg(long)]
    pub target_rho: PathBuf,
    #[arg(long)]
    pub target_sigma: PathBuf,
    /// Copies for the second-order terms.
    #[arg(long, requires = "eps")]
    pub n: Option<usize>,
    #[arg(long, requires = "n")]
    pub eps: Option<f64>,
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let cfg = cli.tolerances.config()?;
    match &cli.command {
        Command::Compute(a) => compute(a, &cfg).map(|r| Outcome { stdout: r.render(), file: None, code: 0 }),
        Command::Battery(a) => battery(a, &cfg),
        Command::Rate(a) => rate(a, &cfg).map(|r| Outcome { stdout: r.render(), file: None, code: 0 }),
    }
}

fn load(path: &Path) -> CliResult<State> {
    Ok(StateFile::read(path)?.state)
}

fn load_box(first: &Path, second: &Path) -> CliResult<StateBox> {
    Ok(StateBox::new(load(first)?, load(second)?)?)
}

fn tolerance_lines(r: &mut Report, cfg: &SdpConfig) {
    r.real("gap_tol", cfg.solver.gap_tol).real("feas_tol", cfg.solver.feas_tol);
}

fn certificate_lines(r: &mut Report, c: Option<&Certificate>) {
    match c {
        Some(c) => {
            r.line("status", "optimal").real("gap", c.gap).real("primal", c.primal).real("dual", c.dual);
            r.int("iterations", c.iterations as u64);
        }
        None => {
            r.line("status", "support");
        }
    }
}

fn need(v: Option<f64>, flag: &str, q: &str) -> CliResult<f64> {
    v.ok_or_else(|| CliError::Input(format!("{q} needs --{flag}")))
}

pub fn compute(a: &ComputeArgs, cfg: &SdpConfig) -> CliResult<Report> {
    let name = a.quantity.to_possible_value().expect("listed").get_name().to_string();
    let b = load_box(&a.rho, &a.sigma)?;
    let (rho, sigma) = (&b.first, &b.second);
    let mut r = Report::new("compute");
    r.line("quantity", &name);
    tolerance_lines(&mut r, cfg);
    let closed = |r: &mut Report, v: f64| {
        r.real("value", v).line("status", "closed_form");
    };
    match a.quantity {
        Quantity::Dmin => closed(&mut r, d_min(rho, sigma)?.to_f64()),
        Quantity::Dmax => closed(&mut r, d_max(rho, sigma)?.to_f64()),
        Quantity::Rel => closed(&mut r, rel_entropy(rho, sigma)?.to_f64()),
        Quantity::Var => closed(&mut r, rel_entropy_variance(rho, sigma)?),
        Quantity::Petz | Quantity::Sandwiched => {
            let alpha = need(a.alpha, "alpha", &name)?;
            let order = RenyiOrder::new(alpha)?;
            r.real("alpha", alpha);
            let (v, dp) = if a.quantity == Quantity::Petz {
                (petz_renyi(rho, sigma, order)?, order.petz_data_processing())
            } else {
                (sandwiched_renyi(rho, sigma, order)?, order.sandwiched_data_processing())
            };
            closed(&mut r, v.to_f64());
            r.flag("data_processing_known", dp);
        }
        Quantity::SmoothDmin => {
            let eps = need(a.eps, "eps", &name)?;
            r.real("eps", eps);
            let s = smooth_dmin_with(rho, sigma, eps, cfg)?;
            r.real("value", s.value.to_f64());
            certificate_lines(&mut r, s.certificate.as_ref());
        }
        Quantity::SmoothDmax => {
            let eps = need(a.eps, "eps", &name)?;
            let ball = SmoothingBall::new(a.metric.into(), eps)?;
            r.real("eps", eps).line("metric", metric_name(a.metric));
            let s = smooth_dmax_with(rho, sigma, ball, cfg)?;
            r.real("value", s.value.to_f64());
            certificate_lines(&mut r, s.certificate.as_ref());
            if let Some(st) = &s.smoothed {
                r.field("smoothed", state_value(st));
            }
        }
        Quantity::BoxError => {
            let (Some(t), Some(w)) = (&a.tau, &a.omega) else {
                return Err(CliError::Input("box-error needs --tau and --omega".into()));
            };
            let target = load_box(t, w)?;
            let bt = box_transform_error_with(&b, &target, cfg)?;
            r.real("value", bt.error);
            certificate_lines(&mut r, Some(&bt.certificate));
            let out = bt.channel.apply(rho)?;
            r.real("replayed_error", trace_distance(&out, &target.first)?);
            r.real("second_state_residual", bt.channel.apply(sigma)?.max_abs_diff(&target.second));
            r.field("channel", channel_value(&bt.channel));
        }
        Quantity::DistillExact | Quantity::CostExact | Quantity::CostApprox => {
            let v = match a.quantity {
                Quantity::DistillExact => distillable_exact_with(&b, cfg)?,
                Quantity::CostExact => cost_exact_with(&b, cfg)?,
                _ => {
                    let eps = need(a.eps, "eps", &name)?;
                    if a.metric != MetricArg::Trace {
                        return Err(CliError::Input("cost-approx is defined with the trace metric only".into()));
                    }
                    r.real("eps", eps).line("metric", "trace");
                    cost_approx_with(&b, eps, cfg)?
                }
            };
            r.real("value", v.to_f64()).line("status", "bisection").real("resolution", cfg.resolution);
            r.real("feasibility_tol", cfg.feasibility_tol);
        }
    }
    Ok(r)
}

fn metric_name(m: MetricArg) -> &'static str {
    match m {
        MetricArg::Trace => "trace",
        MetricArg::Fid => "fid",
    }
}

fn matrix_value(m: &CMat) -> Value {
    let rows: Vec<Value> = (0..m.nrows())
        .map(|i| Value::from((0..m.ncols()).map(|j| json!([num(m[(i, j)].re), num(m[(i, j)].im)])).collect::<Vec<_>>()))
        .collect();
    Value::from(rows)
}

fn channel_value(c: &Channel) -> Value {
    json!({"dim_in": c.dim_in(), "dim_out": c.dim_out(), "choi": matrix_value(c.choi().matrix())})
}

fn instance_summary(i: &InstanceReport) -> Value {
    let min = i.checks.iter().filter(|c| !c.vacuous).map(|c| c.margin).fold(f64::INFINITY, f64::min);
    json!({
        "index": i.index,
        "description": i.description,
        "checks": i.checks.len(),
        "vacuous": i.checks.iter().filter(|c| c.vacuous).count(),
        "min_margin": num(min),
    })
}

fn check_value(c: &adlab_core::asymptotics::InequalityCheck) -> Value {
    let params: serde_json::Map<String, Value> = c.parameters.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
    json!({
        "name": c.name,
        "lhs": num(c.lhs),
        "rhs": num(c.rhs),
        "margin": num(c.margin),
        "vacuous": c.vacuous,
        "parameters": params,
    })
}

/// Everything needed to rerun a failed instance.
fn violation_value(suite: Suite, tol: f64, i: &InstanceReport) -> Value {
    let states: serde_json::Map<String, Value> = i.states.iter().map(|(k, s)| (k.clone(), state_value(s))).collect();
    json!({
        "index": i.index,
        "instance_seed": i.seed.0,
        "description": i.description,
        "error": i.error,
        "failed_checks": i.checks.iter().filter(|c| !c.passes(tol)).map(check_value).collect::<Vec<_>>(),
        "checks": i.checks.iter().map(check_value).collect::<Vec<_>>(),
        "states": states,
        "channel": i.channel.as_ref().map(channel_value),
        "replay": format!("adlab battery {suite} --seed <seed> --count {} --index {} --out <file>", i.index + 1, i.index),
    })
}

pub fn battery(a: &BatteryArgs, cfg: &SdpConfig) -> CliResult<Outcome> {
    if !a.tolerance.is_finite() {
        return Err(CliError::Input("--tolerance must be finite".into()));
    }
    if a.count == 0 {
        return Err(CliError::Input("--count must be at least 1".into()));
    }
    let seed = Seed(a.seed);
    let mut rep = match a.index {
        Some(i) if i >= a.count => {
            return Err(CliError::Input(format!("--index {i} is outside --count {}", a.count)));
        }
        Some(i) => BatteryReport {
            suite: a.suite,
            seed,
            tolerance: BATTERY_TOL,
            instances: vec![run_instance(a.suite, i, seed.derive(i as u64))],
        },
        None => run_battery(a.suite, seed, a.count),
    };
    rep.tolerance = a.tolerance;
    let failed = rep.failed();
    let mut r = Report::new("battery");
    r.line("suite", a.suite).int("seed", a.seed).int("count", a.count as u64);
    if let Some(i) = a.index {
        r.int("index", i as u64);
    }
    r.real("tolerance", a.tolerance);
    tolerance_lines(&mut r, cfg);
    r.int("instances", rep.instances.len() as u64).int("checks", rep.check_count() as u64);
    r.int("vacuous", rep.vacuous_count() as u64).real("min_margin", rep.min_margin());
    r.int("violations", failed.len() as u64);
    r.line("result", if failed.is_empty() { "pass" } else { "fail" });
    let summary = r.clone();

    let vacuous: Vec<Value> = rep
        .instances
        .iter()
        .flat_map(|i| i.checks.iter().filter(|c| c.vacuous).map(move |c| json!({"index": i.index, "name": c.name, "parameters": c.parameters})))
        .collect();
    r.field("vacuous_passes", Value::from(vacuous));
    r.field("instances_detail", Value::from(rep.instances.iter().map(instance_summary).collect::<Vec<_>>()));
    r.field("violating_instances", Value::from(failed.iter().map(|i| violation_value(a.suite, a.tolerance, i)).collect::<Vec<_>>()));

    let mut summary = summary;
    summary.line("out", a.out.display());
    Ok(Outcome {
        stdout: summary.render(),
        file: Some((a.out.clone(), r.render())),
        code: if failed.is_empty() { 0 } else { 1 },
    })
}

fn rate_text(rate: Rate) -> String {
    match rate {
        Rate::Undefined => "undefined".into(),
        other => fmt_f64(other.to_f64()),
    }
}

pub fn rate(a: &RateArgs, cfg: &SdpConfig) -> CliResult<Report> {
    let source = load_box(&a.source_rho, &a.source_sigma)?;
    let target = load_box(&a.target_rho, &a.target_sigma)?;
    let res = box_rate(&source, &target)?;
    let mut r = Report::new("rate");
    tolerance_lines(&mut r, cfg);
    r.line("rate", rate_text(res.rate));
    r.field("rate", match res.rate {
        Rate::Undefined => Value::from("undefined"),
        other => num(other.to_f64()),
    });
    r.real("numerator", res.numerator.to_f64()).real("denominator", res.denominator.to_f64());
    r.field("numerator", div_value(res.numerator)).field("denominator", div_value(res.denominator));
    r.line("support_case", serde_json::to_value(res.support_case).expect("enum").as_str().expect("string"));
    if let (Some(n), Some(eps)) = (a.n, a.eps) {
        r.int("n", n as u64).real("eps", eps);
        let mut second = |key: &str, v: adlab_core::Result<f64>| -> CliResult<()> {
            match v {
                Ok(x) => {
                    r.real(key, x);
                }
                Err(e) if e.is_domain() => {
                    r.line(key, "undefined");
                }
                Err(e) => return Err(e.into()),
            }
            Ok(())
        };
        second("second_order_distill_source", second_order_distill(&source.first, &source.second, eps, n))?;
        second("second_order_cost_target", second_order_cost(&target.first, &target.second, eps, n))?;
    }
    Ok(r)
}
