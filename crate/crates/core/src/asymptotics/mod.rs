//! Rates, second-order expansions, and inequality batteries for the bounds
//! relating smoothed and Rényi divergences.

mod battery;
mod bounds;
mod rates;

pub use battery::{
    BatteryReport, DP_PETZ_ALPHAS, DP_SANDWICHED_ALPHAS, InstanceReport, PROTOCOL_SHAPES, Suite, dp_checks,
    optimal_protocol_errors, run_battery, run_instance, strong_converse_checks,
};
pub use bounds::{
    BATTERY_TOL, BridgeParams, InequalityCheck, InfidelityParams, PETZ_ALPHAS, SANDWICHED_ALPHAS, bridge_bounds,
    infidelity_bounds, petz_exponent_bound, petz_partner, pseudo_continuity_petz, pseudo_continuity_sandwiched,
    sandwiched_exponent_bound, sandwiched_partner, strong_converse_petz, strong_converse_sandwiched,
    strong_converse_sandwiched_infidelity,
};
pub use rates::{
    Rate, RateResult, SupportCase, box_rate, inv_normal_cdf, normal_cdf, second_order_cost, second_order_distill,
};
