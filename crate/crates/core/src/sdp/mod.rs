//! Semidefinite programs for smoothed divergences and box transformations.

mod embed;
pub mod families;
mod polish;
mod program;
mod quantities;

pub use embed::{derealify, realified_trace, realify};
pub use program::{
    AffineExpr, ConicProgram, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, MatVar, MatrixExpr, Sense, SolveResult, SolveStatus, SolverSettings,
    solve, solve_with,
};
pub use quantities::{
    BoxTransform, Certificate, Metric, SdpConfig, SmoothDmax, SmoothDmin, SmoothingBall, TraceDistanceSdp,
    box_transform_error, box_transform_error_with, cost_approx, cost_approx_with, cost_exact, cost_exact_with,
    distillable_approx, distillable_approx_with, distillable_exact, distillable_exact_with, exact_transform_feasible,
    smooth_dmax, smooth_dmax_with, smooth_dmin, smooth_dmin_with, trace_distance_sdp, unbounded_bits_error,
};
