//! Monte Carlo and convergence studies behind the acceptance reports.

pub mod comparison;
pub mod invariance;
pub mod moment;
pub mod regularization;
pub mod stats;

pub use comparison::{besov_sbe_comparison, comparison_family, ComparisonConfig, ComparisonReport, ComparisonRow};
pub use invariance::{
    invariance_suite, random_smooth_path, reparam_experiment, shift_experiment, InvarianceConfig, InvarianceReport,
    ReparamReport, ShiftReport, ShiftSettings,
};
pub use moment::{
    delta_zero, mc_moment_scaling, sde_occupation_experiment, DilationRow, MomentScalingConfig, MomentScalingReport,
    ProcessChoice, SdeDrift, SdeOccupationConfig, SdeOccupationReport, SpanMoment, TruncationRow,
};
pub use regularization::{demo_budget, demo_drift, regularization_demo, DemoDrift, LevelRun, RegularizationConfig, RegularizationReport};
pub use stats::{bootstrap_slope, SlopeCi};
