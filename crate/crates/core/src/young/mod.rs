//! Nonlinear Young integration against irregular paths, ODEs and flows.

pub mod drift;
pub mod ode;
pub mod sewing;

pub use drift::{averaged_field, averaged_jacobian, DeclaredRegularity, Drift, DriftField, Extension, FnDrift, Reversed};
pub use ode::{
    flow, flow_inverse, flow_jacobian, flow_solve, solve_ode, solve_ode_report, young_integral, Budget, BudgetReport,
    CompositionCheck, FlowTable, OdeSolution, YoungIntegral, YoungParams,
};
pub use sewing::{riemann_sums, sewing_integrate, sewing_integrate_triadic, Controls, SewingGerm, SewingReport, SewingResult};
