//! Norm engines: SBE quadrature, Besov via Littlewood–Paley, p-variation.

pub mod besov;
pub mod grid;
pub mod sbe;
pub mod variation;

pub use besov::{besov_norm, besov_norm_values, BesovParams, BesovValue, Summability};
pub use grid::{deposit_grid, GridDensity, GridSpec};
pub use sbe::{r_min_sensitivity, resolve_grid, sbe_norm, sbe_norm_on, GaussianBump, ResolvedGrid, SbeParams, SbeValue};
pub use variation::{
    dyadic_increments, dyadic_variation_bound, holder_exponent, p_variation, p_variation_pow, p_variation_real, p_variation_with,
    variation_of_occupation, DyadicBound, HolderFit,
};
