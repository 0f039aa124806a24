//! Occupation-measure scaling of a one-dimensional SDE with bounded drift,
//! against a Brownian baseline.

use sbe_core::experiments::{sde_occupation_experiment, SdeOccupationConfig};

fn main() -> sbe_core::Result<()> {
    let r = sde_occupation_experiment(&SdeOccupationConfig::default(), 77)?;
    println!("SDE slope      {:.4} [{:.4}, {:.4}]", r.sde_fit.slope, r.sde_fit.lo, r.sde_fit.hi);
    println!("baseline slope {:.4} [{:.4}, {:.4}]", r.baseline_fit.slope, r.baseline_fit.lo, r.baseline_fit.hi);
    println!("intervals overlap: {}", r.ci_overlap);
    for row in &r.dilation {
        println!("path {}: sigma -> 2 sigma ratio {:.4} (driftless value {:.4})", row.path, row.ratio, r.dilation_expected);
    }
    Ok(())
}
