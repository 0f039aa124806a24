//! Regularization by noise: a rough distributional drift under an fBm driver.

use sbe_core::experiments::{regularization_demo, RegularizationConfig};

fn main() -> sbe_core::Result<()> {
    let r = regularization_demo(&RegularizationConfig::default(), 2)?;
    println!("alpha1 = {:.3}, gamma = {:.3}, gamma0 = {:.3}", r.alpha1, r.gamma, r.budget.gamma0);
    println!("measured drift norm (first slice): {:.4}", r.measured.first().copied().unwrap_or(f64::NAN));
    for run in &r.runs {
        println!(
            "level {:>2}: converged {}, {} iterations, self-distance {:?}, rate {:?}",
            run.level, run.converged, run.iterations, run.self_distance, run.rate
        );
    }
    Ok(())
}
