//! Local non-determinism constant, the C^β increment-density integral and the admissible region.

use sbe_core::lnd::{cnu_linearity, lnd_constant_estimate, lnd_param_region, GaussianIncrementModel};

fn main() -> sbe_core::Result<()> {
    for hurst in [0.25, 0.5, 0.75] {
        let model = GaussianIncrementModel::fbm(hurst, 1)?;
        let est = lnd_constant_estimate(&model, 3, 5000, (0.0, 1.0), 8)?;
        println!("H = {hurst}: min ratio {:.4}, c_n {:.4}", est.min_ratio, est.c_n);
    }

    let model = GaussianIncrementModel::fbm(0.25, 1)?;
    let cnu = cnu_linearity(&model, 1.0, (0.0, 1.0), 6)?;
    println!("growth exponent {:.4}, c_nu {:.4}", cnu.growth_exponent, cnu.c_nu);

    let region = lnd_param_region(0.25, 1, 0.4, 2.0, 2.0)?;
    println!("region satisfied: {} (slacks {:.3}, {:.3})", region.satisfied, region.first_slack, region.second_slack);
    Ok(())
}
