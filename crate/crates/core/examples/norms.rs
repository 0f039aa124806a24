//! SBE, Besov and p-variation norms of one Brownian occupation measure.

use sbe_core::norms::{besov_norm, deposit_grid, p_variation_real, sbe_norm, BesovParams, GridSpec, SbeParams};
use sbe_core::occupation::occupation;
use sbe_core::process::{gen_gaussian, GaussianSpec};
use sbe_core::SmallBallIndex;

fn main() -> sbe_core::Result<()> {
    let path = gen_gaussian(&GaussianSpec::brownian(1)?, 1 << 14, (0.0, 1.0), 4)?;
    let mu = occupation(&path, 0.0, 1.0)?;
    let index = SmallBallIndex::build(&mu);

    for alpha in [0.1, 0.3, 0.45] {
        let v = sbe_norm(&index, &SbeParams::new(alpha, 2.0, 2.0))?;
        println!("SBE^({alpha},2)_2 = {:.4} (k = {}, r in [{:.2e}, {:.2e}])", v.value, v.k, v.grid.r_min, v.grid.r_max);
    }

    let (lo, hi) = mu.bounding_box().expect("nonempty");
    let grid = GridSpec::covering(&lo, &hi, 1.0 / 512.0, 1.0)?;
    let rho = deposit_grid(&mu, &grid)?;
    let b = besov_norm(&rho, &BesovParams::new(0.3, 2.0, 6))?;
    println!("B^0.3_(2,inf) = {:.4}", b.value);

    let x = path.values();
    for p in [2.5, 3.0, 4.0] {
        println!("{p}-variation = {:.4}", p_variation_real(x, p));
    }
    Ok(())
}
