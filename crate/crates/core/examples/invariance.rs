//! Reparametrization invariance and perturbation stability of occupation measures.

use sbe_core::experiments::{invariance_suite, InvarianceConfig};

fn main() -> sbe_core::Result<()> {
    let r = invariance_suite(&InvarianceConfig::default(), 5)?;
    println!("identity reparametrization ratio: {}", r.identity.ratio);
    println!(
        "bent reparametrization ratio: {:.4} (phi' in [{:.3}, {:.3}])",
        r.nontrivial.ratio, r.nontrivial.lipschitz.0, r.nontrivial.lipschitz.1
    );
    println!("f = g difference norm: {}", r.equal_pair_difference);
    for (i, s) in r.family.iter().enumerate() {
        println!(
            "pair {i}: difference {:.4e}, |f-g|_sup {:.3}, bound ratio {:.4e}",
            s.difference, s.f_minus_g_sup, s.bound_ratio
        );
    }
    println!("bound-ratio spread (max/min): {:.3}", r.family_spread);
    Ok(())
}
