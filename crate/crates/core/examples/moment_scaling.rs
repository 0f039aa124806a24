//! Weighted second moments of Brownian occupation-measure norms against the span.
//!
//! Pass `--quick` for a small run.

use sbe_core::experiments::{mc_moment_scaling, MomentScalingConfig};

fn main() -> sbe_core::Result<()> {
    let mut cfg = MomentScalingConfig::default();
    if std::env::args().any(|a| a == "--quick") {
        cfg.n_paths = 40;
        cfg.n_steps = 1 << 12;
    }
    let r = mc_moment_scaling(&cfg, 2024)?;
    for p in &r.points {
        println!("span {:>9.6}  mean {:>12.6e}  se {:>10.3e}", p.span, p.mean, p.std_error);
    }
    println!(
        "slope {:.4}  95% CI [{:.4}, {:.4}]  target 1+delta0 = {:.4}  self-similar exponent {:.3}",
        r.fit.slope,
        r.fit.lo,
        r.fit.hi,
        r.target_slope,
        r.self_similar_exponent.unwrap_or(f64::NAN)
    );
    for row in &r.truncation {
        println!("sup|w| <= {}: fraction {:.3}", row.level, row.fraction_inside);
    }
    Ok(())
}
