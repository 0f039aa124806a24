//! Besov against SBE norms on six test measures, with one fitted constant.

use sbe_core::experiments::{besov_sbe_comparison, ComparisonConfig};

fn main() -> sbe_core::Result<()> {
    let report = besov_sbe_comparison(&ComparisonConfig::default(), 11)?;
    println!("{:<28} {:>12} {:>12} {:>10}", "measure", "SBE", "Besov", "ratio/C");
    for row in &report.rows {
        println!("{:<28} {:>12.5} {:>12.5} {:>10.3}", row.name, row.sbe, row.besov, row.relative);
    }
    println!(
        "C = {:.4}, spread [{:.3}, {:.3}], within factor 10: {}",
        report.constant, report.min_relative, report.max_relative, report.within_factor_10
    );
    Ok(())
}
