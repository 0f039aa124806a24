//! Dyadic difference operators: coefficients, polynomial annihilation and the identity suite.

use sbe_core::deltak::{apply_delta_k, chk_coeff, delta_k_coeffs, selftest};

fn main() -> sbe_core::Result<()> {
    for k in 0..4 {
        let c = delta_k_coeffs(k)?;
        let exact: Vec<String> = c.exact().iter().map(|v| v.to_string()).collect();
        println!("k = {k}: [{}]", exact.join(", "));
    }

    let c = delta_k_coeffs(3)?;
    let cubic = apply_delta_k(|x| x.powi(3) - 2.0 * x + 1.0, &c, 0.3)?;
    let quartic = apply_delta_k(|x| x.powi(4), &c, 0.3)?;
    println!("Δ_3 on a cubic: {cubic:e}, on x^4: {quartic:.6}");
    println!("c_(h=4,k=2) = {}", chk_coeff(4, 2));

    for check in selftest(0)? {
        println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
    }
    Ok(())
}
