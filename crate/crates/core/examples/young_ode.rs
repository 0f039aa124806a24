//! Solve a nonlinear Young ODE driven by fractional Brownian motion and check the flow.

use sbe_core::process::{gen_gaussian, GaussianSpec};
use sbe_core::young::{flow, solve_ode, FnDrift, YoungParams};

fn main() -> sbe_core::Result<()> {
    let omega = gen_gaussian(&GaussianSpec::fbm(0.4, 1)?, (1 << 12) + 1, (0.0, 1.0), 21)?;
    let f = FnDrift::new(1, |_, x: &[f64], out: &mut [f64]| out[0] = -x[0].sin());
    let params = YoungParams::default();

    let sol = solve_ode(&f, &omega, &[0.5], &params)?;
    println!(
        "x(1) = {:.8}, {} iterations, solver tolerance {:.2e}",
        sol.end_value()[0],
        sol.iterations,
        sol.solver_tolerance
    );

    let table = flow(&f, &omega, &[0.0, 0.25, 0.5], &[vec![0.5], vec![-1.0]], &params)?;
    let worst = table.composition.iter().map(|c| c.error).fold(0.0, f64::max);
    println!("flow composition: worst error {worst:.2e}, flagged {}", table.flagged());
    Ok(())
}
