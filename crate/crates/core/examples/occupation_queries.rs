//! Occupation measure of a Brownian path and small-ball mass queries.

use sbe_core::occupation::{brute_force_ball_mass, occupation, translate};
use sbe_core::process::{gen_gaussian, GaussianSpec};
use sbe_core::SmallBallIndex;

fn main() -> sbe_core::Result<()> {
    let path = gen_gaussian(&GaussianSpec::brownian(2)?, 1 << 14, (0.0, 1.0), 11)?;
    let mu = occupation(&path, 0.25, 0.75)?;
    println!("atoms {}, total mass {}", mu.len(), mu.total_mass());

    let index = SmallBallIndex::build(&mu);
    let y = path.interpolate(0.5);
    for r in [0.01, 0.05, 0.2, 1.0] {
        let fast = index.small_ball(r, &y);
        let slow = brute_force_ball_mass(&mu, r, &y);
        println!("r = {r:<5} mass {fast:.6} (brute force {slow:.6})");
    }

    let shifted = translate(&mu, &[1.0, -2.0])?;
    let moved = SmallBallIndex::build(&shifted).small_ball(0.2, &[y[0] + 1.0, y[1] - 2.0]);
    println!("translated query agrees: {}", moved == index.small_ball(0.2, &y));
    Ok(())
}
