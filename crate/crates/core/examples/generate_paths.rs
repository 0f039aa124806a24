//! Sample Brownian, fractional Brownian and Euler–Maruyama paths and write them out.

use sbe_core::io::{read_path_csv, write_path_csv};
use sbe_core::process::{euler_maruyama_1d, gen_gaussian, GaussianSpec};

fn main() -> sbe_core::Result<()> {
    let bm = gen_gaussian(&GaussianSpec::brownian(2)?, 4097, (0.0, 1.0), 1)?;
    let fbm = gen_gaussian(&GaussianSpec::fbm(0.25, 1)?, 4097, (0.0, 1.0), 2)?;
    let em = euler_maruyama_1d(|_, x| -x.signum(), |_, _| 1.0, 0.0, 4097, (0.0, 1.0), 3)?;
    for (name, p) in [("bm (d=2)", &bm), ("fbm H=0.25", &fbm), ("em sign drift", &em)] {
        println!("{name:>14}: {} samples, end {:?}, sup {:.4}", p.len(), p.end_value(), p.sup_norm());
    }

    let mut buf = Vec::new();
    write_path_csv(&fbm, &mut buf)?;
    let back = read_path_csv(buf.as_slice())?;
    println!("csv round trip exact: {}", back == fbm);
    Ok(())
}
