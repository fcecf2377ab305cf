//! Duhamel-Picard iteration in the solution space, compared with the
//! split-step solution, and the contraction ratios as delta shrinks.

use prodnls::fields::localized_small_data;
use prodnls::solver::{evolve, picard_solve, EvolutionConfig, PicardSettings};
use prodnls::{make_grid, Error, SobolevSpec};

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn main() -> prodnls::Result<()> {
    let grid = make_grid(2, 1, 32.0 * std::f64::consts::PI, 64, 8, None)?;
    let spec = SobolevSpec::theorem_space(&grid, 0.1)?;
    let cfg = EvolutionConfig::new(1.0, 1.0, 1.0 / 64.0);
    for delta in [0.5, 0.1, 1e-2, 5e-3] {
        let f = localized_small_data(&grid, &spec, delta, 2.0, 3.0, 2024)?;
        match picard_solve(&f, &cfg, &PicardSettings::default()) {
            Ok((u, trace)) => {
                let oracle = evolve(&f, &cfg)?;
                println!(
                    "delta = {delta:.0e}: {} iterations, ratios [{}], radius {:.3e}, vs split-step {:.2e}",
                    trace.iterations,
                    sci(&trace.ratios),
                    trace.radius,
                    u.relative_l2_error(&oracle.trajectory)?
                );
            }
            Err(Error::NonConvergence(trace)) => println!("delta = {delta:.0e}: no convergence, distances {:?}", trace.distances),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
