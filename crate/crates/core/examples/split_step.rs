//! Strang split-step evolution of the cubic equation with its conservation
//! diagnostics.

use prodnls::fields::localized_small_data;
use prodnls::solver::{energy, evolve, EvolutionConfig};
use prodnls::{make_grid, SobolevSpec};

fn main() -> prodnls::Result<()> {
    let grid = make_grid(2, 1, 16.0 * std::f64::consts::PI, 64, 8, None)?;
    let spec = SobolevSpec::theorem_space(&grid, 0.1)?;
    let f = localized_small_data(&grid, &spec, 0.5, 2.0, 3.0, 11)?;
    for kappa in [1.0, -1.0] {
        let ev = evolve(&f, &EvolutionConfig::new(kappa, 2.0, 1.0 / 32.0).with_stride(8))?;
        let e0 = energy(&f, kappa);
        println!("kappa = {kappa:+}");
        for (j, u) in ev.trajectory.fields().iter().enumerate() {
            println!(
                "  t = {:.2}: mass {:.15}, energy drift {:+.3e}, boundary mass {:.1e}",
                ev.trajectory.time(j),
                ev.mass[j],
                energy(u, kappa) - e0,
                ev.boundary_mass[j]
            );
        }
    }
    Ok(())
}
