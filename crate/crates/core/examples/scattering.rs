//! Scattering state from pullbacks e^{-itDelta} u(t) on a probe ladder, and
//! the dispersive decay of the L^4_x L^2_y norm.

use prodnls::fields::localized_small_data;
use prodnls::scattering::{dispersive_decay_fit, extract_scattering_state};
use prodnls::solver::{evolve, EvolutionConfig};
use prodnls::{make_grid, SobolevSpec};

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn main() -> prodnls::Result<()> {
    let grid = make_grid(2, 1, 32.0 * std::f64::consts::PI, 128, 4, None)?;
    let spec = SobolevSpec::theorem_space(&grid, 0.1)?;
    let f = localized_small_data(&grid, &spec, 0.2, 1.5, 3.0, 4)?;
    let ev = evolve(&f, &EvolutionConfig::new(1.0, 8.0, 1.0 / 16.0).with_stride(4))?;
    let (f0, report) = extract_scattering_state(&ev.trajectory, &[1.0, 2.0, 4.0, 8.0], &spec)?;
    println!("Cauchy differences {}", sci(&report.cauchy_differences));
    println!("scattering errors  {}", sci(&report.scattering_errors));
    println!("||f0|| = {:.6e}, ||f|| = {:.6e}", report.f0_norm, f.l2_norm());
    println!("max boundary mass {:.2e}, ||f0||_L2 = {:.6e}", ev.max_boundary_mass(), f0.l2_norm());

    let fit = dispersive_decay_fit(&ev.trajectory, 4.0, (1.0, 8.0))?;
    println!("L^4 L^2 decay slope {:.3} (linear theory -0.5), rms {:.1e}", fit.slope, fit.residual);
    Ok(())
}
