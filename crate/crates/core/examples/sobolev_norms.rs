//! Anisotropic Sobolev norms and the data spaces of the small-data theory.

use prodnls::fields::{apply_bessel_y, hxy_norm, random_small_data};
use prodnls::{make_grid, SobolevSpec};

fn main() -> prodnls::Result<()> {
    for (n, split) in [(2, None), (3, Some(2)), (4, None)] {
        let grid = make_grid(n, 1, 8.0, 8, 8, split)?;
        let spec = SobolevSpec::theorem_space(&grid, 0.1)?;
        let f = random_small_data(&grid, &spec, 0.01, 4.0, 7)?;
        println!(
            "n = {n}: theta = {}, rho = {:.2}, {:?}; ||f|| = {:.3e}, ||f||_L2 = {:.3e}",
            spec.theta,
            spec.rho,
            spec.variant,
            hxy_norm(&f, &spec)?,
            f.l2_norm()
        );
    }

    let grid = make_grid(2, 1, 8.0, 16, 16, None)?;
    let f = random_small_data(&grid, &SobolevSpec::full(0, 0.0), 1.0, 2.0, 3)?;
    for rho in [0.0, 0.5, 1.0, 2.0] {
        println!(
            "||(1 - Delta_y)^({rho}/2) f||_L2 = {:.6}, H^(1,{rho}) = {:.6}",
            apply_bessel_y(&f, rho).l2_norm(),
            hxy_norm(&f, &SobolevSpec::full(1, rho))?
        );
    }
    Ok(())
}
