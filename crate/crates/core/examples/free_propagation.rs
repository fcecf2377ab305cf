//! Free flow on R^2 x T^1 three ways: the full symbol, the per-mode reduced
//! evolutions, and (on R^3 x T^1) the partial Fourier split along x_3.

use prodnls::fields::random_small_data;
use prodnls::propagators::{free_propagate, free_propagate_by_modes, free_propagate_by_partial_fourier, mode_decompose};
use prodnls::{make_grid, SobolevSpec};

fn main() -> prodnls::Result<()> {
    let grid = make_grid(2, 1, 20.0, 32, 8, None)?;
    let f = random_small_data(&grid, &SobolevSpec::full(0, 0.0), 1.0, 2.0, 1)?;

    let stack = mode_decompose(&f);
    println!("{} torus modes, eigenvalues {:?}", stack.slices.len(), stack.slices.iter().map(|s| s.eigenvalue).collect::<Vec<_>>());

    for t in [0.5, 1.0, 4.0] {
        let full = free_propagate(&f, t);
        let reduced = free_propagate_by_modes(&f, t)?;
        println!(
            "t = {t}: |u| = {:.15}, reduced vs full = {:.2e}",
            full.l2_norm(),
            reduced.sub(&full)?.l2_norm() / full.l2_norm()
        );
    }

    let odd = make_grid(3, 1, 16.0, 16, 4, Some(2))?;
    let g = random_small_data(&odd, &SobolevSpec::full(0, 0.0), 1.0, 2.0, 2)?;
    let full = free_propagate(&g, 1.3);
    let split = free_propagate_by_partial_fourier(&g, 1.3)?;
    println!("R^3 x T^1 partial Fourier vs full: {:.2e}", split.sub(&full)?.l2_norm() / full.l2_norm());
    Ok(())
}
