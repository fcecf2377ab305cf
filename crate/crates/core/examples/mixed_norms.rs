//! Space-time mixed norms of free solutions, Strichartz admissibility, and the
//! solution-space norms used by the Picard iteration.

use prodnls::fields::{random_lattice_field, random_small_data};
use prodnls::mixednorms::{admissible_q, mixed_norm, mixed_norm_x, solution_space_norm, PairKind};
use prodnls::propagators::modulated_propagate_x;
use prodnls::solver::{free_trajectory, EvolutionConfig};
use prodnls::{make_grid, SobolevSpec};

fn main() -> prodnls::Result<()> {
    for (n, p) in [(2, 4.0), (3, 4.0), (4, 2.5)] {
        println!("n = {n}, p = {p}: Strichartz q = {:.4}", admissible_q(n, p, PairKind::Strichartz)?);
    }
    println!("n = 4, |alpha| = 1, p = 4: q = {:.4}", admissible_q(4, 4.0, PairKind::Derivative(1))?);

    let grid = make_grid(2, 1, 12.0, 32, 8, None)?;
    let spec = SobolevSpec::theorem_space(&grid, 0.1)?;
    let f = random_small_data(&grid, &spec, 0.01, 3.0, 5)?;
    let traj = free_trajectory(&f, &EvolutionConfig::new(0.0, 1.0, 1.0 / 16.0))?;
    println!("||e^(it Delta) f||_(L^4 L^4 L^2) / ||f|| = {:.6}", mixed_norm(&traj, 4.0, 4.0)? / f.l2_norm());
    println!("||e^(it Delta) f||_Y = {:.6e}", solution_space_norm(&traj, 0.1)?);

    let h = random_lattice_field(&grid.x_lattice(), 2.0, None, 9)?;
    for m in [-10.0, 0.0, 10.0] {
        let fields: Vec<_> = (0..=16).map(|j| modulated_propagate_x(&h, j as f64 / 16.0, m)).collect();
        println!("m = {m:>5}: ||e^(it(Delta_x + m)) h||_(L^4 L^4) = {:.15}", mixed_norm_x(&fields, 1.0 / 16.0, 4.0, 4.0)?);
    }
    Ok(())
}
