//! Reduced evolutions driven by a tabulated eigenbasis of the compact factor.
//! The table here is the real Fourier basis of T^1 saved to disk and loaded
//! back; any orthonormal table on the same nodes works the same way.

use prodnls::fields::random_data_in_band;
use prodnls::propagators::{free_propagate, table_decompose, table_free_propagate, EigenTable, TableField};
use prodnls::{make_grid, SobolevSpec, SpectralField};

fn table_field(f: &SpectralField) -> TableField {
    let g = f.grid();
    let mut data = f.coeffs().to_vec();
    g.lattice().inverse(&mut data, &g.y_axes());
    TableField { x_lattice: g.x_lattice(), points: g.y_len(), data }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn main() -> prodnls::Result<()> {
    let grid = make_grid(1, 1, 20.0, 64, 16, None)?;
    let table = EigenTable::torus(16, 7)?;
    println!("{} eigenfunctions on {} nodes, eigenvalues {:?}", table.count(), table.points(), table.eigenvalues());
    println!("orthonormality defect {:.2e}", table.orthonormality_defect());

    let path = std::env::temp_dir().join("prodnls_torus_table.bin");
    table.save(&path)?;
    let table = EigenTable::load(&path)?;

    let f = random_data_in_band(&grid, &SobolevSpec::full(0, 0.0), 1.0, 3.0, Some(7), 8)?;
    let slices = table_decompose(&table, &table_field(&f))?;
    let energy: Vec<f64> = slices.iter().map(|s| s.l2_norm().powi(2)).collect();
    println!("mass per eigenfunction {}", sci(&energy));

    for t in [0.25, 1.0, 3.0] {
        let by_table = table_free_propagate(&table, &table_field(&f), t)?;
        let by_fourier = table_field(&free_propagate(&f, t));
        let err = by_table
            .data
            .iter()
            .zip(&by_fourier.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        println!("t = {t}: max |table - Fourier| = {err:.2e}");
    }
    Ok(())
}
