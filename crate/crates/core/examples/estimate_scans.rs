//! Ratio scans for the linear and multilinear estimates on a small ensemble,
//! each repeated on a doubled grid.

use prodnls::estimates::{
    algebra_scan, leibniz_scan, mixed_estimate_scan, strichartz_scan, trilinear_scan, with_refinement, ScanSetup,
};
use prodnls::{make_grid, MultiIndex};

fn main() -> prodnls::Result<()> {
    let g2 = make_grid(2, 1, 4.0 * std::f64::consts::PI, 16, 8, None)?;
    let setup = ScanSetup::new(g2, 10, 1);
    let runs = [
        with_refinement(&setup, |s| strichartz_scan(s, 4.0, 4.0, &[-10.0, 0.0, 10.0]))?,
        with_refinement(&setup, |s| mixed_estimate_scan(s, &MultiIndex::zero(2), 0.6, 4.0, 4.0))?,
        with_refinement(&setup, |s| algebra_scan(s, 0.6))?,
        with_refinement(&setup, |s| trilinear_scan(s, 0.1))?,
    ];
    for (coarse, fine) in &runs {
        println!(
            "{:<12} max ratio {:.5} -> {:.5} (delta {:.2}%), checks {:?}",
            coarse.id,
            coarse.max_ratio,
            fine.max_ratio,
            100.0 * coarse.stability_delta.unwrap_or(f64::NAN),
            coarse.checks
        );
    }

    let g4 = make_grid(4, 1, 4.0 * std::f64::consts::PI, 8, 8, None)?;
    let res = leibniz_scan(&ScanSetup::new(g4, 3, 2))?;
    println!("leibniz residual {:.2e}", res.max_ratio);
    print!("{}", res.to_csv());
    Ok(())
}
