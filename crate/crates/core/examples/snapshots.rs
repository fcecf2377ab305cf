//! Run configuration and the binary snapshot stream: write a short run,
//! read it back, and check it bit for bit.

use prodnls::cli::{initial_data, read_snapshots, write_snapshots, RunConfig};
use prodnls::solver::evolve;

fn main() -> prodnls::Result<()> {
    let mut cfg = RunConfig::parse("grid.points_per_axis = 16\ngrid.torus_modes = 4\nevolution.final_time = 0.25\n")?;
    cfg.apply_override("data.seed=5")?;
    print!("{}", cfg.emit());

    let (grid, _, f) = initial_data(&cfg)?;
    let ev = evolve(&f, &cfg.evolution()?)?;
    let traj = &ev.trajectory;
    let snaps: Vec<(f64, &_)> = traj.times().into_iter().zip(traj.fields()).collect();
    let path = std::env::temp_dir().join("prodnls_snapshots.bin");
    write_snapshots(&path, &grid, &cfg.hash(), &snaps)?;

    let back = read_snapshots(&path)?;
    let exact = back.snapshots.iter().zip(traj.fields()).all(|((_, a), b)| a == b);
    println!(
        "{} snapshots, {} bytes, hash matches: {}, bit-exact: {exact}",
        back.snapshots.len(),
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0),
        back.config_hash == cfg.hash()
    );
    Ok(())
}
