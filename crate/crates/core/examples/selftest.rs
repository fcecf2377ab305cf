//! The invariant suite, clean and with the propagator sign flipped.

use prodnls::cli::run_selftest;
use prodnls::propagators::mutation::with_flipped_propagator_sign;

fn main() {
    let clean = run_selftest();
    for r in &clean.results {
        println!("{:<5} {:<12} {:<32} slack {:.1e}", if r.pass { "ok" } else { "FAIL" }, r.module, r.invariant, r.slack.unwrap_or(f64::NAN));
    }
    let mutated = with_flipped_propagator_sign(run_selftest);
    println!("\nwith the sign flipped: pass = {}", mutated.pass);
    for r in mutated.failures() {
        println!("  caught by {}/{} (slack {:.1e})", r.module, r.invariant, r.slack.unwrap_or(f64::NAN));
    }
}
