//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- 3 5`.

use std::f64::consts::PI;
use std::time::Instant;

use prodnls::cli::run_selftest;
use prodnls::estimates::{
    algebra_scan, derivative_strichartz_scan, leibniz_scan, mixed_estimate_scan, strichartz_inhomogeneous_scan,
    strichartz_scan, trilinear_scan, with_refinement, RatioScanResult, ScanSetup,
};
use prodnls::fields::{localized_small_data, random_lattice_field, random_small_data, MultiIndex};
use prodnls::lattice::{make_grid, GridSpec, SpectralField};
use prodnls::mixednorms::mixed_norm_x;
use prodnls::propagators::mutation::with_flipped_propagator_sign;
use prodnls::propagators::{
    free_propagate, free_propagate_by_modes, free_propagate_by_partial_fourier, modulated_propagate_x,
};
use prodnls::scattering::{dispersive_decay_fit, extract_scattering_state};
use prodnls::solver::{energy, evolve, free_trajectory, picard_solve, EvolutionConfig, PicardSettings};
use prodnls::{Result, SobolevSpec};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).expect("same grid").l2_norm() / b.l2_norm()
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Least-squares slope of `log y` against `log x`.
fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Data of the nonlinear runs: a localized bump with `H^{0, k/2 + 0.1}` norm `delta`.
fn nonlinear_data(grid: &GridSpec, delta: f64) -> Result<SpectralField> {
    let spec = SobolevSpec::theorem_space(grid, 0.1)?;
    localized_small_data(grid, &spec, delta, 2.0, 3.0, 2024)
}

fn criterion_1() -> Result<Verdict> {
    let g1 = make_grid(1, 1, 16.0, 64, 16, None)?;
    let f1 = random_small_data(&g1, &SobolevSpec::full(0, 0.0), 1.0, 1.5, 1)?;
    let start = Instant::now();
    let d1 = rel(&free_propagate_by_modes(&f1, 1.3)?, &free_propagate(&f1, 1.3));
    let t1 = start.elapsed().as_secs_f64();

    let g3 = make_grid(3, 1, 16.0, 32, 8, Some(2))?;
    let f3 = random_small_data(&g3, &SobolevSpec::full(0, 0.0), 1.0, 1.5, 2)?;
    let start = Instant::now();
    let d3 = rel(&free_propagate_by_partial_fourier(&f3, 1.3)?, &free_propagate(&f3, 1.3));
    let t3 = start.elapsed().as_secs_f64();
    verdict(
        d1 <= 1e-12 && t1 < 1.0 && d3 <= 1e-12 && t3 < 30.0,
        format!("R1xT1 64x16: {d1:.2e} in {t1:.3}s (<= 1e-12, < 1s); R3xT1 32^3x8: {d3:.2e} in {t3:.2}s (<= 1e-12, < 30s)"),
    )
}

fn criterion_2() -> Result<Verdict> {
    let mut worst = 0.0f64;
    for (n, alpha, q) in [(2usize, 0u32, 4.0), (4, 1, 8.0 / 3.0)] {
        let g = make_grid(n, 1, 12.0, if n == 2 { 64 } else { 16 }, 4, None)?;
        let h = random_lattice_field(&g.x_lattice(), 2.0, None, 3)?;
        let a = MultiIndex::of_order(n, alpha)[0].clone();
        let norms = [-10.0, 0.0, 10.0]
            .iter()
            .map(|&m| {
                let traj = (0..=16)
                    .map(|j| prodnls::fields::apply_dx_lattice(&modulated_propagate_x(&h, j as f64 / 16.0, m), &a))
                    .collect::<Result<Vec<_>>>()?;
                mixed_norm_x(&traj, 1.0 / 16.0, 4.0, q)
            })
            .collect::<Result<Vec<f64>>>()?;
        let hi = norms.iter().copied().fold(f64::MIN, f64::max);
        let lo = norms.iter().copied().fold(f64::MAX, f64::min);
        worst = worst.max((hi - lo) / hi);
    }
    verdict(worst <= 1e-12, format!("relative spread over m in {{-10,0,10}}: {worst:.2e} (<= 1e-12)"))
}

fn criterion_3() -> Result<Verdict> {
    let g = make_grid(2, 1, 16.0 * PI, 64, 8, None)?;
    let f = nonlinear_data(&g, 0.1)?;
    let dts = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let mut errors = Vec::new();
    for &dt in &dts {
        let coarse = evolve(&f, &EvolutionConfig::new(1.0, 1.0, dt))?;
        let fine = evolve(&f, &EvolutionConfig::new(1.0, 1.0, dt / 64.0))?;
        let (uc, uf) = (coarse.trajectory.fields(), fine.trajectory.fields());
        errors.push(rel(&uc[uc.len() - 1], &uf[uf.len() - 1]));
    }
    let slope = log_slope(&dts, &errors);
    verdict(
        (slope - 2.0).abs() <= 0.1,
        format!("self-convergence slope {slope:.3} (2.0 +- 0.1), errors {}", sci(&errors)),
    )
}

fn criterion_4() -> Result<Verdict> {
    let g = make_grid(2, 1, 8.0 * PI, 32, 8, None)?;
    let f = nonlinear_data(&g, 2.0)?;
    let dts = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let mut mass = 0.0f64;
    let mut drifts = Vec::new();
    for &dt in &dts {
        let ev = evolve(&f, &EvolutionConfig::new(1.0, 1.0, dt))?;
        mass = mass.max(ev.mass_drift() / ev.mass[0]);
        let e0 = energy(&f, 1.0);
        let drift = ev
            .trajectory
            .fields()
            .iter()
            .map(|u| (energy(u, 1.0) - e0).abs())
            .fold(0.0, f64::max);
        drifts.push(drift / e0.abs());
    }
    let exponent = log_slope(&dts, &drifts);
    verdict(
        mass <= 1e-12 && exponent >= 1.8,
        format!("relative mass drift {mass:.2e} (<= 1e-12); energy drift exponent {exponent:.3} (>= 1.8), drifts {}", sci(&drifts)),
    )
}

fn criterion_5() -> Result<Verdict> {
    let g = make_grid(2, 1, 32.0 * PI, 64, 8, None)?;
    let cfg = EvolutionConfig::new(1.0, 1.0, 1.0 / 64.0);
    let settings = PicardSettings::default();
    let start = Instant::now();
    let f = nonlinear_data(&g, 1e-2)?;
    let (u, trace) = picard_solve(&f, &cfg, &settings)?;
    let oracle = evolve(&f, &cfg)?;
    let err = u.relative_l2_error(&oracle.trajectory)?;
    let elapsed = start.elapsed().as_secs_f64();
    let (_, half) = picard_solve(&nonlinear_data(&g, 5e-3)?, &cfg, &settings)?;
    let max_ratio = trace.ratios.iter().copied().fold(0.0, f64::max);
    let monotone = half.ratios.iter().zip(&trace.ratios).all(|(h, r)| h <= r);
    verdict(
        trace.converged && trace.iterations <= 8 && max_ratio < 0.5 && err <= 1e-3 && elapsed < 300.0 && monotone,
        format!(
            "{} iterations (<= 8), max ratio {max_ratio:.2e} (< 0.5), oracle error {err:.2e} (<= 1e-3), {elapsed:.1}s (< 300s); \
             ratios {}, at delta/2 {} (no increase: {monotone})",
            trace.iterations,
            sci(&trace.ratios),
            sci(&half.ratios)
        ),
    )
}

fn criterion_6() -> Result<Verdict> {
    let delta = 1e-2;
    let g = make_grid(2, 1, 64.0 * PI, 128, 8, None)?;
    let spec = SobolevSpec::theorem_space(&g, 0.1)?;
    let start = Instant::now();
    let f = nonlinear_data(&g, delta)?;
    let ev = evolve(&f, &EvolutionConfig::new(1.0, 16.0, 1.0 / 16.0).with_stride(4))?;
    let (_, rep) = extract_scattering_state(&ev.trajectory, &[2.0, 4.0, 8.0, 16.0], &spec)?;
    let elapsed = start.elapsed().as_secs_f64();
    let boundary = ev.max_boundary_mass();
    verdict(
        rep.strictly_decreasing && rep.terminal_error < 0.1 * delta && boundary < 1e-6 && elapsed < 1800.0,
        format!(
            "Cauchy differences {} (strictly decreasing), terminal error {:.2e} (< {:.0e}), boundary mass {boundary:.2e} (< 1e-6), {elapsed:.1}s",
            sci(&rep.cauchy_differences),
            rep.terminal_error,
            0.1 * delta
        ),
    )
}

fn criterion_7() -> Result<Verdict> {
    let g = make_grid(2, 1, 64.0 * PI, 256, 4, None)?;
    let spec = SobolevSpec::theorem_space(&g, 0.1)?;
    let f = localized_small_data(&g, &spec, 1e-2, 1.0, 3.0, 7)?;
    let traj = free_trajectory(&f, &EvolutionConfig::new(0.0, 10.0, 0.5))?;
    let fit = dispersive_decay_fit(&traj, 4.0, (2.0, 10.0))?;
    verdict(
        (fit.slope + 0.5).abs() <= 0.15,
        format!("L^4_x L^2_y decay slope {:.3} over [2, 10] (-0.5 +- 0.15), fit rms {:.1e}", fit.slope, fit.residual),
    )
}

fn scan_line(label: &str, coarse: &RatioScanResult, fine: &RatioScanResult, extra: &[(&str, f64, f64)]) -> (bool, String) {
    let delta = coarse.stability_delta.unwrap_or(f64::INFINITY);
    let mut pass = coarse.all_finite() && fine.all_finite() && delta <= 0.2;
    let mut s = format!(
        "{label}: max {:.4} -> {:.4}, delta {:.1}%",
        coarse.max_ratio,
        fine.max_ratio,
        100.0 * delta
    );
    for &(name, value, tol) in extra {
        pass &= value <= tol;
        s.push_str(&format!(", {name} {value:.1e}"));
    }
    if !pass {
        s.push_str(" [FAIL]");
    }
    (pass, s)
}

fn criterion_8() -> Result<Verdict> {
    const SAMPLES: usize = 100;
    let g2 = make_grid(2, 1, 4.0 * PI, 16, 8, None)?;
    let g3 = make_grid(3, 1, 4.0 * PI, 8, 8, Some(2))?;
    let g4 = make_grid(4, 1, 4.0 * PI, 8, 8, None)?;
    let s2 = ScanSetup::new(g2, SAMPLES, 1);
    let s3 = ScanSetup::new(g3, SAMPLES, 2);
    let s4 = ScanSetup::new(g4, SAMPLES, 3);
    let alpha4 = MultiIndex(vec![1, 0, 0, 0]);
    let zero2 = MultiIndex::zero(2);
    let ms = [-10.0, 0.0, 10.0];

    let mut lines = Vec::new();
    let mut pass = true;
    let mut clock = Instant::now();
    let mut record = |r: (bool, String)| {
        pass &= r.0;
        lines.push(format!("{} ({:.0}s)", r.1, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let (c, f) = with_refinement(&s2, |s| strichartz_scan(s, 4.0, 4.0, &ms))?;
    let gap = c.checks["minkowski_max_gap"].max(f.checks["minkowski_max_gap"]);
    let spread = c.checks["m_independence_spread"].max(f.checks["m_independence_spread"]);
    record(scan_line("strichartz (4,4)", &c, &f, &[("minkowski gap", gap, 1e-12), ("m-spread", spread, 1e-12)]));

    let (c, f) = with_refinement(&s2, |s| strichartz_inhomogeneous_scan(s, 4.0, 4.0, 4.0, 4.0))?;
    record(scan_line("inhomogeneous (4,4;4,4)", &c, &f, &[]));

    let (c, f) = with_refinement(&s4, |s| derivative_strichartz_scan(s, &alpha4, 4.0, 8.0 / 3.0, &ms))?;
    let spread = c.checks["m_independence_spread"].max(f.checks["m_independence_spread"]);
    record(scan_line("derivative n=4 |a|=1 (4,8/3)", &c, &f, &[("m-spread", spread, 1e-12)]));

    let (c, f) = with_refinement(&s2, |s| mixed_estimate_scan(s, &zero2, 0.6, 4.0, 4.0))?;
    let red = c.checks["r_reduction_max_diff"].max(f.checks["r_reduction_max_diff"]);
    record(scan_line("mixed n=2 r=0.6", &c, &f, &[("r-reduction", red, 1e-12)]));

    let (c, f) = with_refinement(&s2, |s| algebra_scan(s, 0.6))?;
    record(scan_line("algebra k=1 s=0.6", &c, &f, &[]));

    let (c, f) = with_refinement(&s4, leibniz_scan)?;
    let res = c.max_ratio.max(f.max_ratio);
    let ok = c.all_finite() && f.all_finite() && res <= 1e-10;
    record((ok, format!("leibniz n=4 |b|=1: residual {res:.1e}{}", if ok { "" } else { " [FAIL]" })));

    for (label, setup) in [("trilinear even n=2", &s2), ("trilinear odd n=3", &s3)] {
        let (c, f) = with_refinement(setup, |s| trilinear_scan(s, 0.1))?;
        let gap = c.checks["holder_max_gap"].max(f.checks["holder_max_gap"]);
        record(scan_line(label, &c, &f, &[("holder gap", gap, 1e-12)]));
    }
    verdict(pass, format!("{SAMPLES} samples per scan; {}", lines.join("; ")))
}

fn criterion_9() -> Result<Verdict> {
    let clean = run_selftest();
    let mutated = with_flipped_propagator_sign(run_selftest);
    let caught: Vec<String> = mutated
        .failures()
        .map(|r| format!("{}/{}", r.module, r.invariant))
        .collect();
    verdict(
        clean.pass && !mutated.pass,
        format!("clean selftest pass: {}; mutated selftest pass: {} (failed: {})", clean.pass, mutated.pass, caught.join(", ")),
    )
}

const CRITERIA: &[(u32, &str, fn() -> Result<Verdict>)] = &[
    (1, "mode-reduction equivalence", criterion_1),
    (2, "modulation uniformity", criterion_2),
    (3, "integrator order", criterion_3),
    (4, "conservation", criterion_4),
    (5, "picard construction", criterion_5),
    (6, "scattering", criterion_6),
    (7, "dispersive decay", criterion_7),
    (8, "inequality scans", criterion_8),
    (9, "negative control", criterion_9),
];

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for &(id, name, run) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {id} {} {name}: {detail} [{secs:.1}s]", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
