//! Invariant suite behind the `selftest` command. Every check runs on grids
//! of at most 32 points per axis with fixed seeds, so the verdict is
//! reproducible.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::snapshot::{decode_snapshots, encode_snapshots};
use crate::error::Result;
use crate::estimates::{leibniz_scan, strichartz_scan, trilinear_scan, ScanSetup};
use crate::fields::{random_data_in_band, random_lattice_field, random_small_data, SobolevSpec};
use crate::lattice::{from_spectral, make_grid, to_spectral, GridSpec, SpectralField};
use crate::mixednorms::mixed_norm_x;
use crate::propagators::{free_propagate, free_propagate_by_modes, free_propagate_by_partial_fourier, modulated_propagate_x};
use crate::scattering::pullback;
use crate::solver::{evolve, free_trajectory, picard_solve, EvolutionConfig, PicardSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub module: String,
    pub invariant: String,
    /// Observed defect; `None` when the check itself failed to run.
    pub slack: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub pass: bool,
    pub results: Vec<InvariantResult>,
}

impl SelftestReport {
    pub fn failures(&self) -> impl Iterator<Item = &InvariantResult> {
        self.results.iter().filter(|r| !r.pass)
    }
}

type Check = fn() -> Result<f64>;

const CHECKS: &[(&str, &str, f64, Check)] = &[
    ("lattice", "spectral round trip", 1e-13, lattice_round_trip),
    ("lattice", "parseval", 1e-13, lattice_parseval),
    ("propagators", "unitarity", 1e-13, propagator_unitarity),
    ("propagators", "group law", 1e-12, propagator_group_law),
    ("propagators", "group law across routes", 1e-12, propagator_mixed_group_law),
    ("propagators", "symbol of a pure mode", 1e-13, propagator_symbol),
    ("propagators", "linear equation residual", 1e-5, propagator_linear_equation),
    ("propagators", "mode reduction equivalence", 1e-12, mode_reduction),
    ("propagators", "partial Fourier equivalence", 1e-12, partial_fourier_reduction),
    ("mixednorms", "modulation independence", 1e-12, modulation_independence),
    ("mixednorms", "minkowski ordering", 1e-12, minkowski_ordering),
    ("mixednorms", "holder ordering", 1e-12, holder_ordering),
    ("solver", "split-step mass conservation", 1e-12, split_step_mass),
    ("solver", "linear picard is the free flow", 1e-13, linear_picard),
    ("solver", "picard matches split-step", 1e-3, picard_vs_split_step),
    ("scattering", "free pullbacks are constant", 1e-12, free_pullbacks),
    ("estimates", "leibniz expansion", 1e-10, leibniz_expansion),
    ("cli", "config round trip", 0.0, config_round_trip),
    ("cli", "snapshot round trip", 0.0, snapshot_round_trip),
];

pub fn run_selftest() -> SelftestReport {
    let results: Vec<InvariantResult> = CHECKS
        .iter()
        .map(|&(module, invariant, tolerance, check)| {
            let (slack, error) = match check() {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let pass = slack.is_some_and(|s| s <= tolerance);
            if !pass {
                log::warn!("selftest: {module}/{invariant} failed (slack {slack:?}, tolerance {tolerance})");
            }
            InvariantResult {
                module: module.into(),
                invariant: invariant.into(),
                slack,
                tolerance,
                pass,
                error,
            }
        })
        .collect();
    SelftestReport {
        pass: results.iter().all(|r| r.pass),
        results,
    }
}

fn rel(a: &SpectralField, b: &SpectralField) -> Result<f64> {
    Ok(a.sub(b)?.l2_norm() / b.l2_norm())
}

fn grid2() -> GridSpec {
    make_grid(2, 1, 2.0 * PI, 16, 8, None).expect("static grid")
}

fn data2(seed: u64) -> Result<SpectralField> {
    let g = grid2();
    random_data_in_band(&g, &SobolevSpec::full(0, 0.0), 1.0, 2.0, Some(2), seed)
}

fn lattice_round_trip() -> Result<f64> {
    let f = data2(1)?;
    rel(&to_spectral(&from_spectral(&f), f.grid())?, &f)
}

fn lattice_parseval() -> Result<f64> {
    let f = data2(2)?;
    let g = f.grid();
    let dv = g.x_spacing().powi(g.n as i32) * (2.0 * PI / g.torus_modes as f64).powi(g.k as i32);
    let physical = (from_spectral(&f).iter().map(|v| v.norm_sqr()).sum::<f64>() * dv).sqrt();
    Ok((physical - f.l2_norm()).abs() / f.l2_norm())
}

fn propagator_unitarity() -> Result<f64> {
    let f = data2(3)?;
    Ok((free_propagate(&f, 0.7).l2_norm() - f.l2_norm()).abs() / f.l2_norm())
}

fn propagator_group_law() -> Result<f64> {
    let f = data2(4)?;
    rel(&free_propagate(&free_propagate(&f, 0.3), 0.45), &free_propagate(&f, 0.75))
}

fn propagator_mixed_group_law() -> Result<f64> {
    let f = data2(5)?;
    rel(&free_propagate_by_modes(&free_propagate(&f, 0.3), 0.45)?, &free_propagate(&f, 0.75))
}

fn propagator_symbol() -> Result<f64> {
    let g = grid2();
    let (xi, m) = ([1i64, -2], [3i64]);
    let f = SpectralField::pure_mode(&g, &xi, &m, Complex64::new(1.0, 0.0))?;
    let t = 0.37;
    let w = 2.0 * PI / g.box_length;
    let omega = (w * xi[0] as f64).powi(2) + (w * xi[1] as f64).powi(2) + (m[0] * m[0]) as f64;
    let expected = Complex64::from_polar(1.0, -omega * t);
    let got = free_propagate(&f, t);
    let slot = g.index_of(&xi, &m)?;
    let off: f64 = got
        .coeffs()
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != slot)
        .map(|(_, c)| c.norm())
        .sum();
    Ok((got.coeffs()[slot] - expected).norm() + off)
}

/// `i d_t u + Delta u` by a centred difference in time.
fn propagator_linear_equation() -> Result<f64> {
    let f = data2(6)?;
    let (t, h) = (0.2, 1e-4);
    let up = free_propagate(&f, t + h);
    let um = free_propagate(&f, t - h);
    let u = free_propagate(&f, t);
    let w2 = f.grid().lattice().squared_wavenumber();
    let i = Complex64::new(0.0, 1.0);
    let (mut res, mut scale) = (0.0, 0.0);
    for j in 0..w2.len() {
        let lap = -w2[j] * u.coeffs()[j];
        let dt = (up.coeffs()[j] - um.coeffs()[j]) / (2.0 * h);
        res += (i * dt + lap).norm_sqr();
        scale += lap.norm_sqr();
    }
    Ok((res / scale).sqrt())
}

fn mode_reduction() -> Result<f64> {
    let g = make_grid(1, 1, 8.0, 32, 8, None)?;
    let f = random_small_data(&g, &SobolevSpec::full(0, 0.0), 1.0, 2.0, 7)?;
    rel(&free_propagate_by_modes(&f, 0.9)?, &free_propagate(&f, 0.9))
}

fn partial_fourier_reduction() -> Result<f64> {
    let g = make_grid(3, 1, 8.0, 8, 4, Some(2))?;
    let f = random_small_data(&g, &SobolevSpec::full(0, 0.0), 1.0, 2.0, 8)?;
    rel(&free_propagate_by_partial_fourier(&f, 0.9)?, &free_propagate(&f, 0.9))
}

fn modulation_independence() -> Result<f64> {
    let g = grid2();
    let h = random_lattice_field(&g.x_lattice(), 2.0, Some(3), 9)?;
    let norms = [-10.0, 0.0, 10.0]
        .iter()
        .map(|&m| {
            let traj: Vec<_> = (0..=8).map(|j| modulated_propagate_x(&h, 0.125 * j as f64, m)).collect();
            mixed_norm_x(&traj, 0.125, 4.0, 4.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let hi = norms.iter().copied().fold(f64::MIN, f64::max);
    let lo = norms.iter().copied().fold(f64::MAX, f64::min);
    Ok((hi - lo) / hi)
}

fn small_scan_setup(grid: GridSpec, samples: usize) -> ScanSetup {
    ScanSetup::new(grid, samples, 11)
}

fn minkowski_ordering() -> Result<f64> {
    let res = strichartz_scan(&small_scan_setup(grid2(), 3), 4.0, 4.0, &[-10.0, 0.0, 10.0])?;
    Ok(res.checks["minkowski_max_gap"].max(0.0))
}

fn holder_ordering() -> Result<f64> {
    let res = trilinear_scan(&small_scan_setup(grid2(), 2), 0.1)?;
    Ok(res.checks["holder_max_gap"].max(0.0))
}

fn split_step_mass() -> Result<f64> {
    let f = data2(12)?.scale(Complex64::new(0.5, 0.0));
    let ev = evolve(&f, &EvolutionConfig::new(1.0, 0.25, 1.0 / 64.0))?;
    Ok(ev.mass_drift() / ev.mass[0])
}

fn linear_picard() -> Result<f64> {
    let f = data2(13)?;
    let cfg = EvolutionConfig::new(0.0, 0.25, 1.0 / 32.0);
    let (u, trace) = picard_solve(&f, &cfg, &PicardSettings::default())?;
    let free = free_trajectory(&f, &cfg)?;
    let extra = if trace.iterations == 1 { 0.0 } else { 1.0 };
    Ok(u.relative_l2_error(&free)? + extra)
}

fn picard_vs_split_step() -> Result<f64> {
    let g = grid2();
    let spec = SobolevSpec::theorem_space(&g, 0.1)?;
    let f = random_small_data(&g, &spec, 0.05, 3.0, 14)?;
    let cfg = EvolutionConfig::new(1.0, 0.25, 1.0 / 64.0);
    let (u, _) = picard_solve(&f, &cfg, &PicardSettings::default())?;
    let ev = evolve(&f, &cfg)?;
    u.relative_l2_error(&ev.trajectory)
}

fn free_pullbacks() -> Result<f64> {
    let f = data2(15)?;
    let traj = free_trajectory(&f, &EvolutionConfig::new(0.0, 1.0, 0.25))?;
    [0.25, 0.5, 1.0]
        .iter()
        .map(|&t| rel(&pullback(&traj, t)?, &f))
        .try_fold(0.0f64, |acc, r| Ok(acc.max(r?)))
}

fn leibniz_expansion() -> Result<f64> {
    let g = make_grid(4, 1, 2.0 * PI, 8, 8, None)?;
    Ok(leibniz_scan(&small_scan_setup(g, 2))?.max_ratio)
}

fn config_round_trip() -> Result<f64> {
    let mut cfg = RunConfig::default();
    cfg.apply_override("data.delta=0.003")?;
    cfg.apply_override("scan.m_list=-1,0.5")?;
    let text = cfg.emit();
    let again = RunConfig::parse(&text)?;
    Ok(if again == cfg && again.emit() == text { 0.0 } else { 1.0 })
}

fn snapshot_round_trip() -> Result<f64> {
    let f = data2(16)?;
    let bytes = encode_snapshots(f.grid(), &[3; 32], &[(0.5, &f)])?;
    let back = decode_snapshots(&bytes[..])?;
    Ok(if back.snapshots[0].1 == f && back.snapshots[0].0 == 0.5 { 0.0 } else { 1.0 })
}
