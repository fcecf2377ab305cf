//! Batch front end: configuration files, snapshot and table output, and the
//! five commands.
//!
//! Every command reads a [`RunConfig`], writes its files into `output.dir`
//! (each through a temporary sibling and a rename) and embeds the config hash
//! and grid in every file. Exit codes: 0 success, 2 configuration or argument
//! error, 3 numerical abort, 4 Picard non-convergence, 5 self-test failure,
//! 1 anything else.

pub mod config;
pub mod selftest;
pub mod snapshot;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::RunConfig;
pub use selftest::{run_selftest, InvariantResult, SelftestReport};
pub use snapshot::{read_snapshots, write_snapshots, SnapshotFile};

use crate::error::{Error, Result};
use crate::estimates::{
    algebra_scan, derivative_strichartz_scan, leibniz_scan, mixed_estimate_scan, strichartz_inhomogeneous_scan,
    strichartz_scan, trilinear_scan, with_refinement, Parity, RatioScanResult, ScanSetup,
};
use crate::fields::{hxy_norm, localized_small_data, random_small_data, MultiIndex, SobolevSpec};
use crate::lattice::{GridSpec, SpectralField};
use crate::mixednorms::{admissible_q, lq_l2, InnerBlock, PairKind};
use crate::scattering::{dispersive_decay_fit, extract_scattering_state};
use crate::solver::{boundary_mass_fraction, evolve, evolve_observed, picard_solve};

/// Write `bytes` to `path` via a temporary sibling and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;
pub const EXIT_SELFTEST: i32 = 5;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidGrid(_)
        | Error::InvalidArgument(_)
        | Error::InvalidExponent(_)
        | Error::MissingSplit
        | Error::MultiIndexLength { .. } => EXIT_CONFIG,
        Error::NumericalAbort { .. } => EXIT_ABORT,
        Error::NonConvergence(_) => EXIT_NONCONVERGENCE,
        _ => EXIT_OTHER,
    }
}

fn grid_json(grid: &GridSpec) -> serde_json::Value {
    serde_json::to_value(grid).expect("plain data")
}

fn grid_line(grid: &GridSpec) -> String {
    format!(
        "# grid n={} k={} box_length={:?} points_per_axis={} torus_modes={} split={}\n",
        grid.n,
        grid.k,
        grid.box_length,
        grid.points_per_axis,
        grid.torus_modes,
        grid.split_index.map_or("none".to_string(), |s| s.to_string())
    )
}

fn csv_preamble(cfg: &RunConfig, grid: &GridSpec, what: &str) -> String {
    format!("# prodnls {what}\n# config_hash {}\n{}", cfg.hash_hex(), grid_line(grid))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn prepare_output(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_atomic(&dir.join("config.txt"), cfg.emit().as_bytes())?;
    Ok(dir)
}

/// Grid, data space and initial datum of a run.
pub fn initial_data(cfg: &RunConfig) -> Result<(GridSpec, SobolevSpec, SpectralField)> {
    let grid = cfg.grid()?;
    let spec = cfg.space(&grid)?;
    let decay = cfg.decay_rate(&grid, &spec);
    let f = if cfg.localized() {
        localized_small_data(&grid, &spec, cfg.delta(), cfg.width(), decay, cfg.seed())?
    } else {
        random_small_data(&grid, &spec, cfg.delta(), decay, cfg.seed())?
    };
    Ok((grid, spec, f))
}

/// Files written by a command.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

impl Written {
    fn add(&mut self, path: PathBuf) -> &Path {
        self.files.push(path);
        self.files.last().expect("just pushed")
    }
}

fn norms_csv(cfg: &RunConfig, grid: &GridSpec, spec: &SobolevSpec, snaps: &[(f64, SpectralField)]) -> Result<String> {
    let q = cfg.simulate_q();
    let margin = cfg.evolution()?.boundary_margin;
    let mut out = csv_preamble(cfg, grid, "simulate norms");
    out.push_str(&format!("# space theta={} rho={:?} variant={:?}\n", spec.theta, spec.rho, spec.variant));
    out.push_str("t,l2,hxy,lq_l2,boundary_mass\n");
    for (t, u) in snaps {
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            t,
            u.l2_norm(),
            hxy_norm(u, spec)?,
            lq_l2(u, q, InnerBlock::Y)?,
            boundary_mass_fraction(u, margin)
        ));
    }
    Ok(out)
}

/// Split-step run: `snapshots.bin` and `norms.csv` (time, `L^2`,
/// `H^{theta,rho}`, `L^q_x L^2_y`, boundary mass). On an abort the snapshots
/// computed so far are still written.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Written> {
    let evo = cfg.evolution()?;
    let (grid, spec, f) = initial_data(cfg)?;
    let dir = prepare_output(cfg)?;
    let mut snaps: Vec<(f64, SpectralField)> = Vec::new();
    let run = evolve_observed(&f, &evo, |t, u| snaps.push((t, u.clone())));
    let mut written = Written::default();
    let refs: Vec<(f64, &SpectralField)> = snaps.iter().map(|(t, u)| (*t, u)).collect();
    write_snapshots(written.add(dir.join("snapshots.bin")), &grid, &cfg.hash(), &refs)?;
    write_atomic(written.add(dir.join("norms.csv")), norms_csv(cfg, &grid, &spec, &snaps)?.as_bytes())?;
    let ev = run?;
    if ev.max_boundary_mass() > 1e-6 {
        log::warn!("boundary mass reached {:.3e}; the periodic box is too small", ev.max_boundary_mass());
    }
    Ok(written)
}

/// Picard iteration: `picard_trace.json` always, `picard_trajectory.bin` on
/// convergence.
pub fn cmd_picard(cfg: &RunConfig) -> Result<Written> {
    let evo = cfg.evolution()?;
    let (grid, _, f) = initial_data(cfg)?;
    let settings = cfg.picard();
    let dir = prepare_output(cfg)?;
    let mut written = Written::default();
    let trace_json = |trace: &crate::solver::PicardTrace| {
        json!({
            "config_hash": cfg.hash_hex(),
            "grid": grid_json(&grid),
            "delta": cfg.delta(),
            "trace": trace,
        })
    };
    match picard_solve(&f, &evo, &settings) {
        Ok((u, trace)) => {
            write_json(written.add(dir.join("picard_trace.json")), &trace_json(&trace))?;
            let refs: Vec<(f64, &SpectralField)> = u.times().into_iter().zip(u.fields()).collect();
            write_snapshots(written.add(dir.join("picard_trajectory.bin")), &grid, &cfg.hash(), &refs)?;
            Ok(written)
        }
        Err(Error::NonConvergence(trace)) => {
            write_json(&dir.join("picard_trace.json"), &trace_json(&trace))?;
            Err(Error::NonConvergence(trace))
        }
        Err(e) => Err(e),
    }
}

/// Evolution, scattering-state extraction on the probe ladder and a
/// dispersive decay fit: `scatter_report.json` and `scattering_state.bin`.
pub fn cmd_scatter(cfg: &RunConfig) -> Result<Written> {
    let evo = cfg.evolution()?;
    let (grid, spec, f) = initial_data(cfg)?;
    let probes = cfg.probes();
    let dir = prepare_output(cfg)?;
    let ev = evolve(&f, &evo)?;
    let (f0, mut report) = extract_scattering_state(&ev.trajectory, &probes, &spec)?;
    let window = cfg.decay_window().unwrap_or((probes[0], evo.final_time));
    report.decay = Some(dispersive_decay_fit(&ev.trajectory, cfg.decay_q(), window)?);
    let mut written = Written::default();
    write_json(
        written.add(dir.join("scatter_report.json")),
        &json!({
            "config_hash": cfg.hash_hex(),
            "grid": grid_json(&grid),
            "delta": cfg.delta(),
            "max_boundary_mass": ev.max_boundary_mass(),
            "mass_drift": ev.mass_drift(),
            "report": report,
        }),
    )?;
    write_snapshots(written.add(dir.join("scattering_state.bin")), &grid, &cfg.hash(), &[(0.0, &f0)])?;
    Ok(written)
}

fn default_alpha(n: usize) -> MultiIndex {
    let order = n.saturating_sub(2) as u32 / 2;
    MultiIndex::of_order(n, order).into_iter().next().unwrap_or_else(|| MultiIndex::zero(n))
}

/// Dispatches `scan.id` to the estimates module.
pub fn run_scan(cfg: &RunConfig, setup: &ScanSetup) -> Result<RatioScanResult> {
    let n = setup.grid.n;
    let p = cfg.scan_p();
    let alpha = cfg.scan_alpha().unwrap_or_else(|| default_alpha(n));
    let q_for = |kind| cfg.scan_opt("q").map_or_else(|| admissible_q(n, p, kind), Ok);
    match cfg.scan_id() {
        "strichartz" => strichartz_scan(setup, p, q_for(PairKind::Strichartz)?, &cfg.scan_m_list()),
        "strichartz-inhomogeneous" => {
            let pt = cfg.scan_opt("p_tilde").unwrap_or(p);
            let qt = cfg
                .scan_opt("q_tilde")
                .map_or_else(|| admissible_q(n, pt, PairKind::Strichartz), Ok)?;
            strichartz_inhomogeneous_scan(setup, p, q_for(PairKind::Strichartz)?, pt, qt)
        }
        "derivative" => derivative_strichartz_scan(
            setup,
            &alpha,
            p,
            q_for(PairKind::Derivative(alpha.order()))?,
            &cfg.scan_m_list(),
        ),
        "mixed" => mixed_estimate_scan(
            setup,
            &alpha,
            cfg.scan_opt("r").unwrap_or(1.0),
            p,
            q_for(PairKind::Derivative(alpha.order()))?,
        ),
        "algebra" => algebra_scan(setup, cfg.scan_opt("s").unwrap_or(setup.grid.k as f64 / 2.0 + cfg.epsilon())),
        "leibniz" => leibniz_scan(setup),
        id @ ("trilinear-even" | "trilinear-odd") => {
            let want = if id == "trilinear-even" { Parity::Even } else { Parity::Odd };
            if Parity::of(n) != want {
                return Err(Error::Config(format!("scan `{id}` does not match grid.n = {n}")));
            }
            trilinear_scan(setup, cfg.epsilon())
        }
        other => Err(Error::Config(format!("unknown scan `{other}`"))),
    }
}

pub fn scan_setup(cfg: &RunConfig) -> Result<ScanSetup> {
    let mut setup = ScanSetup::new(cfg.grid()?, cfg.scan_samples(), cfg.seed());
    (setup.final_time, setup.time_steps) = cfg.scan_time();
    Ok(setup)
}

/// Ratio scan: `scan_<id>.csv` per sample and `scan_<id>.json` summary, plus
/// the refined pair when `scan.refine` is set.
pub fn cmd_scan(cfg: &RunConfig) -> Result<Written> {
    let setup = scan_setup(cfg)?;
    let id = cfg.scan_id().to_string();
    let dir = prepare_output(cfg)?;
    let (coarse, fine) = if cfg.scan_refine() {
        let (c, f) = with_refinement(&setup, |s| run_scan(cfg, s))?;
        (c, Some(f))
    } else {
        (run_scan(cfg, &setup)?, None)
    };
    let mut written = Written::default();
    let csv = |r: &RatioScanResult| format!("{}{}", csv_preamble(cfg, &r.grid, &format!("scan {id}")), r.to_csv());
    write_atomic(written.add(dir.join(format!("scan_{id}.csv"))), csv(&coarse).as_bytes())?;
    if let Some(fine) = &fine {
        write_atomic(written.add(dir.join(format!("scan_{id}_refined.csv"))), csv(fine).as_bytes())?;
    }
    write_json(
        written.add(dir.join(format!("scan_{id}.json"))),
        &json!({
            "config_hash": cfg.hash_hex(),
            "grid": grid_json(&setup.grid),
            "result": coarse.summary(),
            "refined": fine.as_ref().map(RatioScanResult::summary),
        }),
    )?;
    Ok(written)
}

/// Runs the invariant suite; `selftest.json` holds the verdict.
pub fn cmd_selftest(cfg: &RunConfig) -> Result<(SelftestReport, Written)> {
    let report = run_selftest();
    let dir = prepare_output(cfg)?;
    let mut written = Written::default();
    write_json(
        written.add(dir.join("selftest.json")),
        &serde_json::to_value(&report).expect("plain data"),
    )?;
    Ok((report, written))
}

#[derive(Parser, Debug)]
#[command(name = "prodnls", version, about = "Pseudospectral laboratory for cubic NLS on R^n x T^k")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (`output.dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed (`data.seed`).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Set any configuration key; `--grid.n 4` is shorthand for
    /// `--override grid.n=4`.
    #[arg(long = "override", value_name = "KEY=VAL")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split-step evolution with snapshots and per-time norms.
    Simulate(Common),
    /// Duhamel-Picard iteration with its trace.
    Picard(Common),
    /// Scattering-state extraction and dispersive decay fit.
    Scatter(Common),
    /// Ratio scan of one estimate.
    Scan(Common),
    /// Invariant suite at small sizes.
    Selftest(Common),
}

/// Rewrites `--a.b VAL` and `--a.b=VAL` into `--override a.b=VAL`.
fn expand_key_flags(args: Vec<String>) -> Vec<String> {
    let is_key = |k: &str| RunConfig::keys().any(|key| key == k);
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(rest) = a.strip_prefix("--") else {
            out.push(a);
            continue;
        };
        let (key, inline) = match rest.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (rest.to_string(), None),
        };
        if !is_key(&key) {
            out.push(a);
            continue;
        }
        let value = inline.or_else(|| it.next()).unwrap_or_default();
        out.push("--override".into());
        out.push(format!("{key}={value}"));
    }
    out
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = common.seed {
        cfg.set("data.seed", &seed.to_string())?;
    }
    if let Some(out) = &common.out {
        cfg.set("output.dir", &out.to_string_lossy())?;
    }
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("PRODNLS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("PRODNLS_THREADS must be a positive integer, got `{v}`")))?;
    if n == 0 {
        return Err(Error::Config("PRODNLS_THREADS must be at least 1".into()));
    }
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("global thread pool already initialised");
    }
    Ok(())
}

fn run(command: Command) -> Result<i32> {
    configure_threads()?;
    match command {
        Command::Simulate(c) => report_files(cmd_simulate(&load_config(&c)?)?),
        Command::Picard(c) => report_files(cmd_picard(&load_config(&c)?)?),
        Command::Scatter(c) => report_files(cmd_scatter(&load_config(&c)?)?),
        Command::Scan(c) => report_files(cmd_scan(&load_config(&c)?)?),
        Command::Selftest(c) => {
            let (report, written) = cmd_selftest(&load_config(&c)?)?;
            for r in report.failures() {
                eprintln!("FAIL {}/{}: slack {:?} > {:e}", r.module, r.invariant, r.slack, r.tolerance);
            }
            println!("{}", serde_json::to_string(&report)?);
            report_files(written)?;
            Ok(if report.pass { EXIT_OK } else { EXIT_SELFTEST })
        }
    }
}

fn report_files(w: Written) -> Result<i32> {
    for f in &w.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command; returns
/// the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = String>) -> i32 {
    let args = expand_key_flags(args.into_iter().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_flags_become_overrides() {
        let args: Vec<String> = ["prodnls", "scan", "--grid.n", "4", "--scan.id=leibniz", "--seed", "3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(
            expand_key_flags(args),
            ["prodnls", "scan", "--override", "grid.n=4", "--override", "scan.id=leibniz", "--seed", "3"]
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::NumericalAbort { time: 1.0, reason: "x".into() }), EXIT_ABORT);
        assert_eq!(exit_code(&Error::ZeroDenominator), EXIT_OTHER);
    }
}
