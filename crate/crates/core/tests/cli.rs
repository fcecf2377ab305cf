use std::path::Path;

use prodnls::cli::{main_with_args, read_snapshots, RunConfig, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_OK};
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["prodnls".to_string()];
    v.extend(args.iter().map(|s| s.to_string()));
    main_with_args(v)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &[&str] = &[
    "--grid.points_per_axis",
    "16",
    "--grid.torus_modes",
    "4",
    "--grid.box_length",
    "20.0",
    "--evolution.final_time",
    "0.25",
    "--evolution.dt",
    "0.03125",
];

fn with_small<'a>(cmd: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut a = vec![cmd, "--out", out];
    a.extend_from_slice(SMALL);
    a.extend_from_slice(extra);
    a
}

fn norms_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn simulate_free_run_has_constant_norms_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());
    assert_eq!(run(&with_small("simulate", a, &["--evolution.kappa", "0"])), EXIT_OK);
    assert_eq!(run(&with_small("simulate", b, &["--evolution.kappa", "0"])), EXIT_OK);
    let csv_a = std::fs::read(Path::new(a).join("norms.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(Path::new(b).join("norms.csv")).unwrap());
    assert_eq!(
        std::fs::read(Path::new(a).join("snapshots.bin")).unwrap(),
        std::fs::read(Path::new(b).join("snapshots.bin")).unwrap()
    );

    let rows = norms_rows(&Path::new(a).join("norms.csv"));
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert!((r[1] - rows[0][1]).abs() <= 1e-12 * rows[0][1]);
        assert!((r[2] - rows[0][2]).abs() <= 1e-12 * rows[0][2]);
    }

    let cfg = RunConfig::load(&Path::new(a).join("config.txt")).unwrap();
    let text = std::fs::read_to_string(Path::new(a).join("norms.csv")).unwrap();
    assert!(text.contains(&format!("# config_hash {}", cfg.hash_hex())));
    assert!(text.contains("# grid n=2 k=1"));
    let snaps = read_snapshots(&Path::new(a).join("snapshots.bin")).unwrap();
    assert_eq!(snaps.config_hash, cfg.hash());
    assert_eq!(snaps.snapshots.len(), 9);
    assert_eq!(snaps.snapshots[8].0, 0.25);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(&cfg_path, "# small run\ngrid.points_per_axis = 16\ngrid.torus_modes = 4\nevolution.final_time = 0.125\nevolution.dt = 0.0625\n").unwrap();
    let out = dir.path().join("o");
    let code = run(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "17",
        "--override",
        "data.delta=0.02",
    ]);
    assert_eq!(code, EXIT_OK);
    let cfg = RunConfig::load(&out.join("config.txt")).unwrap();
    assert_eq!(cfg.seed(), 17);
    assert_eq!(cfg.delta(), 0.02);
    assert_eq!(cfg.get("evolution.final_time"), "0.125");
    assert_eq!(RunConfig::parse(&cfg.emit()).unwrap().emit(), cfg.emit());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    assert_eq!(run(&["simulate", "--out", out, "--override", "grid.n=banana"]), EXIT_CONFIG);
    assert_eq!(run(&["simulate", "--out", out, "--override", "no.such=1"]), EXIT_CONFIG);
    assert_eq!(run(&["simulate", "--out", out, "--evolution.dt", "0.3"]), EXIT_CONFIG);
    assert_eq!(run(&["frobnicate"]), EXIT_CONFIG);
    assert_eq!(run(&["simulate", "--config", "/nonexistent/run.cfg"]), 1);
}

#[test]
fn picard_linear_and_divergent() {
    let dir = tempfile::tempdir().unwrap();
    let lin = dir.path().join("lin");
    assert_eq!(run(&with_small("picard", lin.to_str().unwrap(), &["--evolution.kappa", "0"])), EXIT_OK);
    let trace = json(&lin.join("picard_trace.json"));
    assert_eq!(trace["trace"]["iterations"], 1);
    assert!(lin.join("picard_trajectory.bin").exists());

    let big = dir.path().join("big");
    let args = [
        "picard",
        "--out",
        big.to_str().unwrap(),
        "--data.profile",
        "random",
        "--grid.box_length",
        "4.0",
        "--grid.points_per_axis",
        "16",
        "--grid.torus_modes",
        "4",
        "--evolution.dt",
        "0.03125",
        "--data.delta",
        "10",
        "--picard.max_iter",
        "20",
    ];
    assert_eq!(run(&args), EXIT_NONCONVERGENCE);
    let trace = json(&big.join("picard_trace.json"));
    assert_eq!(trace["trace"]["converged"], false);
    assert!(!big.join("picard_trajectory.bin").exists());
}

#[test]
fn scatter_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let args = [
        "scatter",
        "--out",
        out.to_str().unwrap(),
        "--grid.box_length",
        "50.26548245743669",
        "--grid.points_per_axis",
        "64",
        "--grid.torus_modes",
        "4",
        "--evolution.final_time",
        "8.0",
        "--evolution.dt",
        "0.0625",
        "--evolution.stride",
        "4",
        "--scatter.probes",
        "1,2,4,8",
        "--data.delta",
        "0.3",
        "--data.width",
        "1.5",
        "--data.decay_rate",
        "2.0",
        "--seed",
        "2",
    ];
    assert_eq!(run(&args), EXIT_OK);
    let rep = json(&out.join("scatter_report.json"));
    assert_eq!(rep["report"]["cauchy_differences"].as_array().unwrap().len(), 3);
    assert_eq!(rep["report"]["strictly_decreasing"], true);
    assert!(rep["report"]["decay"]["slope"].as_f64().unwrap() < 0.0);
    assert!(rep["config_hash"].as_str().unwrap().len() == 64);
    let state = read_snapshots(&out.join("scattering_state.bin")).unwrap();
    assert_eq!(state.snapshots.len(), 1);

    let bad = [&args[..], &["--scatter.probes", "1,2"]].concat();
    assert_eq!(run(&bad), EXIT_CONFIG);
}

fn scan(out: &Path, points: &str, extra: &[&str]) -> i32 {
    let mut args = vec![
        "scan",
        "--out",
        out.to_str().unwrap(),
        "--grid.points_per_axis",
        points,
        "--grid.torus_modes",
        "8",
        "--grid.box_length",
        "12.566370614359172",
        "--scan.samples",
        "4",
        "--scan.refine",
        "false",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn scan_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("st");
    assert_eq!(scan(&out, "16", &["--scan.id", "strichartz", "--scan.p", "4"]), EXIT_OK);
    let s = json(&out.join("scan_strichartz.json"));
    assert_eq!(s["result"]["flags"]["m_independent"], true);
    assert_eq!(s["result"]["sample_count"], 4);
    let csv = std::fs::read_to_string(out.join("scan_strichartz.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);

    let out = dir.path().join("lb");
    assert_eq!(scan(&out, "8", &["--scan.id", "leibniz", "--grid.n", "4"]), EXIT_OK);
    let s = json(&out.join("scan_leibniz.json"));
    assert_eq!(s["result"]["flags"]["residual_below_1e-10"], true);

    let out = dir.path().join("bad");
    assert_eq!(scan(&out, "16", &["--scan.id", "strichartz", "--scan.q", "3"]), EXIT_CONFIG);
    assert_eq!(scan(&out, "16", &["--scan.id", "trilinear-odd"]), EXIT_CONFIG);
}

#[test]
fn selftest_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("st");
    assert_eq!(run(&["selftest", "--out", out.to_str().unwrap()]), EXIT_OK);
    let first = std::fs::read(out.join("selftest.json")).unwrap();
    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["results"].as_array().unwrap().len() >= 10);
    assert_eq!(run(&["selftest", "--out", out.to_str().unwrap()]), EXIT_OK);
    assert_eq!(std::fs::read(out.join("selftest.json")).unwrap(), first);
}
