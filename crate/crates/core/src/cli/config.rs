//! `key = value` run configuration with a fixed schema and canonical form.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Unknown keys are errors. The canonical emission lists every key
//! of the schema in sorted order with normalized values, so
//! parse, emit, parse is a fixed point and the SHA-256 of the canonical body
//! (without `output.dir`) identifies a run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{default_decay_rate, MultiIndex, SobolevSpec, Variant};
use crate::lattice::{make_grid, GridSpec};
use crate::solver::{EvolutionConfig, PicardSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Int,
    Float,
    Bool,
    /// Float or `auto`.
    AutoFloat,
    /// Non-negative integer or `auto`.
    AutoInt,
    FloatList,
    IntList,
    Choice(&'static [&'static str]),
    Text,
}

const PROFILES: &[&str] = &["localized", "random"];
const VARIANTS: &[&str] = &["auto", "full", "split"];
const SPLITS: &[&str] = &["auto", "false", "true"];
const SCANS: &[&str] = &[
    "algebra",
    "derivative",
    "leibniz",
    "mixed",
    "strichartz",
    "strichartz-inhomogeneous",
    "trilinear-even",
    "trilinear-odd",
];

/// `(key, kind, default)`, sorted by key.
const SCHEMA: &[(&str, Kind, &str)] = &[
    ("data.decay_rate", Kind::AutoFloat, "auto"),
    ("data.delta", Kind::Float, "0.01"),
    ("data.profile", Kind::Choice(PROFILES), "localized"),
    ("data.seed", Kind::Int, "0"),
    ("data.width", Kind::Float, "2.0"),
    ("evolution.boundary_margin", Kind::Float, "0.1"),
    ("evolution.dealias", Kind::Bool, "true"),
    ("evolution.dt", Kind::Float, "0.015625"),
    ("evolution.final_time", Kind::Float, "1.0"),
    ("evolution.kappa", Kind::Float, "1.0"),
    ("evolution.stride", Kind::Int, "1"),
    ("grid.box_length", Kind::Float, "40.0"),
    ("grid.k", Kind::Int, "1"),
    ("grid.n", Kind::Int, "2"),
    ("grid.points_per_axis", Kind::Int, "64"),
    ("grid.split", Kind::Choice(SPLITS), "auto"),
    ("grid.torus_modes", Kind::Int, "8"),
    ("output.dir", Kind::Text, "out"),
    ("picard.max_iter", Kind::Int, "50"),
    ("picard.tol", Kind::Float, "1e-11"),
    ("scan.alpha", Kind::IntList, "auto"),
    ("scan.id", Kind::Choice(SCANS), "strichartz"),
    ("scan.m_list", Kind::FloatList, "-10.0,0.0,10.0"),
    ("scan.p", Kind::Float, "4.0"),
    ("scan.p_tilde", Kind::AutoFloat, "auto"),
    ("scan.q", Kind::AutoFloat, "auto"),
    ("scan.q_tilde", Kind::AutoFloat, "auto"),
    ("scan.r", Kind::AutoFloat, "auto"),
    ("scan.refine", Kind::Bool, "true"),
    ("scan.s", Kind::AutoFloat, "auto"),
    ("scan.samples", Kind::Int, "100"),
    ("scan.time_steps", Kind::Int, "8"),
    ("scan.time_window", Kind::Float, "1.0"),
    ("scatter.decay_q", Kind::Float, "4.0"),
    ("scatter.decay_window", Kind::FloatList, "auto"),
    ("scatter.probes", Kind::FloatList, "2.0,4.0,8.0,16.0"),
    ("simulate.q", Kind::Float, "4.0"),
    ("space.epsilon", Kind::Float, "0.1"),
    ("space.rho", Kind::AutoFloat, "auto"),
    ("space.theta", Kind::AutoInt, "auto"),
    ("space.variant", Kind::Choice(VARIANTS), "auto"),
];

fn kind_of(key: &str) -> Result<Kind> {
    SCHEMA
        .iter()
        .find(|(k, _, _)| *k == key)
        .map(|(_, kind, _)| *kind)
        .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))
}

fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

fn parse_float(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a number")))?;
    if x.is_nan() {
        return Err(Error::Config(format!("`{key}`: NaN is not allowed")));
    }
    Ok(x)
}

fn parse_int(key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a non-negative integer")))
}

/// Normalized textual form of `value` for `key`.
fn normalize(key: &str, value: &str) -> Result<String> {
    let v = value.trim();
    match kind_of(key)? {
        Kind::Int => Ok(parse_int(key, v)?.to_string()),
        Kind::Float => Ok(fmt_float(parse_float(key, v)?)),
        Kind::Bool => match v {
            "true" => Ok("true".into()),
            "false" => Ok("false".into()),
            _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
        },
        Kind::AutoFloat if v == "auto" => Ok("auto".into()),
        Kind::AutoFloat => Ok(fmt_float(parse_float(key, v)?)),
        Kind::AutoInt if v == "auto" => Ok("auto".into()),
        Kind::AutoInt => Ok(parse_int(key, v)?.to_string()),
        Kind::FloatList | Kind::IntList if v == "auto" => Ok("auto".into()),
        Kind::FloatList => Ok(v
            .split(',')
            .map(|x| parse_float(key, x.trim()).map(fmt_float))
            .collect::<Result<Vec<_>>>()?
            .join(",")),
        Kind::IntList => Ok(v
            .split(',')
            .map(|x| parse_int(key, x.trim()).map(|i| i.to_string()))
            .collect::<Result<Vec<_>>>()?
            .join(",")),
        Kind::Choice(options) => {
            if options.contains(&v) {
                Ok(v.to_string())
            } else {
                Err(Error::Config(format!("`{key}`: expected one of {options:?}, got `{v}`")))
            }
        }
        Kind::Text => {
            if v.is_empty() || v.contains('\n') {
                Err(Error::Config(format!("`{key}`: empty or multi-line value")))
            } else {
                Ok(v.to_string())
            }
        }
    }
}

/// A complete, validated set of configuration values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: SCHEMA.iter().map(|(k, _, d)| (k.to_string(), d.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", lineno + 1)));
            }
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = normalize(key, value)?;
        self.values.insert(key.to_string(), v);
        Ok(())
    }

    /// Applies `KEY=VAL`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not KEY=VAL")))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("schema key")
    }

    fn body(&self, include_output: bool) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            if !include_output && k == "output.dir" {
                continue;
            }
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical body without `output.dir`.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.body(false).as_bytes()).into()
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Canonical text: a hash comment line, then every key sorted.
    pub fn emit(&self) -> String {
        format!("# prodnls config {}\n{}", self.hash_hex(), self.body(true))
    }

    fn float(&self, key: &str) -> f64 {
        self.get(key).parse().expect("normalized float")
    }

    fn int(&self, key: &str) -> u64 {
        self.get(key).parse().expect("normalized int")
    }

    fn auto_float(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            "auto" => None,
            v => Some(v.parse().expect("normalized float")),
        }
    }

    fn float_list(&self, key: &str) -> Option<Vec<f64>> {
        match self.get(key) {
            "auto" => None,
            v => Some(v.split(',').map(|x| x.parse().expect("normalized float")).collect()),
        }
    }

    fn flag(&self, key: &str) -> bool {
        self.get(key) == "true"
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("output.dir"))
    }

    pub fn seed(&self) -> u64 {
        self.int("data.seed")
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let n = self.int("grid.n") as usize;
        let split = match self.get("grid.split") {
            "true" => true,
            "false" => false,
            _ => n >= 3 && n % 2 == 1,
        };
        make_grid(
            n,
            self.int("grid.k") as usize,
            self.float("grid.box_length"),
            self.int("grid.points_per_axis") as usize,
            self.int("grid.torus_modes") as usize,
            split.then(|| n.saturating_sub(1)),
        )
    }

    pub fn evolution(&self) -> Result<EvolutionConfig> {
        let cfg = EvolutionConfig {
            kappa: self.float("evolution.kappa"),
            final_time: self.float("evolution.final_time"),
            dt: self.float("evolution.dt"),
            stride: self.int("evolution.stride") as usize,
            dealias: self.flag("evolution.dealias"),
            boundary_margin: self.float("evolution.boundary_margin"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn epsilon(&self) -> f64 {
        self.float("space.epsilon")
    }

    /// Space of the data normalization and the reported Sobolev norms. `auto`
    /// entries come from the small-data theorem space of the grid.
    pub fn space(&self, grid: &GridSpec) -> Result<SobolevSpec> {
        let base = SobolevSpec::theorem_space(grid, self.epsilon()).or_else(|e| {
            if self.get("space.theta") != "auto" && self.get("space.rho") != "auto" {
                Ok(SobolevSpec::full(0, 0.0))
            } else {
                Err(e)
            }
        })?;
        let variant = match self.get("space.variant") {
            "full" => Variant::Full,
            "split" => Variant::Split,
            _ => base.variant,
        };
        let theta = match self.get("space.theta") {
            "auto" => base.theta,
            v => v.parse().map_err(|_| Error::Config(format!("space.theta `{v}` too large")))?,
        };
        let rho = self.auto_float("space.rho").unwrap_or(base.rho);
        Ok(SobolevSpec { theta, rho, variant })
    }

    pub fn picard(&self) -> PicardSettings {
        PicardSettings {
            epsilon: self.epsilon(),
            tol: self.float("picard.tol"),
            max_iter: self.int("picard.max_iter") as usize,
        }
    }

    pub fn delta(&self) -> f64 {
        self.float("data.delta")
    }

    pub fn decay_rate(&self, grid: &GridSpec, spec: &SobolevSpec) -> f64 {
        self.auto_float("data.decay_rate").unwrap_or_else(|| default_decay_rate(grid, spec))
    }

    pub fn localized(&self) -> bool {
        self.get("data.profile") == "localized"
    }

    pub fn width(&self) -> f64 {
        self.float("data.width")
    }

    pub fn probes(&self) -> Vec<f64> {
        self.float_list("scatter.probes").unwrap_or_default()
    }

    pub fn decay_q(&self) -> f64 {
        self.float("scatter.decay_q")
    }

    pub fn decay_window(&self) -> Option<(f64, f64)> {
        self.float_list("scatter.decay_window").map(|v| (v[0], *v.last().unwrap_or(&v[0])))
    }

    pub fn simulate_q(&self) -> f64 {
        self.float("simulate.q")
    }

    pub fn scan_id(&self) -> &str {
        self.get("scan.id")
    }

    pub fn scan_samples(&self) -> usize {
        self.int("scan.samples") as usize
    }

    pub fn scan_time(&self) -> (f64, usize) {
        (self.float("scan.time_window"), self.int("scan.time_steps") as usize)
    }

    pub fn scan_refine(&self) -> bool {
        self.flag("scan.refine")
    }

    pub fn scan_p(&self) -> f64 {
        self.float("scan.p")
    }

    pub fn scan_opt(&self, key: &str) -> Option<f64> {
        self.auto_float(&format!("scan.{key}"))
    }

    pub fn scan_m_list(&self) -> Vec<f64> {
        self.float_list("scan.m_list").unwrap_or_else(|| vec![0.0])
    }

    /// `scan.alpha`, or `None` for `auto`.
    pub fn scan_alpha(&self) -> Option<MultiIndex> {
        match self.get("scan.alpha") {
            "auto" => None,
            v => Some(MultiIndex(v.split(',').map(|x| x.parse().expect("normalized int")).collect())),
        }
    }

    pub fn keys() -> impl Iterator<Item = &'static str> {
        SCHEMA.iter().map(|(k, _, _)| *k)
    }
}
