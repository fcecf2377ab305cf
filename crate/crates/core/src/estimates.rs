//! Empirical ratio scans for the linear and multilinear estimates: Strichartz
//! bounds for the product propagator and for the modulated x-propagators,
//! their derivative and `(1-Delta_y)^{r/2}` versions, the torus algebra
//! property, the Leibniz expansion and the trilinear bounds.
//!
//! A scan evaluates `LHS / RHS` on a seeded random ensemble. Its maximum is an
//! ensemble-relative stand-in for the constant of the inequality; boundedness
//! is probed by repeating the scan on a refined grid.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    alias_free_band, apply_bessel_split, apply_bessel_torus, apply_bessel_y, apply_dx, apply_dx_lattice,
    canonical_random_data, canonical_random_field, hx_norm, hxy_norm, MultiIndex, SobolevSpec,
};
use crate::lattice::{from_spectral, make_grid, slot_of, to_spectral, Axis, GridSpec, Lattice, LatticeField, SpectralField};
use crate::mixednorms::{
    admissible_q, conjugate, even_x_rho, holder_gap, minkowski_gap, mixed_norm, mixed_norm_mapped, mixed_norm_x,
    mode_samples, odd_x_rho, profile_trajectory, x_eps_norm, x_norm_odd_with_rho, InnerBlock, PairKind, Trajectory,
};
use crate::propagators::{free_propagate, modulated_propagate_x};
use crate::solver::duhamel_integral;

/// Grid, time window and ensemble of a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSetup {
    pub grid: GridSpec,
    pub final_time: f64,
    pub time_steps: usize,
    pub samples: usize,
    pub seed: u64,
    pub decay_rate: f64,
    /// Signed-index bands `(x, y)` of the random data. Kept fixed under
    /// [`ScanSetup::refined`], so refinement resamples the same functions.
    pub band: (i64, i64),
}

impl ScanSetup {
    /// Defaults: `T = 1`, 8 time steps, decay 2, alias-free bands.
    pub fn new(grid: GridSpec, samples: usize, seed: u64) -> Self {
        let band = (alias_free_band(grid.points_per_axis), alias_free_band(grid.torus_modes));
        ScanSetup {
            grid,
            final_time: 1.0,
            time_steps: 8,
            samples,
            seed,
            decay_rate: 2.0,
            band,
        }
    }

    /// Same box and ensemble with `N_x`, `N_y` and `N_t` doubled.
    pub fn refined(&self) -> Result<Self> {
        let g = &self.grid;
        Ok(ScanSetup {
            grid: make_grid(
                g.n,
                g.k,
                g.box_length,
                2 * g.points_per_axis,
                2 * g.torus_modes,
                g.split_index,
            )?,
            time_steps: 2 * self.time_steps,
            ..self.clone()
        })
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.time_steps as f64
    }

    fn sample_seed(&self, index: usize, stream: u64) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add((index as u64) << 8)
            .wrapping_add(stream)
    }

    fn data(&self, index: usize, stream: u64) -> Result<SpectralField> {
        canonical_random_data(
            &self.grid,
            self.band.0,
            self.band.1,
            self.decay_rate,
            self.sample_seed(index, stream),
        )
    }

    fn x_data(&self, index: usize, stream: u64) -> Result<LatticeField> {
        let lat = self.grid.x_lattice();
        let band = vec![self.band.0; lat.dims()];
        canonical_random_field(&lat, &band, self.decay_rate, self.sample_seed(index, stream))
    }

    fn free(&self, f: &SpectralField) -> Result<Trajectory> {
        let dt = self.dt();
        let fields = (0..=self.time_steps).map(|j| free_propagate(f, dt * j as f64)).collect();
        Trajectory::new(0.0, dt, fields)
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.time_steps == 0 || !(self.final_time > 0.0) {
            return Err(Error::InvalidArgument(
                "scan needs samples >= 1, time_steps >= 1 and T > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Per-sample ratios plus scan-specific exact checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioScanResult {
    pub id: String,
    pub grid: GridSpec,
    pub final_time: f64,
    pub time_steps: usize,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
    pub samples: Vec<RatioSample>,
    pub max_ratio: f64,
    /// Named slack values (exact identities, inequality gaps).
    pub checks: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    /// `|max_fine - max_coarse| / max_coarse` once a refinement ran.
    pub stability_delta: Option<f64>,
}

impl RatioScanResult {
    fn new(id: &str, setup: &ScanSetup, params: &[(&str, f64)], samples: Vec<RatioSample>) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|s| !(s.rhs > 0.0)) {
            log::warn!("{id}: sample {} has RHS {}", bad.index, bad.rhs);
            return Err(Error::ZeroDenominator);
        }
        let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
        Ok(RatioScanResult {
            id: id.to_string(),
            grid: setup.grid.clone(),
            final_time: setup.final_time,
            time_steps: setup.time_steps,
            seed: setup.seed,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            samples,
            max_ratio,
            checks: BTreeMap::new(),
            flags: BTreeMap::new(),
            stability_delta: None,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|s| s.ratio.is_finite() && s.lhs.is_finite() && s.rhs.is_finite())
    }

    /// One row per sample: `index,lhs,rhs,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,lhs,rhs,ratio\n");
        for s in &self.samples {
            out.push_str(&format!("{},{:.17e},{:.17e},{:.17e}\n", s.index, s.lhs, s.rhs, s.ratio));
        }
        out
    }

    /// Everything except the per-sample rows.
    pub fn summary(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("plain data");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("samples");
            obj.insert("sample_count".into(), self.samples.len().into());
            obj.insert("all_finite".into(), self.all_finite().into());
        }
        v
    }
}

pub fn stability_delta(coarse_max: f64, fine_max: f64) -> f64 {
    (fine_max - coarse_max).abs() / coarse_max
}

/// Runs `scan` on `setup` and on `setup.refined()`; both results carry the
/// stability delta of their maxima.
pub fn with_refinement(
    setup: &ScanSetup,
    scan: impl Fn(&ScanSetup) -> Result<RatioScanResult>,
) -> Result<(RatioScanResult, RatioScanResult)> {
    let mut coarse = scan(setup)?;
    let mut fine = scan(&setup.refined()?)?;
    let d = stability_delta(coarse.max_ratio, fine.max_ratio);
    coarse.stability_delta = Some(d);
    fine.stability_delta = Some(d);
    Ok((coarse, fine))
}

fn check_pair(n: usize, p: f64, q: f64, kind: PairKind) -> Result<()> {
    let expect = admissible_q(n, p, kind)?;
    let ok = if expect.is_infinite() {
        q.is_infinite()
    } else {
        (q - expect).abs() <= 1e-12 * expect
    };
    if ok {
        Ok(())
    } else {
        let rel = match kind {
            PairKind::Strichartz => "2/p + n/q = n/2".to_string(),
            PairKind::Derivative(s) => format!("2/p + n/q = 1 + {s}"),
        };
        Err(Error::InvalidExponent(format!(
            "(p, q) = ({p}, {q}) violates {rel} at n = {n}; admissible q is {expect}"
        )))
    }
}

fn relative_spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::MIN, f64::max);
    let lo = values.iter().copied().fold(f64::MAX, f64::min);
    if hi > 0.0 {
        (hi - lo) / hi
    } else {
        0.0
    }
}

fn x_times(setup: &ScanSetup) -> Vec<f64> {
    (0..=setup.time_steps).map(|j| setup.dt() * j as f64).collect()
}

/// Mixed `L^p_t L^q_x` norms of `d^alpha e^{it(Delta_x + m)} h` for each `m`.
fn modulated_norms(setup: &ScanSetup, h: &LatticeField, alpha: &MultiIndex, p: f64, q: f64, m_list: &[f64]) -> Result<Vec<f64>> {
    let times = x_times(setup);
    m_list
        .iter()
        .map(|&m| {
            let traj = times
                .iter()
                .map(|&t| apply_dx_lattice(&modulated_propagate_x(h, t, m), alpha))
                .collect::<Result<Vec<_>>>()?;
            mixed_norm_x(&traj, setup.dt(), p, q)
        })
        .collect()
}

/// Homogeneous Strichartz scan `||e^{it Delta} f||_{L^p_t L^q_x L^2_y} /
/// ||f||_{L^2}`, with the exact m-independence check on the x-only family
/// `e^{it(Delta_x + m)} h` and the Minkowski check on the y-mode stack.
pub fn strichartz_scan(setup: &ScanSetup, p: f64, q: f64, m_list: &[f64]) -> Result<RatioScanResult> {
    setup.validate()?;
    check_pair(setup.grid.n, p, q, PairKind::Strichartz)?;
    if m_list.is_empty() {
        return Err(Error::InvalidArgument("m_list is empty".into()));
    }
    let rows = (0..setup.samples)
        .into_par_iter()
        .map(|i| {
            let f = setup.data(i, 0)?;
            let traj = setup.free(&f)?;
            let lhs = mixed_norm(&traj, p, q)?;
            let rhs = f.l2_norm();
            let mink = minkowski_gap(&mode_samples(&traj), p, q)?;
            let h = setup.x_data(i, 1)?;
            let mods = modulated_norms(setup, &h, &MultiIndex::zero(setup.grid.n), p, q, m_list)?;
            Ok((RatioSample { index: i, lhs, rhs, ratio: lhs / rhs }, mink, relative_spread(&mods)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = RatioScanResult::new(
        "strichartz",
        setup,
        &[("p", p), ("q", q)],
        rows.iter().map(|r| r.0).collect(),
    )?;
    let mink = rows.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    let spread = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    res.checks.insert("minkowski_max_gap".into(), mink);
    res.checks.insert("m_independence_spread".into(), spread);
    res.flags.insert("minkowski_holds".into(), mink <= 1e-12);
    res.flags.insert("m_independent".into(), spread <= 1e-12);
    Ok(res)
}

/// Inhomogeneous Strichartz scan
/// `||int_0^t e^{i(t-s)Delta} F ds||_{L^p L^q L^2} / ||F||_{L^{pt'} L^{qt'} L^2}`
/// with forcing `F(s) = (3/2 + cos(w s + phi)) G`.
pub fn strichartz_inhomogeneous_scan(setup: &ScanSetup, p: f64, q: f64, pt: f64, qt: f64) -> Result<RatioScanResult> {
    setup.validate()?;
    check_pair(setup.grid.n, p, q, PairKind::Strichartz)?;
    check_pair(setup.grid.n, pt, qt, PairKind::Strichartz)?;
    let (pd, qd) = (conjugate(pt), conjugate(qt));
    let samples = (0..setup.samples)
        .into_par_iter()
        .map(|i| {
            let g = setup.data(i, 2)?;
            let mut rng = ChaCha8Rng::seed_from_u64(setup.sample_seed(i, 3));
            let w: f64 = rng.random_range(0.5..4.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let dt = setup.dt();
            let forcing = Trajectory::new(
                0.0,
                dt,
                (0..=setup.time_steps)
                    .map(|j| g.scale(Complex64::new(1.5 + (w * dt * j as f64 + phi).cos(), 0.0)))
                    .collect(),
            )?;
            let lhs = mixed_norm(&duhamel_integral(&forcing)?, p, q)?;
            let rhs = mixed_norm(&forcing, pd, qd)?;
            Ok(RatioSample { index: i, lhs, rhs, ratio: lhs / rhs })
        })
        .collect::<Result<Vec<_>>>()?;
    RatioScanResult::new(
        "strichartz-inhomogeneous",
        setup,
        &[("p", p), ("q", q), ("p_tilde", pt), ("q_tilde", qt)],
        samples,
    )
}

fn check_even_alpha(n: usize, alpha: &MultiIndex) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("derivative estimates need even n >= 2, got {n}")));
    }
    if alpha.len() != n {
        return Err(Error::MultiIndexLength {
            expected: n,
            found: alpha.len(),
        });
    }
    if alpha.order() as usize > (n - 2) / 2 {
        return Err(Error::InvalidArgument(format!(
            "|alpha| = {} exceeds (n-2)/2 = {}",
            alpha.order(),
            (n - 2) / 2
        )));
    }
    Ok(())
}

/// `||d^alpha e^{it(Delta_x+m)} h||_{L^p_t L^q_x} / ||h||_{H^{(n-2)/2}_x}` on
/// the x lattice, for each `m` in `m_list` (checked identical).
pub fn derivative_strichartz_scan(
    setup: &ScanSetup,
    alpha: &MultiIndex,
    p: f64,
    q: f64,
    m_list: &[f64],
) -> Result<RatioScanResult> {
    setup.validate()?;
    let n = setup.grid.n;
    check_even_alpha(n, alpha)?;
    check_pair(n, p, q, PairKind::Derivative(alpha.order()))?;
    let m_list = if m_list.is_empty() { &[0.0][..] } else { m_list };
    let theta = ((n - 2) / 2) as u32;
    let rows = (0..setup.samples)
        .into_par_iter()
        .map(|i| {
            let h = setup.x_data(i, 4)?;
            let norms = modulated_norms(setup, &h, alpha, p, q, m_list)?;
            let rhs = hx_norm(&h, theta);
            Ok((
                RatioSample {
                    index: i,
                    lhs: norms[0],
                    rhs,
                    ratio: norms[0] / rhs,
                },
                relative_spread(&norms),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = RatioScanResult::new(
        "derivative",
        setup,
        &[("p", p), ("q", q), ("alpha_order", alpha.order() as f64)],
        rows.iter().map(|r| r.0).collect(),
    )?;
    let spread = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    res.checks.insert("m_independence_spread".into(), spread);
    res.flags.insert("m_independent".into(), spread <= 1e-12);
    Ok(res)
}

fn mixed_lhs(traj: &Trajectory, alpha: &MultiIndex, r: f64, p: f64, q: f64) -> Result<f64> {
    mixed_norm_mapped(traj, p, q, InnerBlock::Y, |f| apply_dx(&apply_bessel_y(f, r), alpha))
}

/// `||d^alpha (1-Delta_y)^{r/2} e^{it Delta} f||_{L^p L^q L^2} /
/// ||f||_{H^{(n-2)/2, r}}`, and the reduction to `r = 0` on
/// `(1-Delta_y)^{r/2} f` checked per sample.
pub fn mixed_estimate_scan(setup: &ScanSetup, alpha: &MultiIndex, r: f64, p: f64, q: f64) -> Result<RatioScanResult> {
    setup.validate()?;
    let n = setup.grid.n;
    check_even_alpha(n, alpha)?;
    check_pair(n, p, q, PairKind::Derivative(alpha.order()))?;
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!("r must be >= 0, got {r}")));
    }
    let theta = ((n - 2) / 2) as u32;
    let rows = (0..setup.samples)
        .into_par_iter()
        .map(|i| {
            let f = setup.data(i, 5)?;
            let traj = setup.free(&f)?;
            let lhs = mixed_lhs(&traj, alpha, r, p, q)?;
            let rhs = hxy_norm(&f, &SobolevSpec::full(theta, r))?;
            let g = apply_bessel_y(&f, r);
            let lhs0 = mixed_lhs(&setup.free(&g)?, alpha, 0.0, p, q)?;
            let rhs0 = hxy_norm(&g, &SobolevSpec::full(theta, 0.0))?;
            let ratio = lhs / rhs;
            Ok((RatioSample { index: i, lhs, rhs, ratio }, (ratio - lhs0 / rhs0).abs() / ratio))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = RatioScanResult::new(
        "mixed",
        setup,
        &[("p", p), ("q", q), ("r", r), ("alpha_order", alpha.order() as f64)],
        rows.iter().map(|x| x.0).collect(),
    )?;
    let gap = rows.iter().map(|x| x.1).fold(0.0, f64::max);
    res.checks.insert("r_reduction_max_diff".into(), gap);
    res.flags.insert("r_reduction_exact".into(), gap <= 1e-12);
    Ok(res)
}

fn check_torus(g: &LatticeField) -> Result<()> {
    if g.lattice().axes().iter().any(|a| a.centered) {
        return Err(Error::InvalidArgument("algebra ratio needs torus-only fields".into()));
    }
    Ok(())
}

/// Coefficients of `g` on the same torus with `factor` times as many points.
fn pad(g: &LatticeField, factor: usize) -> LatticeField {
    let axes: Vec<Axis> = g
        .lattice()
        .axes()
        .iter()
        .map(|a| Axis {
            points: a.points * factor,
            ..*a
        })
        .collect();
    let big = Lattice::new(axes.clone());
    let small_shape = g.lattice().shape();
    let mut coeffs = vec![Complex64::default(); big.len()];
    for (flat, c) in g.coeffs().iter().enumerate() {
        let mut rem = flat;
        let mut idx = vec![0usize; axes.len()];
        for a in (0..axes.len()).rev() {
            let np = small_shape[a];
            let j = crate::lattice::signed_index(rem % np, np);
            rem /= np;
            idx[a] = slot_of(j, axes[a].points).expect("padded lattice is larger");
        }
        let target = idx.iter().zip(&axes).fold(0, |acc, (i, a)| acc * a.points + i);
        coeffs[target] = *c;
    }
    LatticeField::new(big, coeffs).expect("padded length")
}

/// `||(1-Delta_y)^{s/2}(f_1 f_2 f_3)||_{L^2_y} / prod_j ||(1-Delta_y)^{s/2} f_j||_{L^2_y}`.
///
/// The product is formed on a 4x zero-padded torus, so it is exact.
pub fn algebra_ratio(f1: &LatticeField, f2: &LatticeField, f3: &LatticeField, s: f64) -> Result<f64> {
    let k = f1.lattice().dims();
    if !(s > k as f64 / 2.0) {
        return Err(Error::InvalidArgument(format!("algebra property needs s > k/2 = {}, got {s}", k as f64 / 2.0)));
    }
    for g in [f1, f2, f3] {
        check_torus(g)?;
        if g.lattice() != f1.lattice() {
            return Err(Error::GridMismatch);
        }
    }
    let rhs: f64 = [f1, f2, f3].iter().map(|g| apply_bessel_torus(g, s).l2_norm()).product();
    if !(rhs > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    let padded: Vec<Vec<Complex64>> = [f1, f2, f3].iter().map(|g| pad(g, 4).to_samples()).collect();
    let prod: Vec<Complex64> = (0..padded[0].len())
        .map(|i| padded[0][i] * padded[1][i] * padded[2][i])
        .collect();
    let big = pad(f1, 4);
    let pf = LatticeField::from_samples(big.lattice(), &prod)?;
    Ok(apply_bessel_torus(&pf, s).l2_norm() / rhs)
}

/// Algebra ratio over random torus triples on the y lattice of the setup,
/// using the full band `N_y/2 - 1` so refinement adds modes.
pub fn algebra_scan(setup: &ScanSetup, s: f64) -> Result<RatioScanResult> {
    setup.validate()?;
    let lat = setup.grid.y_lattice();
    let band = vec![setup.grid.torus_modes as i64 / 2 - 1; lat.dims()];
    let samples = (0..setup.samples)
        .into_par_iter()
        .map(|i| {
            let fs = (0..3)
                .map(|j| canonical_random_field(&lat, &band, setup.decay_rate, setup.sample_seed(i, 10 + j)))
                .collect::<Result<Vec<_>>>()?;
            let ratio = algebra_ratio(&fs[0], &fs[1], &fs[2], s)?;
            let rhs: f64 = fs.iter().map(|g| apply_bessel_torus(g, s).l2_norm()).product();
            Ok(RatioSample {
                index: i,
                lhs: ratio * rhs,
                rhs,
                ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RatioScanResult::new("algebra", setup, &[("s", s)], samples)
}

/// All `(b1, b2, b3)` with `b1 + b2 + b3 = beta`, with the multinomial
/// coefficient `beta! / (b1! b2! b3!)`.
pub fn leibniz_splits(beta: &MultiIndex) -> Vec<(f64, [MultiIndex; 3])> {
    let mut out: Vec<[Vec<u32>; 3]> = vec![[vec![], vec![], vec![]]];
    for &b in &beta.0 {
        let mut next = Vec::new();
        for parts in &out {
            for a1 in 0..=b {
                for a2 in 0..=b - a1 {
                    let mut p = parts.clone();
                    p[0].push(a1);
                    p[1].push(a2);
                    p[2].push(b - a1 - a2);
                    next.push(p);
                }
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|[a, b, c]| {
            let idx = [MultiIndex(a), MultiIndex(b), MultiIndex(c)];
            let coef = beta.factorial() / idx.iter().map(MultiIndex::factorial).product::<f64>();
            (coef, idx)
        })
        .collect()
}

fn check_alias_free(g: &SpectralField) -> Result<()> {
    let grid = g.grid();
    let (bx, by) = g.band_extent(0.0);
    let (kx, ky) = (alias_free_band(grid.points_per_axis), alias_free_band(grid.torus_modes));
    if bx > kx || by > ky {
        return Err(Error::AliasingOverflow(format!(
            "band ({bx}, {by}) exceeds the alias-free band ({kx}, {ky})"
        )));
    }
    Ok(())
}

fn product3(a: &SpectralField, b: &SpectralField, c: &SpectralField) -> Result<SpectralField> {
    to_spectral(&pointwise3(&from_spectral(a), &from_spectral(b), &from_spectral(c)), a.grid())
}

fn pointwise3(a: &[Complex64], b: &[Complex64], c: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).zip(c).map(|((x, y), z)| x * y * z).collect()
}

/// Relative `L^2` residual between `d^beta(g_1 g_2 g_3)` and its multinomial
/// Leibniz expansion.
pub fn leibniz_residual(g1: &SpectralField, g2: &SpectralField, g3: &SpectralField, beta: &MultiIndex) -> Result<f64> {
    Ok(leibniz_residuals([g1, g2, g3], std::slice::from_ref(beta))?[0])
}

/// [`leibniz_residual`] for several `beta`, sharing the transforms of the
/// factors and their derivatives.
pub fn leibniz_residuals(gs: [&SpectralField; 3], betas: &[MultiIndex]) -> Result<Vec<f64>> {
    let grid = gs[0].grid();
    if gs[1].grid() != grid || gs[2].grid() != grid {
        return Err(Error::GridMismatch);
    }
    let max_order = if grid.n >= 2 { (grid.n - 2) / 2 } else { 0 };
    for beta in betas {
        if beta.len() != grid.n {
            return Err(Error::MultiIndexLength {
                expected: grid.n,
                found: beta.len(),
            });
        }
        if beta.order() as usize > max_order {
            return Err(Error::InvalidArgument(format!(
                "|beta| = {} exceeds {max_order}",
                beta.order()
            )));
        }
    }
    for g in gs {
        check_alias_free(g)?;
    }
    let mut cache: BTreeMap<(usize, Vec<u32>), Vec<Complex64>> = BTreeMap::new();
    let mut samples = |i: usize, b: &MultiIndex| -> Result<Vec<Complex64>> {
        if let Some(v) = cache.get(&(i, b.0.clone())) {
            return Ok(v.clone());
        }
        let v = from_spectral(&apply_dx(gs[i], b)?);
        cache.insert((i, b.0.clone()), v.clone());
        Ok(v)
    };
    let zero = MultiIndex::zero(grid.n);
    let product = to_spectral(&pointwise3(&samples(0, &zero)?, &samples(1, &zero)?, &samples(2, &zero)?), grid)?;
    betas
        .iter()
        .map(|beta| {
            let direct = apply_dx(&product, beta)?;
            let mut sum = vec![Complex64::default(); grid.len()];
            for (coef, [b1, b2, b3]) in leibniz_splits(beta) {
                let term = pointwise3(&samples(0, &b1)?, &samples(1, &b2)?, &samples(2, &b3)?);
                for (s, t) in sum.iter_mut().zip(term) {
                    *s += coef * t;
                }
            }
            let sum = to_spectral(&sum, grid)?;
            let diff = direct.sub(&sum)?.l2_norm();
            let scale = direct.l2_norm().max(sum.l2_norm());
            Ok(if scale > 0.0 { diff / scale } else { diff })
        })
        .collect()
}

/// Leibniz residuals for random alias-free triples over every `|beta| =
/// (n-2)/2` (`|beta| = 0` for `n < 2`). The "ratio" column is the residual.
pub fn leibniz_scan(setup: &ScanSetup) -> Result<RatioScanResult> {
    setup.validate()?;
    let n = setup.grid.n;
    let order = if n >= 2 { ((n - 2) / 2) as u32 } else { 0 };
    let betas = MultiIndex::of_order(n, order);
    let samples = (0..setup.samples)
        .into_par_iter()
        .map(|i| {
            let gs = (0..3).map(|j| setup.data(i, 20 + j)).collect::<Result<Vec<_>>>()?;
            let worst = leibniz_residuals([&gs[0], &gs[1], &gs[2]], &betas)?
                .into_iter()
                .fold(0.0f64, f64::max);
            Ok(RatioSample {
                index: i,
                lhs: worst,
                rhs: 1.0,
                ratio: worst,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = RatioScanResult::new("leibniz", setup, &[("beta_order", order as f64)], samples)?;
    res.checks.insert("max_residual".into(), res.max_ratio);
    res.flags.insert("residual_below_1e-10".into(), res.max_ratio <= 1e-10);
    Ok(res)
}

/// Which trilinear bound: the even-`n` one over `X_eps` or the odd-`n` split
/// one over `X`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

fn pointwise_product(a: &Trajectory, b: &Trajectory, c: &Trajectory) -> Result<Trajectory> {
    if a.grid() != b.grid() || a.grid() != c.grid() || a.len() != b.len() || a.len() != c.len() {
        return Err(Error::GridMismatch);
    }
    let fields = (0..a.len())
        .into_par_iter()
        .map(|j| product3(&a.fields()[j], &b.fields()[j], &c.fields()[j]))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(a.t0(), a.dt(), fields)
}

struct TrilinearShape {
    block: InnerBlock,
    dx_dim: usize,
    order: u32,
    /// Effective dimension `d` of the outer Lebesgue space.
    d: usize,
    rho: f64,
}

impl TrilinearShape {
    fn new(grid: &GridSpec, epsilon: f64, parity: Parity) -> Result<Self> {
        let n = grid.n;
        match parity {
            Parity::Even => {
                if n < 2 || n % 2 != 0 {
                    return Err(Error::InvalidArgument(format!("even trilinear bound needs even n >= 2, got {n}")));
                }
                Ok(TrilinearShape {
                    block: InnerBlock::Y,
                    dx_dim: n,
                    order: ((n - 2) / 2) as u32,
                    d: n,
                    rho: even_x_rho(grid.k, epsilon),
                })
            }
            Parity::Odd => {
                if n < 3 || n % 2 == 0 {
                    return Err(Error::InvalidArgument(format!("odd trilinear bound needs odd n >= 3, got {n}")));
                }
                if grid.split_index.is_none() {
                    return Err(Error::MissingSplit);
                }
                Ok(TrilinearShape {
                    block: InnerBlock::XnY,
                    dx_dim: n - 1,
                    order: ((n - 3) / 2) as u32,
                    d: n - 1,
                    rho: odd_x_rho(grid.k, epsilon),
                })
            }
        }
    }

    fn multiplier(&self, f: &SpectralField, beta: &MultiIndex) -> Result<SpectralField> {
        match self.block {
            InnerBlock::Y => apply_dx(&apply_bessel_y(f, self.rho), beta),
            InnerBlock::XnY => apply_dx(&apply_bessel_split(f, self.rho)?, beta),
        }
    }

    fn x_norm(&self, u: &Trajectory, epsilon: f64) -> Result<f64> {
        match self.block {
            InnerBlock::Y => x_eps_norm(u, epsilon),
            InnerBlock::XnY => x_norm_odd_with_rho(u, self.rho),
        }
    }

    /// Outer exponent `2d/(1+2|beta|)` of a factor.
    fn factor_q(&self, order: u32) -> f64 {
        2.0 * self.d as f64 / (1.0 + 2.0 * order as f64)
    }

    /// Outer exponent `2d/(d+1)` of the product.
    fn product_q(&self) -> f64 {
        2.0 * self.d as f64 / (self.d as f64 + 1.0)
    }
}

fn trilinear_parts(
    u: [&Trajectory; 3],
    epsilon: f64,
    parity: Parity,
) -> Result<(f64, f64, TrilinearShape)> {
    let shape = TrilinearShape::new(u[0].grid(), epsilon, parity)?;
    let prod = pointwise_product(u[0], u[1], u[2])?;
    let qp = shape.product_q();
    let mut lhs_terms = Vec::new();
    for beta in MultiIndex::of_order(shape.dx_dim, shape.order) {
        lhs_terms.push(mixed_norm_mapped(&prod, 4.0 / 3.0, qp, shape.block, |f| shape.multiplier(f, &beta))?);
    }
    let lhs = match parity {
        Parity::Even => lhs_terms.iter().copied().fold(0.0, f64::max),
        Parity::Odd => lhs_terms.iter().sum(),
    };
    let rhs: f64 = u
        .iter()
        .map(|t| shape.x_norm(t, epsilon))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .product();
    Ok((lhs, rhs, shape))
}

/// Trilinear ratio. Even `n`: `max_{|beta|=(n-2)/2}
/// ||d^beta (1-Delta_y)^{(k/2+eps)/2}(u_1u_2u_3)||_{L^{4/3} L^{2n/(n+1)} L^2}
/// / prod ||u_j||_{X_eps}`. Odd `n`: the sum over `|beta| = (n-3)/2` of the
/// split norms in `L^{4/3} L^{2(n-1)/n}_{x_bar} L^2_{(x_n,y)}` over
/// `prod ||u_j||_X` with `r = (k+1)/2 + 2 eps`.
///
/// Products are formed pointwise on the grid; inputs band-limited to the
/// alias-free band give exact products.
pub fn trilinear_ratio(u1: &Trajectory, u2: &Trajectory, u3: &Trajectory, epsilon: f64, parity: Parity) -> Result<f64> {
    let (lhs, rhs, _) = trilinear_parts([u1, u2, u3], epsilon, parity)?;
    if !(rhs > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(lhs / rhs)
}

/// Largest Hölder gap over the splits `b1 + b2 + b3 = beta` used to reduce
/// the trilinear bound to products of factor norms.
fn trilinear_holder_gap(u: [&Trajectory; 3], shape: &TrilinearShape) -> Result<f64> {
    let mut worst = f64::MIN;
    for beta in MultiIndex::of_order(shape.dx_dim, shape.order) {
        for (_, parts) in leibniz_splits(&beta) {
            let factors = (0..3)
                .map(|j| profile_trajectory(u[j], shape.block, |f| shape.multiplier(f, &parts[j])))
                .collect::<Result<Vec<_>>>()?;
            let exps: Vec<(f64, f64)> = parts.iter().map(|b| (4.0, shape.factor_q(b.order()))).collect();
            worst = worst.max(holder_gap(&factors, &exps, (4.0 / 3.0, shape.product_q()))?);
        }
    }
    Ok(worst)
}

/// Trilinear scan over free trajectories of random alias-free data, with the
/// Hölder step checked on every sample.
pub fn trilinear_scan(setup: &ScanSetup, epsilon: f64) -> Result<RatioScanResult> {
    setup.validate()?;
    let parity = Parity::of(setup.grid.n);
    let rows = (0..setup.samples)
        .into_par_iter()
        .map(|i| {
            let u = (0..3)
                .map(|j| setup.free(&setup.data(i, 30 + j)?))
                .collect::<Result<Vec<_>>>()?;
            let (lhs, rhs, shape) = trilinear_parts([&u[0], &u[1], &u[2]], epsilon, parity)?;
            let gap = trilinear_holder_gap([&u[0], &u[1], &u[2]], &shape)?;
            Ok((RatioSample { index: i, lhs, rhs, ratio: lhs / rhs }, gap))
        })
        .collect::<Result<Vec<_>>>()?;
    let id = match parity {
        Parity::Even => "trilinear-even",
        Parity::Odd => "trilinear-odd",
    };
    let mut res = RatioScanResult::new(id, setup, &[("epsilon", epsilon)], rows.iter().map(|r| r.0).collect())?;
    let gap = rows.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    res.checks.insert("holder_max_gap".into(), gap);
    res.flags.insert("holder_holds".into(), gap <= 1e-12);
    Ok(res)
}
