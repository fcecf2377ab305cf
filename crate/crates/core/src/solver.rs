//! Nonlinear evolution of `i d_t u + Delta u = kappa |u|^2 u`.
//!
//! Two independent routes: a Strang split-step integrator used as the
//! numerical oracle, and the Duhamel map
//! `T_f(u)(t) = e^{it Delta} f - i int_0^t e^{i(t-s) Delta} kappa |u|^2 u(s) ds`
//! iterated to its fixed point.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{combine, from_spectral, signed_index, to_spectral, GridSpec, SpectralField};
use crate::mixednorms::{solution_space_norm, Trajectory};
use crate::propagators::{free_propagate, TrapezoidDuhamel};

/// Parameters of a nonlinear run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Sign of the nonlinearity: `+1` defocusing, `-1` focusing, `0` free.
    pub kappa: f64,
    pub final_time: f64,
    pub dt: f64,
    /// Store every `stride`-th step.
    pub stride: usize,
    /// 2/3-rule projection of the cubic term in the Duhamel map.
    pub dealias: bool,
    /// Outer fraction of the box (per side) monitored for wrap-around mass.
    pub boundary_margin: f64,
}

impl EvolutionConfig {
    pub fn new(kappa: f64, final_time: f64, dt: f64) -> Self {
        EvolutionConfig {
            kappa,
            final_time,
            dt,
            stride: 1,
            dealias: true,
            boundary_margin: 0.1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn with_boundary_margin(mut self, margin: f64) -> Self {
        self.boundary_margin = margin;
        self
    }

    /// Number of integrator steps.
    pub fn steps(&self) -> Result<usize> {
        self.validate()?;
        Ok((self.final_time / self.dt).round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kappa.is_finite() {
            return Err(Error::InvalidArgument(format!("kappa must be finite, got {}", self.kappa)));
        }
        if !(self.dt > 0.0) || !(self.final_time >= 0.0) || !self.final_time.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need dt > 0 and T >= 0 (got dt = {}, T = {})",
                self.dt, self.final_time
            )));
        }
        let steps = (self.final_time / self.dt).round();
        if (steps * self.dt - self.final_time).abs() > 1e-9 * self.final_time.max(self.dt) {
            return Err(Error::InvalidArgument(format!(
                "dt = {} does not divide T = {}",
                self.dt, self.final_time
            )));
        }
        if self.stride == 0 || steps as usize % self.stride != 0 {
            return Err(Error::InvalidArgument(format!(
                "stride {} does not divide the {} steps",
                self.stride, steps
            )));
        }
        if !(0.0..0.5).contains(&self.boundary_margin) {
            return Err(Error::InvalidArgument(format!(
                "boundary margin must lie in [0, 1/2), got {}",
                self.boundary_margin
            )));
        }
        Ok(())
    }
}

/// Output of [`evolve`]: the stored trajectory plus per-snapshot diagnostics.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub trajectory: Trajectory,
    /// Fraction of `L^2` mass inside the boundary margin, per snapshot.
    pub boundary_mass: Vec<f64>,
    /// `||u(t)||_{L^2}` per snapshot.
    pub mass: Vec<f64>,
}

impl Evolution {
    pub fn max_boundary_mass(&self) -> f64 {
        self.boundary_mass.iter().copied().fold(0.0, f64::max)
    }

    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
    }
}

/// 2/3-rule mask: keep `|j| <= N/3` on every axis.
fn dealias_mask(grid: &GridSpec) -> Vec<bool> {
    let per_axis: Vec<Vec<bool>> = grid
        .lattice()
        .axes()
        .iter()
        .map(|ax| {
            let cut = (ax.points / 3) as i64;
            (0..ax.points).map(|j| signed_index(j, ax.points).abs() <= cut).collect()
        })
        .collect();
    combine(&per_axis, true, |a, b| a && b)
}

fn cubic_with_mask(u: &SpectralField, kappa: f64, mask: Option<&[bool]>) -> SpectralField {
    if kappa == 0.0 {
        return SpectralField::zeros(u.grid());
    }
    let mut samples = from_spectral(u);
    samples.par_iter_mut().for_each(|v| *v *= kappa * v.norm_sqr());
    let out = to_spectral(&samples, u.grid()).expect("grid length");
    match mask {
        None => out,
        Some(m) => {
            let coeffs = out
                .coeffs()
                .iter()
                .zip(m)
                .map(|(c, &keep)| if keep { *c } else { Complex64::default() })
                .collect();
            SpectralField::new(u.grid().clone(), coeffs).expect("grid length")
        }
    }
}

/// `kappa |u|^2 u` computed pointwise in physical space, optionally
/// 2/3-rule projected.
pub fn nonlinearity(u: &SpectralField, kappa: f64, dealias: bool) -> SpectralField {
    let mask = dealias.then(|| dealias_mask(u.grid()));
    cubic_with_mask(u, kappa, mask.as_deref())
}

/// One Strang step: half linear, nonlinear phase `e^{-i kappa |u|^2 dt}`,
/// half linear. Both substeps are `L^2` isometries.
pub fn split_step(u: &SpectralField, dt: f64, kappa: f64) -> SpectralField {
    let half = free_propagate(u, 0.5 * dt);
    if kappa == 0.0 {
        return free_propagate(&half, 0.5 * dt);
    }
    let mut samples = from_spectral(&half);
    samples
        .par_iter_mut()
        .for_each(|v| *v *= Complex64::from_polar(1.0, -kappa * v.norm_sqr() * dt));
    let mid = to_spectral(&samples, u.grid()).expect("grid length");
    free_propagate(&mid, 0.5 * dt)
}

/// Fraction of `L^2` mass at points with some `|x_i| >= (1/2 - margin) L`.
pub fn boundary_mass_fraction(u: &SpectralField, margin: f64) -> f64 {
    let grid = u.grid();
    if margin <= 0.0 {
        return 0.0;
    }
    let limit = (0.5 - margin) * grid.box_length;
    let xs = grid.x_coordinates();
    let per_axis: Vec<Vec<bool>> = (0..grid.n)
        .map(|_| xs.iter().map(|x| x.abs() >= limit - 1e-12).collect())
        .collect();
    let in_zone = combine(&per_axis, false, |a, b| a || b);
    let ylen = grid.y_len();
    let samples = from_spectral(u);
    let (mut zone, mut total) = (0.0, 0.0);
    for (i, v) in samples.iter().enumerate() {
        let w = v.norm_sqr();
        total += w;
        if in_zone[i / ylen] {
            zone += w;
        }
    }
    if total > 0.0 {
        zone / total
    } else {
        0.0
    }
}

/// `H(u) = int |grad_{x,y} u|^2 + (kappa/2) |u|^4`.
pub fn energy(u: &SpectralField, kappa: f64) -> f64 {
    let grid = u.grid();
    let (xs, ys) = (grid.x_symbol(), grid.y_symbol());
    let ylen = grid.y_len();
    let kinetic: f64 = u
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| (xs[i / ylen] + ys[i % ylen]) * c.norm_sqr())
        .sum();
    if kappa == 0.0 {
        return kinetic;
    }
    let dv = grid.lattice().cell_volume();
    let quartic: f64 = from_spectral(u).iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() * dv;
    kinetic + 0.5 * kappa * quartic
}

/// Split-step evolution of `f` over `[0, T]`.
///
/// Aborts on non-finite values or relative mass drift above `1e-8`.
pub fn evolve(f: &SpectralField, config: &EvolutionConfig) -> Result<Evolution> {
    evolve_observed(f, config, |_, _| {})
}

/// [`evolve`], calling `observe(t, u)` on every stored snapshot as it is
/// produced, so callers keep the snapshots preceding an abort.
pub fn evolve_observed(
    f: &SpectralField,
    config: &EvolutionConfig,
    mut observe: impl FnMut(f64, &SpectralField),
) -> Result<Evolution> {
    let steps = config.steps()?;
    let m0 = f.l2_norm();
    if !m0.is_finite() {
        return Err(Error::NumericalAbort {
            time: 0.0,
            reason: "initial data is not finite".into(),
        });
    }
    let mut u = f.clone();
    observe(0.0, &u);
    let mut fields = vec![u.clone()];
    let mut boundary_mass = vec![boundary_mass_fraction(&u, config.boundary_margin)];
    let mut mass = vec![m0];
    for j in 1..=steps {
        u = split_step(&u, config.dt, config.kappa);
        let t = j as f64 * config.dt;
        let m = u.l2_norm();
        if !m.is_finite() {
            return Err(Error::NumericalAbort {
                time: t,
                reason: "non-finite coefficients".into(),
            });
        }
        if (m - m0).abs() > 1e-8 * m0.max(f64::MIN_POSITIVE) {
            return Err(Error::NumericalAbort {
                time: t,
                reason: format!("mass drift {:.3e} exceeds 1e-8", (m - m0).abs() / m0),
            });
        }
        if j % config.stride == 0 {
            boundary_mass.push(boundary_mass_fraction(&u, config.boundary_margin));
            mass.push(m);
            observe(t, &u);
            fields.push(u.clone());
        }
    }
    log::debug!("evolve: {steps} steps, final mass {:.17e}", mass[mass.len() - 1]);
    Ok(Evolution {
        trajectory: Trajectory::new(0.0, config.dt * config.stride as f64, fields)?,
        boundary_mass,
        mass,
    })
}

/// `T_f(u)` at every snapshot time of `traj`, with the 2/3-rule projection of
/// the cubic term.
pub fn duhamel_apply(f: &SpectralField, traj: &Trajectory, kappa: f64) -> Result<Trajectory> {
    duhamel_apply_with(f, traj, kappa, true)
}

/// [`duhamel_apply`] with explicit control of dealiasing.
///
/// Trapezoid rule in the interaction picture:
/// `w_{j+1} = e^{i dt Delta}(w_j - i dt/2 N_j) - i dt/2 N_{j+1}`, `w_0 = f`.
pub fn duhamel_apply_with(f: &SpectralField, traj: &Trajectory, kappa: f64, dealias: bool) -> Result<Trajectory> {
    if f.grid() != traj.grid() {
        return Err(Error::GridMismatch);
    }
    if kappa == 0.0 {
        let fields = (0..traj.len()).into_par_iter().map(|j| free_propagate(f, traj.time(j) - traj.t0())).collect();
        return Trajectory::new(traj.t0(), traj.dt(), fields);
    }
    let grid = f.grid();
    let mask = dealias.then(|| dealias_mask(grid));
    let forcing: Vec<SpectralField> = traj
        .fields()
        .par_iter()
        .map(|u| cubic_with_mask(u, kappa, mask.as_deref()))
        .collect();
    let ylen = grid.y_len();
    let (xs, ys) = (grid.x_symbol(), grid.y_symbol());
    let omega: Vec<f64> = (0..grid.len()).map(|i| xs[i / ylen] + ys[i % ylen]).collect();
    let quad = TrapezoidDuhamel::new(&omega, traj.dt());
    let mut w = f.coeffs().to_vec();
    let mut out = Vec::with_capacity(traj.len());
    out.push(f.clone());
    for j in 0..traj.len() - 1 {
        quad.advance(&mut w, forcing[j].coeffs(), forcing[j + 1].coeffs());
        out.push(SpectralField::new(grid.clone(), w.clone())?);
    }
    Trajectory::new(traj.t0(), traj.dt(), out)
}

/// `-i int_0^t e^{i(t-s) Delta} F(s) ds` at every snapshot time of `forcing`,
/// by the same trapezoid recursion as [`duhamel_apply`].
pub fn duhamel_integral(forcing: &Trajectory) -> Result<Trajectory> {
    let grid = forcing.grid();
    let ylen = grid.y_len();
    let (xs, ys) = (grid.x_symbol(), grid.y_symbol());
    let omega: Vec<f64> = (0..grid.len()).map(|i| xs[i / ylen] + ys[i % ylen]).collect();
    let quad = TrapezoidDuhamel::new(&omega, forcing.dt());
    let f = forcing.fields();
    let mut w = vec![Complex64::default(); grid.len()];
    let mut out = Vec::with_capacity(f.len());
    out.push(SpectralField::zeros(grid));
    for j in 0..f.len() - 1 {
        quad.advance(&mut w, f[j].coeffs(), f[j + 1].coeffs());
        out.push(SpectralField::new(grid.clone(), w.clone())?);
    }
    Trajectory::new(forcing.t0(), forcing.dt(), out)
}

/// Free trajectory `e^{it Delta} f` on the snapshot grid of `config`.
pub fn free_trajectory(f: &SpectralField, config: &EvolutionConfig) -> Result<Trajectory> {
    let steps = config.steps()?;
    let dt = config.dt * config.stride as f64;
    let fields = (0..=steps / config.stride)
        .into_par_iter()
        .map(|j| free_propagate(f, dt * j as f64))
        .collect();
    Trajectory::new(0.0, dt, fields)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardSettings {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            epsilon: crate::fields::DEFAULT_EPSILON,
            tol: 1e-11,
            max_iter: 50,
        }
    }
}

/// Record of a Picard iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardTrace {
    /// Number of applications of `T_f`.
    pub iterations: usize,
    /// `d_k = ||T_f(u_k) - u_k||_{Y_eps}`.
    pub distances: Vec<f64>,
    /// `d_{k+1}/d_k`, recorded when `d_k > 10 tol`.
    pub ratios: Vec<f64>,
    /// `max_k ||u_k||_{Y_eps}`.
    pub radius: f64,
    pub converged: bool,
    pub tol: f64,
    pub epsilon: f64,
}

/// Iterate `u_{k+1} = T_f(u_k)` from the free trajectory until
/// `||T_f(u_k) - u_k||_{Y_eps} < tol`; returns `u_k`.
pub fn picard_solve(
    f: &SpectralField,
    config: &EvolutionConfig,
    settings: &PicardSettings,
) -> Result<(Trajectory, PicardTrace)> {
    if !(settings.tol > 0.0) || settings.max_iter == 0 {
        return Err(Error::InvalidArgument(format!(
            "need tol > 0 and max_iter >= 1 (got {}, {})",
            settings.tol, settings.max_iter
        )));
    }
    let mut u = free_trajectory(f, config)?;
    let mut trace = PicardTrace {
        iterations: 0,
        distances: Vec::new(),
        ratios: Vec::new(),
        radius: solution_space_norm(&u, settings.epsilon)?,
        converged: false,
        tol: settings.tol,
        epsilon: settings.epsilon,
    };
    while trace.iterations < settings.max_iter {
        let next = duhamel_apply_with(f, &u, config.kappa, config.dealias)?;
        trace.iterations += 1;
        let d = solution_space_norm(&next.sub(&u)?, settings.epsilon)?;
        if !d.is_finite() {
            log::warn!("Picard iterates diverged at iteration {}", trace.iterations);
            return Err(Error::NonConvergence(Box::new(trace)));
        }
        if let Some(&prev) = trace.distances.last() {
            if prev > 10.0 * settings.tol {
                trace.ratios.push(d / prev);
            }
        }
        trace.distances.push(d);
        log::debug!("picard iteration {}: d = {d:.3e}", trace.iterations);
        if d < settings.tol {
            trace.converged = true;
            return Ok((u, trace));
        }
        u = next;
        trace.radius = trace.radius.max(solution_space_norm(&u, settings.epsilon)?);
    }
    Err(Error::NonConvergence(Box::new(trace)))
}

/// Result of [`difference_bound_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceReport {
    /// Max pointwise residual of `v^2 vbar - w^2 wbar = (v-w)(v+w)wbar + v^2(vbar-wbar)`.
    pub identity_residual: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `numerator / denominator`; `None` when the denominator vanishes.
    pub ratio: Option<f64>,
}

/// Checks the cubic difference identity pointwise and reports
/// `||T(v) - T(w)||_Y / (||v - w||_Y (||v||_Y + ||w||_Y)^2)`.
pub fn difference_bound_check(v: &Trajectory, w: &Trajectory, kappa: f64, epsilon: f64) -> Result<DifferenceReport> {
    let diff = v.sub(w)?;
    let mut residual = 0.0f64;
    for (a, b) in v.fields().iter().zip(w.fields()) {
        let (sa, sb) = (from_spectral(a), from_spectral(b));
        for (&x, &y) in sa.iter().zip(&sb) {
            let lhs = x * x * x.conj() - y * y * y.conj();
            let rhs = (x - y) * (x + y) * y.conj() + x * x * (x.conj() - y.conj());
            residual = residual.max((lhs - rhs).norm());
        }
    }
    // T_f(v) - T_f(w) does not depend on f.
    let zero = SpectralField::zeros(v.grid());
    let tv = duhamel_apply(&zero, v, kappa)?;
    let tw = duhamel_apply(&zero, w, kappa)?;
    let numerator = solution_space_norm(&tv.sub(&tw)?, epsilon)?;
    let nv = solution_space_norm(v, epsilon)?;
    let nw = solution_space_norm(w, epsilon)?;
    let denominator = solution_space_norm(&diff, epsilon)? * (nv + nw).powi(2);
    Ok(DifferenceReport {
        identity_residual: residual,
        numerator,
        denominator,
        ratio: (denominator > 0.0).then(|| numerator / denominator),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{localized_small_data, random_small_data, SobolevSpec};
    use crate::lattice::make_grid;

    fn grid() -> GridSpec {
        make_grid(2, 1, 8.0, 16, 8, None).unwrap()
    }

    fn data(delta: f64, seed: u64) -> SpectralField {
        let g = grid();
        random_small_data(&g, &SobolevSpec::theorem_space(&g, 0.1).unwrap(), delta, 2.0, seed).unwrap()
    }

    fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
        a.sub(b).unwrap().coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn nonlinearity_examples() {
        let g = grid();
        let u = data(0.5, 1);
        assert_eq!(nonlinearity(&u, 0.0, false).l2_norm(), 0.0);

        let c = Complex64::new(0.3, -0.2);
        let constant = to_spectral(&vec![c; g.len()], &g).unwrap();
        let n = from_spectral(&nonlinearity(&constant, -1.0, true));
        let expect = -c * c.norm_sqr();
        assert!(n.iter().all(|v| (v - expect).norm() < 1e-14));

        let conj = to_spectral(&from_spectral(&u).iter().map(|v| v.conj()).collect::<Vec<_>>(), &g).unwrap();
        let lhs = from_spectral(&nonlinearity(&conj, 1.0, false));
        let rhs = from_spectral(&nonlinearity(&u, 1.0, false));
        assert!(lhs.iter().zip(&rhs).all(|(a, b)| (a - b.conj()).norm() < 1e-12));
    }

    #[test]
    fn split_step_basics() {
        let u = data(0.5, 2);
        assert!(max_diff(&split_step(&u, 0.1, 0.0), &free_propagate(&u, 0.1)) < 1e-12);
        let v = split_step(&u, 0.1, 1.0);
        assert!((v.l2_norm() - u.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn evolve_free_and_mass() {
        let u = data(0.5, 3);
        let free = evolve(&u, &EvolutionConfig::new(0.0, 0.5, 0.05)).unwrap();
        for (j, f) in free.trajectory.fields().iter().enumerate() {
            assert!(max_diff(f, &free_propagate(&u, free.trajectory.time(j))) < 1e-12);
        }
        let nl = evolve(&u, &EvolutionConfig::new(-1.0, 1.0, 0.05).with_stride(4)).unwrap();
        assert_eq!(nl.trajectory.len(), 6);
        assert!(nl.mass_drift() < 1e-12);
    }

    #[test]
    fn evolve_rejects_bad_config_and_nan() {
        let u = data(0.5, 3);
        assert!(evolve(&u, &EvolutionConfig::new(1.0, 1.0, 0.3)).is_err());
        assert!(evolve(&u, &EvolutionConfig::new(1.0, 1.0, 0.1).with_stride(3)).is_err());
        assert!(evolve(&u, &EvolutionConfig::new(1.0, 1.0, 0.1).with_boundary_margin(0.5)).is_err());
        let mut c = u.coeffs().to_vec();
        c[3] = Complex64::new(f64::NAN, 0.0);
        let bad = SpectralField::new(u.grid().clone(), c).unwrap();
        assert!(matches!(
            evolve(&bad, &EvolutionConfig::new(1.0, 1.0, 0.1)),
            Err(Error::NumericalAbort { .. })
        ));
    }

    #[test]
    fn boundary_mass_of_localized_data() {
        let g = make_grid(2, 1, 40.0, 64, 4, None).unwrap();
        let spec = SobolevSpec::theorem_space(&g, 0.1).unwrap();
        let f = localized_small_data(&g, &spec, 0.1, 1.5, 2.0, 4).unwrap();
        assert!(boundary_mass_fraction(&f, 0.1) < 1e-12);
        assert_eq!(boundary_mass_fraction(&f, 0.0), 0.0);
        let flat = to_spectral(&vec![Complex64::new(1.0, 0.0); g.len()], &g).unwrap();
        // zone |x| >= 0.4 L on a 64-point axis: 13 of 64 points per axis
        let inner = (64.0 - 13.0) / 64.0;
        assert!((boundary_mass_fraction(&flat, 0.1) - (1.0 - inner * inner)).abs() < 1e-12);
    }

    #[test]
    fn duhamel_trivial_cases() {
        let f = data(0.3, 5);
        let cfg = EvolutionConfig::new(1.0, 0.5, 0.05);
        let free = free_trajectory(&f, &cfg).unwrap();
        let u = evolve(&data(0.3, 6), &cfg).unwrap().trajectory;
        let t0 = duhamel_apply(&f, &u, 0.0).unwrap();
        let tz = duhamel_apply(&f, &Trajectory::new(0.0, 0.05, vec![SpectralField::zeros(f.grid()); 11]).unwrap(), 1.0)
            .unwrap();
        for j in 0..free.len() {
            assert!(max_diff(&t0.fields()[j], &free.fields()[j]) < 1e-12);
            assert!(max_diff(&tz.fields()[j], &free.fields()[j]) < 1e-12);
        }
    }

    #[test]
    fn duhamel_frozen_forcing_matches_phase_sum() {
        // u = pure mode, time-constant: N = kappa |a|^2 a / vol at the same
        // mode. Oracle: closed-form trapezoid sum
        // -i dt/2 sum_j (P^{J-j} + P^{J-j-1}) N with P = e^{-i dt omega}.
        let g = grid();
        let a = Complex64::new(0.4, 0.1);
        let pm = SpectralField::pure_mode(&g, &[1, 2], &[1], a).unwrap();
        let (dt, steps) = (0.05, 12);
        let traj = Trajectory::new(0.0, dt, vec![pm.clone(); steps + 1]).unwrap();
        let zero = SpectralField::zeros(&g);
        let out = duhamel_apply_with(&zero, &traj, 1.0, false).unwrap();
        let vol = g.lattice().volume();
        let nhat = a * a.norm_sqr() / vol;
        let omega = {
            let l = g.box_length;
            let k = 2.0 * std::f64::consts::PI / l;
            k * k * 5.0 + 1.0
        };
        let p = Complex64::from_polar(1.0, -dt * omega);
        let idx = g.index_of(&[1, 2], &[1]).unwrap();
        for jj in 1..=steps {
            let mut s = Complex64::default();
            for j in 0..jj {
                s += p.powu((jj - j) as u32) + p.powu((jj - j - 1) as u32);
            }
            let expect = Complex64::new(0.0, -0.5 * dt) * nhat * s;
            assert!((out.fields()[jj].coeffs()[idx] - expect).norm() < 1e-10 * nhat.norm().max(1.0));
        }
    }

    #[test]
    fn picard_trivial_cases() {
        let g = grid();
        let cfg = EvolutionConfig::new(1.0, 0.5, 0.05);
        let s = PicardSettings::default();
        let (u, tr) = picard_solve(&SpectralField::zeros(&g), &cfg, &s).unwrap();
        assert_eq!(tr.iterations, 1);
        assert!(u.fields().iter().all(|f| f.l2_norm() == 0.0));

        let f = data(0.5, 7);
        let (u, tr) = picard_solve(&f, &EvolutionConfig::new(0.0, 0.5, 0.05), &s).unwrap();
        assert_eq!(tr.iterations, 1);
        assert!(tr.converged);
        assert!(max_diff(u.fields().last().unwrap(), &free_propagate(&f, 0.5)) < 1e-12);
    }

    #[test]
    fn picard_fixed_point_and_oracle() {
        let f = data(0.05, 8);
        let cfg = EvolutionConfig::new(1.0, 0.5, 1.0 / 64.0).with_dealias(false);
        let s = PicardSettings::default();
        let (u, tr) = picard_solve(&f, &cfg, &s).unwrap();
        assert!(tr.converged && tr.ratios.iter().all(|&r| r < 0.5), "{tr:?}");
        let gated = tr.distances[..tr.distances.len() - 1].iter().filter(|&&d| d > 10.0 * s.tol).count();
        assert!(gated > 0);
        assert_eq!(tr.ratios.len(), gated);
        let again = duhamel_apply_with(&f, &u, 1.0, false).unwrap();
        assert!(solution_space_norm(&again.sub(&u).unwrap(), s.epsilon).unwrap() < s.tol);
        let oracle = evolve(&f, &cfg).unwrap().trajectory;
        assert!(u.relative_l2_error(&oracle).unwrap() < 1e-3);
    }

    #[test]
    fn picard_non_convergence_reports_trace() {
        let g = make_grid(2, 1, 4.0, 16, 4, None).unwrap();
        let f = random_small_data(&g, &SobolevSpec::theorem_space(&g, 0.1).unwrap(), 5.0, 2.0, 9).unwrap();
        let cfg = EvolutionConfig::new(1.0, 0.5, 1.0 / 32.0);
        let s = PicardSettings {
            max_iter: 6,
            ..PicardSettings::default()
        };
        match picard_solve(&f, &cfg, &s) {
            Err(Error::NonConvergence(tr)) => {
                assert!(tr.iterations <= 6);
                assert!(!tr.converged);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn difference_identity() {
        let cfg = EvolutionConfig::new(1.0, 0.25, 0.05);
        let v = free_trajectory(&data(0.2, 10), &cfg).unwrap();
        let w = free_trajectory(&data(0.2, 11), &cfg).unwrap();
        let same = difference_bound_check(&v, &v, 1.0, 0.1).unwrap();
        assert_eq!(same.identity_residual, 0.0);
        assert!(same.ratio.is_none());
        let r = difference_bound_check(&v, &w, 1.0, 0.1).unwrap();
        assert!(r.identity_residual <= 1e-12);
        assert!(r.ratio.unwrap().is_finite());
    }

    #[test]
    fn energy_of_plane_wave() {
        let g = grid();
        let a = Complex64::new(0.5, 0.0);
        let pm = SpectralField::pure_mode(&g, &[1, 0], &[2], a).unwrap();
        let k = 2.0 * std::f64::consts::PI / g.box_length;
        let vol = g.lattice().volume();
        let expect = (k * k + 4.0) * 0.25 + 0.5 * 0.0625 / vol;
        assert!((energy(&pm, 1.0) - expect).abs() < 1e-12);
    }
}
