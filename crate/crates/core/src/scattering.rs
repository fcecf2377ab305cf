//! Scattering-state extraction from a stored trajectory: pullbacks
//! `e^{-itDelta} u(t)`, their Cauchy differences on a probe ladder, and
//! dispersive decay fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{hxy_norm, SobolevSpec};
use crate::lattice::SpectralField;
use crate::mixednorms::{lq_l2, InnerBlock, Trajectory};
use crate::propagators::free_propagate;

/// `e^{-it Delta} u(t)` at a snapshot time.
pub fn pullback(traj: &Trajectory, t: f64) -> Result<SpectralField> {
    Ok(free_propagate(traj.at_time(t)?, -t))
}

/// Least-squares fit of `log ||u(t)||_{L^q_x L^2_y}` against `log t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub q: f64,
    pub slope: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// Set when the window spans less than a decade.
    pub short_window: bool,
}

/// Cauchy-sequence diagnostics of the pullbacks on a probe ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringReport {
    pub probe_times: Vec<f64>,
    /// `D_i = ||g(T_{i+1}) - g(T_i)||_H`.
    pub cauchy_differences: Vec<f64>,
    /// `e_i = ||e^{iT_i Delta} f_0 - u(T_i)||_H`; the last entry is 0 since
    /// `f_0` is the last pullback.
    pub scattering_errors: Vec<f64>,
    /// `e` at the penultimate probe.
    pub terminal_error: f64,
    pub pullback_norms: Vec<f64>,
    pub f0_norm: f64,
    pub space: SobolevSpec,
    pub strictly_decreasing: bool,
    pub decay: Option<DecayFit>,
    #[serde(skip)]
    pub pullbacks: Vec<SpectralField>,
}

/// `f_0 = g(T_M)` with the ladder diagnostics measured in `space`.
pub fn extract_scattering_state(
    traj: &Trajectory,
    probe_times: &[f64],
    space: &SobolevSpec,
) -> Result<(SpectralField, ScatteringReport)> {
    if probe_times.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 probe times, got {}",
            probe_times.len()
        )));
    }
    if probe_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("probe times must increase".into()));
    }
    let pullbacks = probe_times
        .par_iter()
        .map(|&t| pullback(traj, t))
        .collect::<Result<Vec<_>>>()?;
    let f0 = pullbacks[pullbacks.len() - 1].clone();
    let cauchy_differences = pullbacks
        .par_windows(2)
        .map(|w| hxy_norm(&w[1].sub(&w[0])?, space))
        .collect::<Result<Vec<_>>>()?;
    let scattering_errors = probe_times
        .par_iter()
        .map(|&t| hxy_norm(&free_propagate(&f0, t).sub(traj.at_time(t)?)?, space))
        .collect::<Result<Vec<_>>>()?;
    let pullback_norms = pullbacks
        .iter()
        .map(|g| hxy_norm(g, space))
        .collect::<Result<Vec<_>>>()?;
    let strictly_decreasing = cauchy_differences.windows(2).all(|w| w[1] < w[0]);
    let report = ScatteringReport {
        probe_times: probe_times.to_vec(),
        terminal_error: scattering_errors[scattering_errors.len() - 2],
        cauchy_differences,
        scattering_errors,
        f0_norm: hxy_norm(&f0, space)?,
        pullback_norms,
        space: *space,
        strictly_decreasing,
        decay: None,
        pullbacks,
    };
    Ok((f0, report))
}

/// Slope of `log ||u(t)||_{L^q_x L^2_y}` versus `log t` over the snapshots in
/// `window`. Linear theory predicts `-n(1/2 - 1/q)`.
pub fn dispersive_decay_fit(traj: &Trajectory, q: f64, window: (f64, f64)) -> Result<DecayFit> {
    if !(q > 2.0) {
        return Err(Error::InvalidExponent(format!("decay fit needs q > 2, got {q}")));
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("bad fit window [{lo}, {hi}]")));
    }
    let idx: Vec<usize> = (0..traj.len())
        .filter(|&j| {
            let t = traj.time(j);
            t >= lo - 1e-9 && t <= hi + 1e-9
        })
        .collect();
    if idx.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "fewer than two snapshots inside [{lo}, {hi}]"
        )));
    }
    let pts = idx
        .par_iter()
        .map(|&j| Ok((traj.time(j).ln(), lq_l2(&traj.fields()[j], q, InnerBlock::Y)?.ln())))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let t_first = traj.time(idx[0]);
    let t_last = traj.time(idx[idx.len() - 1]);
    let short_window = t_last / t_first < 10.0;
    if short_window {
        log::warn!("decay fit window [{t_first}, {t_last}] spans less than a decade");
    }
    Ok(DecayFit {
        q,
        slope,
        residual,
        window: (t_first, t_last),
        samples: idx.len(),
        short_window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{localized_small_data, random_small_data};
    use crate::lattice::make_grid;
    use crate::solver::{evolve, free_trajectory, EvolutionConfig};

    #[test]
    fn pullback_of_free_flow_is_constant() {
        let g = make_grid(2, 1, 8.0, 16, 4, None).unwrap();
        let spec = SobolevSpec::theorem_space(&g, 0.1).unwrap();
        let f = random_small_data(&g, &spec, 0.1, 2.0, 1).unwrap();
        let traj = free_trajectory(&f, &EvolutionConfig::new(0.0, 2.0, 0.25)).unwrap();
        assert_eq!(pullback(&traj, 0.0).unwrap(), f);
        for t in [0.5, 1.0, 2.0] {
            let d = pullback(&traj, t).unwrap().sub(&f).unwrap().l2_norm();
            assert!(d < 1e-12);
        }
        assert!(matches!(pullback(&traj, 0.3), Err(Error::TimeOffGrid(_))));

        let (f0, rep) = extract_scattering_state(&traj, &[0.5, 1.0, 2.0], &spec).unwrap();
        assert!(f0.sub(&f).unwrap().l2_norm() < 1e-12);
        assert!(rep.cauchy_differences.iter().all(|&d| d < 1e-12));
        assert!(extract_scattering_state(&traj, &[1.0, 2.0], &spec).is_err());
    }

    #[test]
    fn small_nonlinear_run_has_cauchy_pullbacks() {
        let g = make_grid(2, 1, 16.0 * std::f64::consts::PI, 64, 4, None).unwrap();
        let spec = SobolevSpec::theorem_space(&g, 0.1).unwrap();
        let f = localized_small_data(&g, &spec, 0.3, 1.5, 2.0, 2).unwrap();
        let ev = evolve(&f, &EvolutionConfig::new(1.0, 8.0, 1.0 / 16.0).with_stride(4)).unwrap();
        let (_, rep) = extract_scattering_state(&ev.trajectory, &[1.0, 2.0, 4.0, 8.0], &spec).unwrap();
        assert!(rep.strictly_decreasing, "{:?}", rep.cauchy_differences);
        assert!(rep.scattering_errors[2] < rep.scattering_errors[0]);
    }

    #[test]
    fn decay_fit_examples() {
        let g = make_grid(2, 1, 8.0, 16, 4, None).unwrap();
        let spec = SobolevSpec::theorem_space(&g, 0.1).unwrap();
        let f = random_small_data(&g, &spec, 0.1, 2.0, 3).unwrap();
        let constant = Trajectory::new(0.0, 0.5, vec![f; 9]).unwrap();
        let fit = dispersive_decay_fit(&constant, 4.0, (0.5, 4.0)).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(fit.short_window);
        assert!(dispersive_decay_fit(&constant, 2.0, (0.5, 4.0)).is_err());
    }
}
