//! Space-time mixed Lebesgue norms `L^p_t L^q_x L^2_y`, admissibility
//! arithmetic, and the solution-space norms of the small-data theory.
//!
//! Discretization: the inner `L^2` is taken by Parseval on the coefficients
//! that stay spectral, `L^q_x` is a Riemann sum with the lattice cell volume,
//! and `L^p_t` is the composite trapezoid rule over the stored snapshots.
//! Infinite exponents are maxima over the grid.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{apply_bessel_split, apply_bessel_y, apply_dx, hxy_norm, MultiIndex, SobolevSpec};
use crate::lattice::{GridSpec, LatticeField, SpectralField};

/// Scaling relation an exponent pair must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PairKind {
    /// `2/p + n/q = n/2`.
    Strichartz,
    /// `2/p + n/q = 1 + s` with `p > 2`.
    Derivative(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePair {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub kind: PairKind,
}

impl AdmissiblePair {
    pub fn new(n: usize, p: f64, kind: PairKind) -> Result<Self> {
        Ok(AdmissiblePair {
            n,
            p,
            q: admissible_q(n, p, kind)?,
            kind,
        })
    }

    /// Hölder conjugates `(p', q')`.
    pub fn dual(&self) -> (f64, f64) {
        (conjugate(self.p), conjugate(self.q))
    }
}

pub fn conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// The unique `q` making `(p, q)` admissible for `kind` in dimension `n`.
pub fn admissible_q(n: usize, p: f64, kind: PairKind) -> Result<f64> {
    if n == 0 || p.is_nan() {
        return Err(Error::InvalidExponent(format!("n = {n}, p = {p}")));
    }
    let nf = n as f64;
    let rhs = match kind {
        PairKind::Strichartz => {
            let ok = match n {
                1 => p >= 4.0,
                2 => p > 2.0,
                _ => p >= 2.0,
            };
            if !ok {
                let range = match n {
                    1 => "4 <= p <= inf",
                    2 => "2 < p <= inf",
                    _ => "2 <= p <= inf",
                };
                return Err(Error::InvalidExponent(format!(
                    "p = {p} violates {range} required by 2/p + n/q = n/2 at n = {n}"
                )));
            }
            nf / 2.0
        }
        PairKind::Derivative(s) => {
            if p <= 2.0 {
                return Err(Error::InvalidExponent(format!(
                    "p = {p} violates p > 2 required by 2/p + n/q = 1 + |alpha|"
                )));
            }
            1.0 + s as f64
        }
    };
    let nq = rhs - 2.0 * inv(p);
    if nq.abs() < 1e-14 {
        return Ok(f64::INFINITY);
    }
    let q = nf / nq;
    if !(q >= 1.0) {
        return Err(Error::InvalidExponent(format!(
            "no q >= 1 solves the relation for n = {n}, p = {p} ({kind:?})"
        )));
    }
    Ok(q)
}

/// Snapshots `u(t_0 + j dt)` on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    grid: GridSpec,
    t0: f64,
    dt: f64,
    fields: Vec<SpectralField>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, fields: Vec<SpectralField>) -> Result<Self> {
        let Some(first) = fields.first() else {
            return Err(Error::EmptyTrajectory);
        };
        if !(dt > 0.0) && fields.len() > 1 {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let grid = first.grid().clone();
        if fields.iter().any(|f| f.grid() != &grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Trajectory { grid, t0, dt, fields })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn fields(&self) -> &[SpectralField] {
        &self.fields
    }

    pub fn into_fields(self) -> Vec<SpectralField> {
        self.fields
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + self.dt * j as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Snapshot index of time `t`, tolerating roundoff in `t`.
    pub fn index_of_time(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let j = x.round();
        if j < 0.0 || (x - j).abs() > 1e-9 || j as usize >= self.len() {
            None
        } else {
            Some(j as usize)
        }
    }

    pub fn at_time(&self, t: f64) -> Result<&SpectralField> {
        self.index_of_time(t)
            .map(|j| &self.fields[j])
            .ok_or(Error::TimeOffGrid(t))
    }

    fn same_times(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid
            || self.len() != other.len()
            || (self.t0 - other.t0).abs() > 1e-12
            || (self.dt - other.dt).abs() > 1e-12 * self.dt.abs().max(1.0)
        {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_times(other)?;
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            grid: self.grid.clone(),
            t0: self.t0,
            dt: self.dt,
            fields,
        })
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField + Sync + Send) -> Self {
        Trajectory {
            grid: self.grid.clone(),
            t0: self.t0,
            dt: self.dt,
            fields: self.fields.par_iter().map(f).collect(),
        }
    }

    /// `max_j ||u(t_j) - v(t_j)||_{L^2} / ||v(t_j)||_{L^2}`.
    pub fn relative_l2_error(&self, reference: &Self) -> Result<f64> {
        self.same_times(reference)?;
        Ok(self
            .fields
            .iter()
            .zip(&reference.fields)
            .map(|(a, b)| {
                let d = a.sub(b).expect("same grid").l2_norm();
                let r = b.l2_norm();
                if r > 0.0 {
                    d / r
                } else {
                    d
                }
            })
            .fold(0.0, f64::max))
    }
}

/// Which variables the inner `L^2` integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerBlock {
    /// `L^q_x L^2_y`.
    Y,
    /// `L^q_{x_bar} L^2_{(x_n, y)}`; needs a split grid.
    XnY,
}

/// `||(sum_j |g_j|^2)^{1/2}||_{L^q}` with cell volume `dv`.
fn lq(values: impl Iterator<Item = f64>, q: f64, dv: f64) -> f64 {
    if q.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        (values.map(|g| g.powf(q)).sum::<f64>() * dv).powf(1.0 / q)
    }
}

/// Pointwise inner `L^2` norm: `g(x) = ||u(x, .)||_{L^2_y}` over the x
/// lattice, or `g(x_bar) = ||u(x_bar, .)||_{L^2_{(x_n,y)}}` over the x_bar
/// lattice, with the outer cell volume.
pub fn inner_l2_profile(field: &SpectralField, block: InnerBlock) -> Result<(Vec<f64>, f64)> {
    let grid = field.grid();
    let outer_axes: Vec<usize> = match block {
        InnerBlock::Y => grid.x_axes(),
        InnerBlock::XnY => {
            if grid.split_index.is_none() {
                return Err(Error::MissingSplit);
            }
            (0..grid.n - 1).collect()
        }
    };
    let inner_len = match block {
        InnerBlock::Y => grid.y_len(),
        InnerBlock::XnY => grid.y_len() * grid.points_per_axis,
    };
    let mut data = field.coeffs().to_vec();
    grid.lattice().inverse(&mut data, &outer_axes);
    let dv = grid.x_spacing().powi(outer_axes.len() as i32);
    let g = data
        .chunks_exact(inner_len)
        .map(|row| row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    Ok((g, dv))
}

/// Instantaneous `L^q_x L^2_y` (or `L^q_{x_bar} L^2_{(x_n,y)}`) norm.
pub fn lq_l2(field: &SpectralField, q: f64, block: InnerBlock) -> Result<f64> {
    let (g, dv) = inner_l2_profile(field, block)?;
    Ok(lq(g.into_iter(), q, dv))
}

/// `(int |N(t)|^p dt)^{1/p}` by the trapezoid rule; max for `p = inf`.
pub fn time_norm(values: &[f64], dt: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().copied().fold(0.0, f64::max);
    }
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let s: f64 = values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            w * v.powf(p)
        })
        .sum();
    (s * dt).powf(1.0 / p)
}

fn check_exponent(name: &str, p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(format!("{name} = {p} is not in [1, inf]")))
    }
}

/// `L^p_t L^q L^2` norm of `map(u(t))` over the trajectory.
pub fn mixed_norm_mapped(
    traj: &Trajectory,
    p: f64,
    q: f64,
    block: InnerBlock,
    map: impl Fn(&SpectralField) -> Result<SpectralField> + Sync,
) -> Result<f64> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    let per_time = traj
        .fields
        .par_iter()
        .map(|f| lq_l2(&map(f)?, q, block))
        .collect::<Result<Vec<f64>>>()?;
    Ok(time_norm(&per_time, traj.dt, p))
}

/// `||u||_{L^p_t L^q_x L^2_y}`.
pub fn mixed_norm(traj: &Trajectory, p: f64, q: f64) -> Result<f64> {
    mixed_norm_mapped(traj, p, q, InnerBlock::Y, |f| Ok(f.clone()))
}

/// `||u||_{L^p_t L^q_{x_bar} L^2_{(x_n,y)}}`.
pub fn mixed_norm_split(traj: &Trajectory, p: f64, q: f64) -> Result<f64> {
    mixed_norm_mapped(traj, p, q, InnerBlock::XnY, |f| Ok(f.clone()))
}

/// `y`-regularity inside `X_eps` for even `n`: `(1-Delta_y)^{(k/2+eps)/2}`.
pub fn even_x_rho(k: usize, epsilon: f64) -> f64 {
    k as f64 / 2.0 + epsilon
}

/// Exponent `rho` with `(1 - d_{x_n}^2 - Delta_y)^{rho/2} =
/// (1 - d_{x_n}^2 - Delta_y)^{(k+1)/4 + eps}` inside the odd `X` norm.
pub fn odd_x_rho(k: usize, epsilon: f64) -> f64 {
    (k as f64 + 1.0) / 2.0 + 2.0 * epsilon
}

/// `X_eps` for even `n >= 2`: `sum_{s, |alpha| = s}
/// ||d^alpha (1-Delta_y)^{(k/2+eps)/2} u||_{L^4_t L^{2n/(1+2s)}_x L^2_y}`.
pub fn x_eps_norm(traj: &Trajectory, epsilon: f64) -> Result<f64> {
    let g = traj.grid();
    if g.n < 2 || g.n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "X_eps (even case) needs even n >= 2, got n = {}",
            g.n
        )));
    }
    let rho = even_x_rho(g.k, epsilon);
    let mut total = 0.0;
    for s in 0..=((g.n - 2) / 2) as u32 {
        let q = 2.0 * g.n as f64 / (1.0 + 2.0 * s as f64);
        for alpha in MultiIndex::of_order(g.n, s) {
            total += mixed_norm_mapped(traj, 4.0, q, InnerBlock::Y, |f| apply_dx(&apply_bessel_y(f, rho), &alpha))?;
        }
    }
    Ok(total)
}

/// Odd-`n` solution norm: `sum_{s, |alpha| = s} ||d_{x_bar}^alpha
/// (1 - d_{x_n}^2 - Delta_y)^{(k+1)/4+eps} u||_{L^4_t L^{2(n-1)/(1+2s)}_{x_bar} L^2_{(x_n,y)}}`.
pub fn x_norm_odd(traj: &Trajectory, epsilon: f64) -> Result<f64> {
    x_norm_odd_with_rho(traj, odd_x_rho(traj.grid().k, epsilon))
}

/// Odd-`n` solution norm with an explicit `(1-d_{x_n}^2-Delta_y)^{rho/2}`.
pub fn x_norm_odd_with_rho(traj: &Trajectory, rho: f64) -> Result<f64> {
    let g = traj.grid();
    if g.n < 3 || g.n % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "odd X norm needs odd n >= 3, got n = {}",
            g.n
        )));
    }
    if g.split_index.is_none() {
        return Err(Error::MissingSplit);
    }
    let mut total = 0.0;
    for s in 0..=((g.n - 3) / 2) as u32 {
        let q = 2.0 * (g.n - 1) as f64 / (1.0 + 2.0 * s as f64);
        for alpha in MultiIndex::of_order(g.n - 1, s) {
            total += mixed_norm_mapped(traj, 4.0, q, InnerBlock::XnY, |f| {
                apply_dx(&apply_bessel_split(f, rho)?, &alpha)
            })?;
        }
    }
    Ok(total)
}

/// The `X` part of the solution space, by parity of `n`.
pub fn x_space_norm(traj: &Trajectory, epsilon: f64) -> Result<f64> {
    if traj.grid().n % 2 == 0 {
        x_eps_norm(traj, epsilon)
    } else {
        x_norm_odd(traj, epsilon)
    }
}

/// `sup_t ||u(t)||_{H^{theta,rho}}` in the data space of the theorem.
pub fn sup_time_sobolev(traj: &Trajectory, epsilon: f64) -> Result<f64> {
    let spec = SobolevSpec::theorem_space(traj.grid(), epsilon)?;
    let vals = traj
        .fields
        .par_iter()
        .map(|f| hxy_norm(f, &spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `||u||_{Y_eps} = max(||u||_{L^inf_t H}, ||u||_X)`.
pub fn solution_space_norm(traj: &Trajectory, epsilon: f64) -> Result<f64> {
    Ok(sup_time_sobolev(traj, epsilon)?.max(x_space_norm(traj, epsilon)?))
}

/// Scalar space-time samples `g(t_j, x_i)` with quadrature data.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledTrajectory {
    pub dt: f64,
    pub cell_volume: f64,
    /// `values[j][i]` at time `j`, spatial point `i`.
    pub values: Vec<Vec<Complex64>>,
}

impl SampledTrajectory {
    pub fn lp_lq(&self, p: f64, q: f64) -> f64 {
        let per_t: Vec<f64> = self
            .values
            .iter()
            .map(|row| lq(row.iter().map(|v| v.norm()), q, self.cell_volume))
            .collect();
        time_norm(&per_t, self.dt, p)
    }

    /// Pointwise product of several sampled trajectories.
    pub fn product(factors: &[SampledTrajectory]) -> Result<SampledTrajectory> {
        let first = factors.first().ok_or(Error::EmptyTrajectory)?;
        let mut values = first.values.clone();
        for f in &factors[1..] {
            if f.values.len() != values.len() {
                return Err(Error::GridMismatch);
            }
            for (row, other) in values.iter_mut().zip(&f.values) {
                if row.len() != other.len() {
                    return Err(Error::GridMismatch);
                }
                for (a, b) in row.iter_mut().zip(other) {
                    *a *= b;
                }
            }
        }
        Ok(SampledTrajectory {
            dt: first.dt,
            cell_volume: first.cell_volume,
            values,
        })
    }
}

/// Inner `L^2` profiles of `map(u(t))` as a scalar space-time sample set.
pub fn profile_trajectory(
    traj: &Trajectory,
    block: InnerBlock,
    map: impl Fn(&SpectralField) -> Result<SpectralField> + Sync,
) -> Result<SampledTrajectory> {
    let rows = traj
        .fields
        .par_iter()
        .map(|f| inner_l2_profile(&map(f)?, block))
        .collect::<Result<Vec<_>>>()?;
    let cell_volume = rows[0].1;
    Ok(SampledTrajectory {
        dt: traj.dt,
        cell_volume,
        values: rows
            .into_iter()
            .map(|(g, _)| g.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
            .collect(),
    })
}

/// Per-mode x-physical samples `u_j(t, x)` of a trajectory, one entry per
/// y-mode in lattice order.
pub fn mode_samples(traj: &Trajectory) -> Vec<SampledTrajectory> {
    let g = traj.grid();
    let (xlen, ylen) = (g.x_len(), g.y_len());
    let per_time: Vec<Vec<Complex64>> = traj
        .fields
        .par_iter()
        .map(|f| {
            let mut d = f.coeffs().to_vec();
            g.lattice().inverse(&mut d, &g.x_axes());
            d
        })
        .collect();
    let dv = g.x_spacing().powi(g.n as i32);
    (0..ylen)
        .map(|iy| SampledTrajectory {
            dt: traj.dt,
            cell_volume: dv,
            values: per_time
                .iter()
                .map(|d| (0..xlen).map(|ix| d[ix * ylen + iy]).collect())
                .collect(),
        })
        .collect()
}

/// `L^p_t L^q_x` norm of an x-only trajectory.
pub fn mixed_norm_x(fields: &[LatticeField], dt: f64, p: f64, q: f64) -> Result<f64> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    let first = fields.first().ok_or(Error::EmptyTrajectory)?;
    let dv = first.lattice().cell_volume();
    let per_t = fields
        .par_iter()
        .map(|h| {
            if h.lattice() != first.lattice() {
                return Err(Error::GridMismatch);
            }
            Ok(lq(h.to_samples().iter().map(|v| v.norm()), q, dv))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(time_norm(&per_t, dt, p))
}

/// `||u_j||_{L^p_t L^q_x l^2_j} - ||u_j||_{l^2_j L^p_t L^q_x}`; nonpositive for
/// `p, q >= 2`.
pub fn minkowski_gap(stack: &[SampledTrajectory], p: f64, q: f64) -> Result<f64> {
    if p < 2.0 || q < 2.0 {
        return Err(Error::InvalidExponent(format!(
            "Minkowski ordering needs p, q >= 2 (got p = {p}, q = {q})"
        )));
    }
    let first = stack.first().ok_or(Error::EmptyTrajectory)?;
    let shape_ok = stack.iter().all(|s| {
        s.values.len() == first.values.len()
            && s.values.iter().zip(&first.values).all(|(a, b)| a.len() == b.len())
    });
    if !shape_ok {
        return Err(Error::GridMismatch);
    }
    let combined = SampledTrajectory {
        dt: first.dt,
        cell_volume: first.cell_volume,
        values: (0..first.values.len())
            .map(|t| {
                (0..first.values[t].len())
                    .map(|i| {
                        let s: f64 = stack.iter().map(|u| u.values[t][i].norm_sqr()).sum();
                        Complex64::new(s.sqrt(), 0.0)
                    })
                    .collect()
            })
            .collect(),
    };
    let lhs = combined.lp_lq(p, q);
    let rhs = stack.iter().map(|u| u.lp_lq(p, q).powi(2)).sum::<f64>().sqrt();
    Ok(lhs - rhs)
}

/// `||prod g_j||_{L^P L^Q} - prod ||g_j||_{L^{p_j} L^{q_j}}`; nonpositive when
/// `1/P = sum 1/p_j` and `1/Q = sum 1/q_j`.
pub fn holder_gap(factors: &[SampledTrajectory], exponents: &[(f64, f64)], product: (f64, f64)) -> Result<f64> {
    if factors.len() != exponents.len() || factors.is_empty() {
        return Err(Error::InvalidArgument("one exponent pair per factor".into()));
    }
    let sp: f64 = exponents.iter().map(|e| inv(e.0)).sum();
    let sq: f64 = exponents.iter().map(|e| inv(e.1)).sum();
    if (sp - inv(product.0)).abs() > 1e-12 || (sq - inv(product.1)).abs() > 1e-12 {
        return Err(Error::InvalidExponent(format!(
            "Hölder relation fails: sum 1/p_j = {sp}, 1/P = {}; sum 1/q_j = {sq}, 1/Q = {}",
            inv(product.0),
            inv(product.1)
        )));
    }
    let lhs = SampledTrajectory::product(factors)?.lp_lq(product.0, product.1);
    let rhs: f64 = factors
        .iter()
        .zip(exponents)
        .map(|(g, e)| g.lp_lq(e.0, e.1))
        .product();
    Ok(lhs - rhs)
}
