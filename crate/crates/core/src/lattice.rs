//! Discrete geometry of `R^n_x x T^k_y` and the spectral transforms between
//! physical samples and Fourier coefficients.
//!
//! Conventions used everywhere in the crate:
//!
//! * x-axes are periodic boxes `[-L/2, L/2)` sampled at `N_x` points; the
//!   wavenumbers are `(2 pi / L) * {-N_x/2, ..., N_x/2 - 1}`.
//! * y-axes are the flat torus of side `2 pi` sampled at `N_y` points starting
//!   at `y = 0`; the modes are the integers `{-N_y/2, ..., N_y/2 - 1}` and
//!   `-Delta_y` has eigenvalue `|m|^2`.
//! * The coefficients are taken against the orthonormal basis
//!   `e^{i xi.x} e^{i m.y} / sqrt(L^n (2 pi)^k)`, with the forward transform
//!   `c = int f e^{-i xi.x} ...`. Consequently `sum |c|^2` equals the
//!   quadrature `L^2_{x,y}` norm of the samples and `e^{it Delta}` has symbol
//!   `e^{-it(|xi|^2 + |m|^2)}`.
//! * Tensors are row-major over the axes `[x_0, .., x_{n-1}, y_0, .., y_{k-1}]`
//!   and every axis is stored in natural FFT order (index `j` holds frequency
//!   `j` for `j < N/2` and `j - N` otherwise).

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One periodic axis of a lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub length: f64,
    pub points: usize,
    /// Samples start at `-length/2` when true, at `0` otherwise.
    pub centered: bool,
}

impl Axis {
    pub fn wavenumbers(&self) -> Vec<f64> {
        let scale = 2.0 * PI / self.length;
        (0..self.points)
            .map(|j| scale * signed_index(j, self.points) as f64)
            .collect()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        let origin = if self.centered { -0.5 * self.length } else { 0.0 };
        let h = self.length / self.points as f64;
        (0..self.points).map(|j| origin + h * j as f64).collect()
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    // (-1)^j for centered axes: e^{-i xi x_0} with x_0 = -L/2.
    fn phase(&self, j: usize) -> f64 {
        if self.centered && signed_index(j, self.points) % 2 != 0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Signed frequency index of FFT slot `j` on an axis with `n` points.
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// FFT slot of signed frequency index `k`, if representable.
pub fn slot_of(k: i64, n: usize) -> Option<usize> {
    let half = (n / 2) as i64;
    if k < -half || k >= half {
        None
    } else if k >= 0 {
        Some(k as usize)
    } else {
        Some((k + n as i64) as usize)
    }
}

/// Product of periodic axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    axes: Vec<Axis>,
}

impl Lattice {
    pub fn new(axes: Vec<Axis>) -> Self {
        Lattice { axes }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.length).product()
    }

    /// `sum_a omega_a^2` at every flat index.
    pub fn squared_wavenumber(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|a| a.wavenumbers().iter().map(|w| w * w).collect())
            .collect();
        combine(&per_axis, 0.0, |acc, v| acc + v)
    }

    /// Forward transform (samples to coefficients) along the listed axes.
    pub fn forward(&self, data: &mut [Complex64], axes: &[usize]) {
        for &a in axes {
            self.transform_axis(data, a, Direction::Forward);
        }
    }

    /// Inverse transform (coefficients to samples) along the listed axes.
    pub fn inverse(&self, data: &mut [Complex64], axes: &[usize]) {
        for &a in axes {
            self.transform_axis(data, a, Direction::Inverse);
        }
    }

    pub fn all_axes(&self) -> Vec<usize> {
        (0..self.dims()).collect()
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, dir: Direction) {
        let ax = self.axes[axis];
        let n = ax.points;
        let inner: usize = self.axes[axis + 1..].iter().map(|a| a.points).product();
        let factors: Vec<f64> = (0..n)
            .map(|j| match dir {
                Direction::Forward => ax.phase(j) * ax.length.sqrt() / n as f64,
                Direction::Inverse => ax.phase(j) / ax.length.sqrt(),
            })
            .collect();
        fft_lanes(data, n, inner, dir, &factors);
    }
}

/// Evaluate `op` over the tensor product of per-axis tables (row-major, axis 0
/// slowest).
pub fn combine<T: Copy>(per_axis: &[Vec<T>], init: T, op: impl Fn(T, T) -> T) -> Vec<T> {
    let mut out = vec![init];
    for table in per_axis {
        let mut next = Vec::with_capacity(out.len() * table.len());
        for &acc in &out {
            for &v in table {
                next.push(op(acc, v));
            }
        }
        out = next;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

// Transforms every lane of length `n` with stride `inner`. Forward applies
// `factors` after the FFT, inverse applies them before.
fn fft_lanes(data: &mut [Complex64], n: usize, inner: usize, dir: Direction, factors: &[f64]) {
    if n == 1 {
        for v in data.iter_mut() {
            *v *= factors[0];
        }
        return;
    }
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(n),
            Direction::Inverse => p.plan_fft_inverse(n),
        }
    });
    let block = n * inner;
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let scale_lanes = |buf: &mut [Complex64]| {
        for lane in buf.chunks_exact_mut(n) {
            for (v, f) in lane.iter_mut().zip(factors) {
                *v *= f;
            }
        }
    };
    if inner == 1 {
        if dir == Direction::Inverse {
            scale_lanes(data);
        }
        fft.process_with_scratch(data, &mut scratch);
        if dir == Direction::Forward {
            scale_lanes(data);
        }
        return;
    }
    let mut buf = vec![Complex64::default(); block];
    for chunk in data.chunks_exact_mut(block) {
        for j in 0..n {
            for i in 0..inner {
                buf[i * n + j] = chunk[j * inner + i];
            }
        }
        if dir == Direction::Inverse {
            scale_lanes(&mut buf);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        if dir == Direction::Forward {
            scale_lanes(&mut buf);
        }
        for j in 0..n {
            for i in 0..inner {
                chunk[j * inner + i] = buf[i * n + j];
            }
        }
    }
}

/// Discretization of `R^n x T^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub k: usize,
    pub box_length: f64,
    pub points_per_axis: usize,
    pub torus_modes: usize,
    /// When present, always `n - 1`: the coordinate split `x = (x_bar, x_n)`.
    pub split_index: Option<usize>,
}

/// Validated grid constructor.
pub fn make_grid(
    n: usize,
    k: usize,
    box_length: f64,
    points_per_axis: usize,
    torus_modes: usize,
    split: Option<usize>,
) -> Result<GridSpec> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidGrid(format!(
            "dimensions must be >= 1 (n = {n}, k = {k})"
        )));
    }
    if !(box_length > 0.0 && box_length.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "box length must be positive, got {box_length}"
        )));
    }
    for (name, v) in [("points_per_axis", points_per_axis), ("torus_modes", torus_modes)] {
        if !v.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "{name} must be a power of two, got {v}"
            )));
        }
    }
    if let Some(s) = split {
        if s + 1 != n {
            return Err(Error::InvalidGrid(format!(
                "split index must be n-1 = {}, got {s}",
                n as i64 - 1
            )));
        }
    }
    Ok(GridSpec {
        n,
        k,
        box_length,
        points_per_axis,
        torus_modes,
        split_index: split,
    })
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        make_grid(
            self.n,
            self.k,
            self.box_length,
            self.points_per_axis,
            self.torus_modes,
            self.split_index,
        )
        .map(|_| ())
    }

    fn x_axis(&self) -> Axis {
        Axis {
            length: self.box_length,
            points: self.points_per_axis,
            centered: true,
        }
    }

    fn y_axis(&self) -> Axis {
        Axis {
            length: 2.0 * PI,
            points: self.torus_modes,
            centered: false,
        }
    }

    /// Full lattice, x-axes first.
    pub fn lattice(&self) -> Lattice {
        let mut axes = vec![self.x_axis(); self.n];
        axes.extend(std::iter::repeat_n(self.y_axis(), self.k));
        Lattice::new(axes)
    }

    pub fn x_lattice(&self) -> Lattice {
        Lattice::new(vec![self.x_axis(); self.n])
    }

    /// Lattice of `x_bar = (x_0, .., x_{n-2})`.
    pub fn xbar_lattice(&self) -> Lattice {
        Lattice::new(vec![self.x_axis(); self.n - 1])
    }

    pub fn y_lattice(&self) -> Lattice {
        Lattice::new(vec![self.y_axis(); self.k])
    }

    pub fn x_len(&self) -> usize {
        self.points_per_axis.pow(self.n as u32)
    }

    pub fn y_len(&self) -> usize {
        self.torus_modes.pow(self.k as u32)
    }

    pub fn len(&self) -> usize {
        self.x_len() * self.y_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_axes(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    pub fn y_axes(&self) -> Vec<usize> {
        (self.n..self.n + self.k).collect()
    }

    /// x-wavenumbers of one axis in FFT order.
    pub fn x_wavenumbers(&self) -> Vec<f64> {
        self.x_axis().wavenumbers()
    }

    /// Sorted x-wavenumbers of one axis.
    pub fn x_frequencies_sorted(&self) -> Vec<f64> {
        let mut w = self.x_wavenumbers();
        w.sort_by(f64::total_cmp);
        w
    }

    pub fn x_coordinates(&self) -> Vec<f64> {
        self.x_axis().coordinates()
    }

    pub fn y_coordinates(&self) -> Vec<f64> {
        self.y_axis().coordinates()
    }

    pub fn x_spacing(&self) -> f64 {
        self.box_length / self.points_per_axis as f64
    }

    /// Signed torus modes of one y-axis in FFT order.
    pub fn y_modes(&self) -> Vec<i64> {
        (0..self.torus_modes)
            .map(|j| signed_index(j, self.torus_modes))
            .collect()
    }

    /// `|xi|^2` over the x-lattice.
    pub fn x_symbol(&self) -> Vec<f64> {
        self.x_lattice().squared_wavenumber()
    }

    /// `|m|^2` over the y-lattice.
    pub fn y_symbol(&self) -> Vec<f64> {
        self.y_lattice().squared_wavenumber()
    }

    /// Flat index of the coefficient with signed x-frequency indices `xi` and
    /// torus mode `m`.
    pub fn index_of(&self, xi: &[i64], m: &[i64]) -> Result<usize> {
        if xi.len() != self.n || m.len() != self.k {
            return Err(Error::InvalidArgument(format!(
                "mode has {}+{} entries, grid is {}+{}",
                xi.len(),
                m.len(),
                self.n,
                self.k
            )));
        }
        let mut idx = 0;
        for &v in xi {
            let s = slot_of(v, self.points_per_axis).ok_or_else(|| {
                Error::InvalidArgument(format!("x-frequency index {v} outside lattice"))
            })?;
            idx = idx * self.points_per_axis + s;
        }
        for &v in m {
            let s = slot_of(v, self.torus_modes)
                .ok_or_else(|| Error::InvalidArgument(format!("torus mode {v} outside lattice")))?;
            idx = idx * self.torus_modes + s;
        }
        Ok(idx)
    }
}

/// Coefficient tensor on the product grid. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: coeffs.len(),
            });
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    /// Single coefficient `amplitude` at `(xi, m)`; the field has `L^2` norm
    /// `|amplitude|`.
    pub fn pure_mode(grid: &GridSpec, xi: &[i64], m: &[i64], amplitude: Complex64) -> Result<Self> {
        let mut f = Self::zeros(grid);
        let idx = grid.index_of(xi, m)?;
        f.coeffs[idx] = amplitude;
        Ok(f)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `L^2_{x,y}` norm by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn with_coeffs(&self, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), self.coeffs.len());
        SpectralField {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        ))
    }

    /// Multiply coefficient `(x-index, y-index)` by `factor(ix, iy)`.
    pub(crate) fn map_indexed(&self, factor: impl Fn(usize, usize) -> Complex64) -> Self {
        let ylen = self.grid.y_len();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * factor(i / ylen, i % ylen))
            .collect();
        self.with_coeffs(coeffs)
    }

    /// Largest signed frequency index (in lattice units) carrying a
    /// coefficient above `tol`, per axis block: `(x, y)`.
    pub fn band_extent(&self, tol: f64) -> (i64, i64) {
        let shape = self.grid.lattice().shape();
        let mut ext = (0i64, 0i64);
        for (flat, c) in self.coeffs.iter().enumerate() {
            if c.norm() <= tol {
                continue;
            }
            let mut rem = flat;
            for (a, &np) in shape.iter().enumerate().rev() {
                let s = signed_index(rem % np, np).abs();
                rem /= np;
                if a < self.grid.n {
                    ext.0 = ext.0.max(s);
                } else {
                    ext.1 = ext.1.max(s);
                }
            }
        }
        ext
    }
}

/// Samples (row-major, x-axes first) to coefficients.
pub fn to_spectral(samples: &[Complex64], grid: &GridSpec) -> Result<SpectralField> {
    if samples.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            found: samples.len(),
        });
    }
    let mut data = samples.to_vec();
    let lat = grid.lattice();
    lat.forward(&mut data, &lat.all_axes());
    SpectralField::new(grid.clone(), data)
}

/// Coefficients to physical samples; exact inverse of [`to_spectral`].
pub fn from_spectral(field: &SpectralField) -> Vec<Complex64> {
    let mut data = field.coeffs.clone();
    let lat = field.grid.lattice();
    lat.inverse(&mut data, &lat.all_axes());
    data
}

/// Coefficient tensor on a single-block lattice: the x-only slices `h(x)` of
/// the reduced problems, or y-only fields on the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    lattice: Lattice,
    coeffs: Vec<Complex64>,
}

impl LatticeField {
    pub fn new(lattice: Lattice, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lattice.len() {
            return Err(Error::ShapeMismatch {
                expected: lattice.len(),
                found: coeffs.len(),
            });
        }
        Ok(LatticeField { lattice, coeffs })
    }

    pub fn zeros(lattice: &Lattice) -> Self {
        LatticeField {
            lattice: lattice.clone(),
            coeffs: vec![Complex64::default(); lattice.len()],
        }
    }

    pub fn from_samples(lattice: &Lattice, samples: &[Complex64]) -> Result<Self> {
        if samples.len() != lattice.len() {
            return Err(Error::ShapeMismatch {
                expected: lattice.len(),
                found: samples.len(),
            });
        }
        let mut data = samples.to_vec();
        lattice.forward(&mut data, &lattice.all_axes());
        Ok(LatticeField {
            lattice: lattice.clone(),
            coeffs: data,
        })
    }

    pub fn to_samples(&self) -> Vec<Complex64> {
        let mut data = self.coeffs.clone();
        self.lattice.inverse(&mut data, &self.lattice.all_axes());
        data
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn with_coeffs(&self, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), self.coeffs.len());
        LatticeField {
            lattice: self.lattice.clone(),
            coeffs,
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.lattice != other.lattice {
            return Err(Error::GridMismatch);
        }
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }
}
