//! Exact linear flows on the product grid, the eigenmode decomposition along
//! `y`, the partial Fourier split along `x_n`, and the reduced per-mode
//! evolutions they produce.

mod eigen_table;

pub use eigen_table::{table_decompose, table_free_propagate, table_reconstruct, EigenTable, TableField};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{signed_index, GridSpec, Lattice, LatticeField, SpectralField};

pub mod mutation {
    //! Negative-control hook for the self-test.
    //!
    //! Inside [`with_flipped_propagator_sign`] the free propagator uses the
    //! symbol `e^{+it(|xi|^2+|m|^2)}` instead of `e^{-it(|xi|^2+|m|^2)}`. The
    //! closure runs on a private single-thread pool whose worker carries the
    //! flag, so nested parallel iterators see it and other threads do not.
    use std::cell::Cell;

    thread_local! {
        static FLIP_SIGN: Cell<bool> = const { Cell::new(false) };
    }

    pub fn with_flipped_propagator_sign<R: Send>(f: impl FnOnce() -> R + Send) -> R {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .start_handler(|_| FLIP_SIGN.with(|c| c.set(true)))
            .build()
            .expect("mutation thread pool");
        pool.install(f)
    }

    pub(crate) fn propagator_sign() -> f64 {
        if FLIP_SIGN.with(Cell::get) {
            1.0
        } else {
            -1.0
        }
    }
}

/// `e^{it Delta_{x,y}} f`: coefficient `(xi, m)` times `e^{-it(|xi|^2+|m|^2)}`.
pub fn free_propagate(f: &SpectralField, t: f64) -> SpectralField {
    let sign = mutation::propagator_sign();
    let xs = f.grid().x_symbol();
    let ys = f.grid().y_symbol();
    f.map_indexed(|ix, iy| Complex64::from_polar(1.0, sign * t * (xs[ix] + ys[iy])))
}

/// `e^{it(Delta_x + m_shift)} h` on an x-only field: coefficient `xi` times
/// `e^{it(m_shift - |xi|^2)}`.
pub fn modulated_propagate_x(h: &LatticeField, t: f64, m_shift: f64) -> LatticeField {
    let w2 = h.lattice().squared_wavenumber();
    h.with_coeffs(
        h.coeffs()
            .iter()
            .zip(&w2)
            .map(|(c, w)| c * Complex64::from_polar(1.0, t * (m_shift - w)))
            .collect(),
    )
}

/// Trapezoid rule for `-i int_0^t e^{i(t-s)A} F(s) ds` in integrating-factor
/// form, where `A` is diagonal with symbol `-omega`. Shared by the reduced
/// problems and the Duhamel operator so both see the same quadrature.
#[derive(Clone, Debug)]
pub(crate) struct TrapezoidDuhamel {
    step_phase: Vec<Complex64>,
    half_dt: Complex64,
}

impl TrapezoidDuhamel {
    pub(crate) fn new(omega: &[f64], dt: f64) -> Self {
        TrapezoidDuhamel {
            step_phase: omega.iter().map(|w| Complex64::from_polar(1.0, -dt * w)).collect(),
            half_dt: Complex64::new(0.0, -0.5 * dt),
        }
    }

    /// `w <- P(dt) (w - i dt/2 F_now) - i dt/2 F_next`.
    pub(crate) fn advance(&self, w: &mut [Complex64], f_now: &[Complex64], f_next: &[Complex64]) {
        for (((w, p), a), b) in w.iter_mut().zip(&self.step_phase).zip(f_now).zip(f_next) {
            *w = p * (*w + self.half_dt * a) + self.half_dt * b;
        }
    }
}

/// One `y`-eigenmode: the coefficient slice `f_j(xi)` with `lambda_j = |m|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSlice {
    pub mode: Vec<i64>,
    pub eigenvalue: f64,
    pub field: LatticeField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeStack {
    pub grid: GridSpec,
    pub slices: Vec<ModeSlice>,
}

fn y_modes_of(grid: &GridSpec, iy: usize) -> Vec<i64> {
    let ny = grid.torus_modes;
    let mut rem = iy;
    let mut m = vec![0; grid.k];
    for slot in m.iter_mut().rev() {
        *slot = signed_index(rem % ny, ny);
        rem /= ny;
    }
    m
}

/// Split `f` into its y-Fourier hyperplanes, in lattice order.
pub fn mode_decompose(f: &SpectralField) -> ModeStack {
    let grid = f.grid();
    let (xlen, ylen) = (grid.x_len(), grid.y_len());
    let xlat = grid.x_lattice();
    let c = f.coeffs();
    let slices = (0..ylen)
        .map(|iy| {
            let mode = y_modes_of(grid, iy);
            let eigenvalue = mode.iter().map(|&m| (m * m) as f64).sum();
            let coeffs = (0..xlen).map(|ix| c[ix * ylen + iy]).collect();
            ModeSlice {
                mode,
                eigenvalue,
                field: LatticeField::new(xlat.clone(), coeffs).expect("slice length"),
            }
        })
        .collect();
    ModeStack {
        grid: grid.clone(),
        slices,
    }
}

/// Inverse of [`mode_decompose`].
pub fn mode_reconstruct(stack: &ModeStack) -> Result<SpectralField> {
    let grid = &stack.grid;
    let (xlen, ylen) = (grid.x_len(), grid.y_len());
    if stack.slices.len() != ylen {
        return Err(Error::ShapeMismatch {
            expected: ylen,
            found: stack.slices.len(),
        });
    }
    let mut coeffs = vec![Complex64::default(); grid.len()];
    let xlat = grid.x_lattice();
    for (iy, s) in stack.slices.iter().enumerate() {
        if s.field.lattice() != &xlat {
            return Err(Error::GridMismatch);
        }
        for (ix, c) in s.field.coeffs().iter().enumerate() {
            coeffs[ix * ylen + iy] = *c;
        }
    }
    debug_assert_eq!(coeffs.len(), xlen * ylen);
    SpectralField::new(grid.clone(), coeffs)
}

/// Solve `i d_t u + Delta_x u - lambda u = F`, `u(0) = slice`, up to time `t`.
///
/// Without forcing this is `e^{it(Delta_x - lambda)} slice` exactly. With
/// forcing, `forcing[j]` is `F` at `j t / (len - 1)` and the integral uses the
/// trapezoid recursion shared with the Duhamel operator.
pub fn reduced_evolve(
    slice: &LatticeField,
    lambda: f64,
    t: f64,
    forcing: Option<&[LatticeField]>,
) -> Result<LatticeField> {
    let Some(forcing) = forcing else {
        return Ok(modulated_propagate_x(slice, t, -lambda));
    };
    if forcing.len() < 2 {
        return Err(Error::InvalidArgument(
            "forcing needs at least two time samples".into(),
        ));
    }
    if forcing.iter().any(|f| f.lattice() != slice.lattice()) {
        return Err(Error::GridMismatch);
    }
    let steps = forcing.len() - 1;
    let dt = t / steps as f64;
    let omega: Vec<f64> = slice
        .lattice()
        .squared_wavenumber()
        .iter()
        .map(|w| w + lambda)
        .collect();
    let quad = TrapezoidDuhamel::new(&omega, dt);
    let mut w = slice.coeffs().to_vec();
    for j in 0..steps {
        quad.advance(&mut w, forcing[j].coeffs(), forcing[j + 1].coeffs());
    }
    Ok(slice.with_coeffs(w))
}

/// Slice of the partial Fourier transform in `x_n` and the torus expansion:
/// a tensor over the `x_bar` lattice at fixed `(xi_n, m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialSlice {
    pub xi_n: f64,
    pub mode: Vec<i64>,
    /// `xi_n^2 + lambda_j`.
    pub shift: f64,
    pub field: LatticeField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialFourierStack {
    pub grid: GridSpec,
    pub slices: Vec<PartialSlice>,
}

/// Re-index `f` as slices over `(xi_n, m)` of `x_bar`-tensors.
pub fn partial_fourier(f: &SpectralField) -> Result<PartialFourierStack> {
    let grid = f.grid();
    if grid.split_index.is_none() {
        return Err(Error::MissingSplit);
    }
    let nx = grid.points_per_axis;
    let ylen = grid.y_len();
    let xbar = grid.xbar_lattice();
    let xbar_len = xbar.len();
    let wn = grid.x_wavenumbers();
    let c = f.coeffs();
    let mut slices = Vec::with_capacity(nx * ylen);
    for ixn in 0..nx {
        for iy in 0..ylen {
            let mode = y_modes_of(grid, iy);
            let lambda: f64 = mode.iter().map(|&m| (m * m) as f64).sum();
            let coeffs = (0..xbar_len).map(|ib| c[(ib * nx + ixn) * ylen + iy]).collect();
            slices.push(PartialSlice {
                xi_n: wn[ixn],
                mode,
                shift: wn[ixn] * wn[ixn] + lambda,
                field: LatticeField::new(xbar.clone(), coeffs)?,
            });
        }
    }
    Ok(PartialFourierStack {
        grid: grid.clone(),
        slices,
    })
}

/// Inverse of [`partial_fourier`].
pub fn partial_fourier_inverse(stack: &PartialFourierStack) -> Result<SpectralField> {
    let grid = &stack.grid;
    let nx = grid.points_per_axis;
    let ylen = grid.y_len();
    if stack.slices.len() != nx * ylen {
        return Err(Error::ShapeMismatch {
            expected: nx * ylen,
            found: stack.slices.len(),
        });
    }
    let xbar = grid.xbar_lattice();
    let mut coeffs = vec![Complex64::default(); grid.len()];
    for (s_idx, s) in stack.slices.iter().enumerate() {
        if s.field.lattice() != &xbar {
            return Err(Error::GridMismatch);
        }
        let (ixn, iy) = (s_idx / ylen, s_idx % ylen);
        for (ib, c) in s.field.coeffs().iter().enumerate() {
            coeffs[(ib * nx + ixn) * ylen + iy] = *c;
        }
    }
    SpectralField::new(grid.clone(), coeffs)
}

/// Free evolution through the reduced problems: every y-mode slice evolves
/// under `e^{it(Delta_x - lambda_j)}` and the stack is reassembled.
pub fn free_propagate_by_modes(f: &SpectralField, t: f64) -> Result<SpectralField> {
    let mut stack = mode_decompose(f);
    for s in &mut stack.slices {
        s.field = reduced_evolve(&s.field, s.eigenvalue, t, None)?;
    }
    mode_reconstruct(&stack)
}

/// Free evolution through the `(xi_n, m)` reduction on `x_bar`.
pub fn free_propagate_by_partial_fourier(f: &SpectralField, t: f64) -> Result<SpectralField> {
    let mut stack = partial_fourier(f)?;
    for s in &mut stack.slices {
        s.field = reduced_evolve(&s.field, s.shift, t, None)?;
    }
    partial_fourier_inverse(&stack)
}

/// Helper for tests and examples: x-only field with one coefficient.
pub fn x_pure_mode(lattice: &Lattice, slot: usize, amplitude: Complex64) -> LatticeField {
    let mut c = vec![Complex64::default(); lattice.len()];
    c[slot] = amplitude;
    LatticeField::new(lattice.clone(), c).expect("length")
}
