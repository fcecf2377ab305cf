//! Anisotropic Sobolev norms, differential multipliers and small random data.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{combine, GridSpec, Lattice, LatticeField, SpectralField};

/// Default regularity margin `epsilon`.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// `alpha = (alpha_1, .., alpha_d)` for `d_x^alpha`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All multi-indices of dimension `dim` and order exactly `order`.
    pub fn of_order(dim: usize, order: u32) -> Vec<MultiIndex> {
        fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if prefix.len() + 1 == dim {
                prefix.push(left);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
                return;
            }
            for a in (0..=left).rev() {
                prefix.push(a);
                rec(dim, left - a, prefix, out);
                prefix.pop();
            }
        }
        if dim == 0 {
            return if order == 0 { vec![MultiIndex(vec![])] } else { vec![] };
        }
        let mut out = Vec::new();
        rec(dim, order, &mut Vec::with_capacity(dim), &mut out);
        out
    }

    /// All multi-indices with `|alpha| <= max_order`, by increasing order.
    pub fn up_to(dim: usize, max_order: u32) -> Vec<MultiIndex> {
        (0..=max_order).flat_map(|s| Self::of_order(dim, s)).collect()
    }

    /// `alpha!` as a float.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a).map(f64::from).product::<f64>())
            .product()
    }
}

/// Which anisotropic space: `H^{theta,rho}_{x,y}` or the split
/// `H^{theta,rho}_{x_bar,(x_n,y)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Split,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevSpec {
    pub theta: u32,
    pub rho: f64,
    pub variant: Variant,
}

impl SobolevSpec {
    pub fn full(theta: u32, rho: f64) -> Self {
        SobolevSpec {
            theta,
            rho,
            variant: Variant::Full,
        }
    }

    pub fn split(theta: u32, rho: f64) -> Self {
        SobolevSpec {
            theta,
            rho,
            variant: Variant::Split,
        }
    }

    /// Data space of the small-data theorems: `H^{(n-2)/2, k/2+eps}` for even
    /// `n`, the split `H^{(n-3)/2, (k+1)/2+eps}` for odd `n >= 3`.
    pub fn theorem_space(grid: &GridSpec, epsilon: f64) -> Result<Self> {
        let (n, k) = (grid.n, grid.k as f64);
        if n >= 2 && n % 2 == 0 {
            Ok(Self::full(((n - 2) / 2) as u32, k / 2.0 + epsilon))
        } else if n >= 3 {
            if grid.split_index.is_none() {
                return Err(Error::MissingSplit);
            }
            Ok(Self::split(((n - 3) / 2) as u32, (k + 1.0) / 2.0 + epsilon))
        } else {
            Err(Error::InvalidArgument(
                "no small-data solution space for n = 1".into(),
            ))
        }
    }

    fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.variant == Variant::Split && grid.split_index.is_none() {
            return Err(Error::MissingSplit);
        }
        Ok(())
    }
}

/// Per-axis tables of `(i w)^a` combined into the symbol of `d^alpha` over a
/// lattice whose first `alpha.len()` axes are differentiated.
pub(crate) fn derivative_symbol(lattice: &Lattice, alpha: &MultiIndex) -> Vec<Complex64> {
    let per_axis: Vec<Vec<Complex64>> = lattice
        .axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| {
            let pow = alpha.0.get(a).copied().unwrap_or(0);
            ax.wavenumbers()
                .iter()
                .map(|&w| Complex64::new(0.0, w).powu(pow))
                .collect()
        })
        .collect();
    combine(&per_axis, Complex64::new(1.0, 0.0), |a, b| a * b)
}

fn check_alpha(grid: &GridSpec, alpha: &MultiIndex) -> Result<()> {
    let ok = alpha.len() == grid.n || (grid.split_index.is_some() && alpha.len() + 1 == grid.n);
    if ok {
        Ok(())
    } else {
        Err(Error::MultiIndexLength {
            expected: grid.n,
            found: alpha.len(),
        })
    }
}

/// `d_x^alpha f`. An `alpha` of length `n` acts on all of `x`; on split grids
/// a length `n-1` index acts on `x_bar`.
pub fn apply_dx(f: &SpectralField, alpha: &MultiIndex) -> Result<SpectralField> {
    check_alpha(f.grid(), alpha)?;
    let sym = derivative_symbol(&f.grid().x_lattice(), alpha);
    Ok(f.map_indexed(|ix, _| sym[ix]))
}

/// `(1 - Delta_y)^{rho/2} f`.
pub fn apply_bessel_y(f: &SpectralField, rho: f64) -> SpectralField {
    let w: Vec<f64> = f
        .grid()
        .y_symbol()
        .iter()
        .map(|m2| (1.0 + m2).powf(rho / 2.0))
        .collect();
    f.map_indexed(|_, iy| Complex64::new(w[iy], 0.0))
}

/// `|xi_n|^2` over the x-lattice.
fn xn_symbol(grid: &GridSpec) -> Vec<f64> {
    let nx = grid.points_per_axis;
    let w: Vec<f64> = grid.x_wavenumbers().iter().map(|v| v * v).collect();
    (0..grid.x_len()).map(|ix| w[ix % nx]).collect()
}

/// `(1 - d_{x_n}^2 - Delta_y)^{rho/2} f`.
pub fn apply_bessel_split(f: &SpectralField, rho: f64) -> Result<SpectralField> {
    let grid = f.grid();
    if grid.split_index.is_none() {
        return Err(Error::MissingSplit);
    }
    let xn = xn_symbol(grid);
    let ym = grid.y_symbol();
    Ok(f.map_indexed(|ix, iy| Complex64::new((1.0 + xn[ix] + ym[iy]).powf(rho / 2.0), 0.0)))
}

/// `sum_{|alpha| <= theta} || d^alpha (..)^{rho/2} f ||_{L^2}`, the displayed
/// sum-of-norms form.
pub fn hxy_norm(f: &SpectralField, spec: &SobolevSpec) -> Result<f64> {
    let grid = f.grid();
    spec.check(grid)?;
    let weight = sobolev_weight(grid, spec.variant, spec.rho);
    let (dx_dim, lat) = match spec.variant {
        Variant::Full => (grid.n, grid.x_lattice()),
        Variant::Split => (grid.n - 1, grid.x_lattice()),
    };
    let ylen = grid.y_len();
    let mut total = 0.0;
    for alpha in MultiIndex::up_to(dx_dim, spec.theta) {
        let sym = derivative_symbol(&lat, &alpha);
        let sq: f64 = f
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| sym[i / ylen].norm_sqr() * weight[i] * c.norm_sqr())
            .sum();
        total += sq.sqrt();
    }
    Ok(total)
}

// |(1 + ..)^{rho/2}|^2 at every flat index.
fn sobolev_weight(grid: &GridSpec, variant: Variant, rho: f64) -> Vec<f64> {
    let ym = grid.y_symbol();
    let ylen = grid.y_len();
    match variant {
        Variant::Full => (0..grid.len())
            .map(|i| (1.0 + ym[i % ylen]).powf(rho))
            .collect(),
        Variant::Split => {
            let xn = xn_symbol(grid);
            (0..grid.len())
                .map(|i| (1.0 + xn[i / ylen] + ym[i % ylen]).powf(rho))
                .collect()
        }
    }
}

/// `H^s_x` norm of an x-only field in the same sum-of-norms form.
pub fn hx_norm(h: &LatticeField, s: u32) -> f64 {
    MultiIndex::up_to(h.lattice().dims(), s)
        .iter()
        .map(|alpha| {
            let sym = derivative_symbol(h.lattice(), alpha);
            h.coeffs()
                .iter()
                .zip(&sym)
                .map(|(c, w)| (c * w).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// `d^alpha` on an x-only field.
pub fn apply_dx_lattice(h: &LatticeField, alpha: &MultiIndex) -> Result<LatticeField> {
    if alpha.len() != h.lattice().dims() {
        return Err(Error::MultiIndexLength {
            expected: h.lattice().dims(),
            found: alpha.len(),
        });
    }
    let sym = derivative_symbol(h.lattice(), alpha);
    Ok(h.with_coeffs(h.coeffs().iter().zip(&sym).map(|(c, w)| c * w).collect()))
}

/// `(1 - Delta)^{s/2}` on a torus-only field.
pub fn apply_bessel_torus(g: &LatticeField, s: f64) -> LatticeField {
    let m2 = g.lattice().squared_wavenumber();
    g.with_coeffs(
        g.coeffs()
            .iter()
            .zip(&m2)
            .map(|(c, w)| c * (1.0 + w).powf(s / 2.0))
            .collect(),
    )
}

/// Spectral decay exponent used when none is given:
/// `rho + (n + k)/2 + 1`.
pub fn default_decay_rate(grid: &GridSpec, spec: &SobolevSpec) -> f64 {
    spec.rho + (grid.n + grid.k) as f64 / 2.0 + 1.0
}

/// Complex Gaussian coefficients with variance `(1+|xi|^2+|m|^2)^{-decay}`,
/// restricted to signed indices `|j| <= band` on every axis when `band` is
/// given.
fn gaussian_coeffs(lattice: &Lattice, decay: f64, band: Option<i64>, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let w2 = lattice.squared_wavenumber();
    let inside = band_mask(lattice, band);
    w2.iter()
        .zip(&inside)
        .map(|(&w, &keep)| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            if keep {
                Complex64::new(a, b) * ((1.0 + w).powf(-decay / 2.0) / std::f64::consts::SQRT_2)
            } else {
                Complex64::default()
            }
        })
        .collect()
}

pub(crate) fn band_mask(lattice: &Lattice, band: Option<i64>) -> Vec<bool> {
    match band {
        None => vec![true; lattice.len()],
        Some(b) => {
            let per_axis: Vec<Vec<bool>> = lattice
                .axes()
                .iter()
                .map(|ax| {
                    (0..ax.points)
                        .map(|j| crate::lattice::signed_index(j, ax.points).abs() <= b)
                        .collect()
                })
                .collect();
            combine(&per_axis, true, |a, b| a && b)
        }
    }
}

/// Largest band `K` such that a cubic product of fields supported in
/// `|j| <= K` does not alias on an axis with `points` samples.
pub fn alias_free_band(points: usize) -> i64 {
    ((points as i64 / 2) - 1) / 3
}

/// Seeded random data rescaled to `hxy_norm(f, spec) = delta`.
pub fn random_small_data(
    grid: &GridSpec,
    spec: &SobolevSpec,
    delta: f64,
    decay_rate: f64,
    seed: u64,
) -> Result<SpectralField> {
    random_data_in_band(grid, spec, delta, decay_rate, None, seed)
}

/// [`random_small_data`] restricted to `|j| <= band` on every axis.
pub fn random_data_in_band(
    grid: &GridSpec,
    spec: &SobolevSpec,
    delta: f64,
    decay_rate: f64,
    band: Option<i64>,
    seed: u64,
) -> Result<SpectralField> {
    if !(delta > 0.0) || !(decay_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need delta > 0 and decay_rate > 0 (got {delta}, {decay_rate})"
        )));
    }
    spec.check(grid)?;
    let lat = grid.lattice();
    for attempt in 0..2u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let f = SpectralField::new(grid.clone(), gaussian_coeffs(&lat, decay_rate, band, &mut rng))?;
        let norm = hxy_norm(&f, spec)?;
        if norm > 0.0 && norm.is_finite() {
            return Ok(f.scale(Complex64::new(delta / norm, 0.0)));
        }
    }
    Err(Error::DegenerateDraw)
}

/// Spatially localized data: a centred Gaussian envelope of width `width` in
/// x times a seeded random torus profile with decay
/// `(1+|m|^2)^{-decay_rate}`, rescaled to `hxy_norm = delta`.
///
/// Stationary random fields fill the whole periodic box, so runs that must
/// stay clear of the box boundary (scattering, decay fits) use this instead.
pub fn localized_small_data(
    grid: &GridSpec,
    spec: &SobolevSpec,
    delta: f64,
    width: f64,
    decay_rate: f64,
    seed: u64,
) -> Result<SpectralField> {
    if !(delta > 0.0) || !(width > 0.0) || !(decay_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need delta, width, decay_rate > 0 (got {delta}, {width}, {decay_rate})"
        )));
    }
    spec.check(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ylat = grid.y_lattice();
    let profile = LatticeField::new(ylat.clone(), gaussian_coeffs(&ylat, decay_rate, None, &mut rng))?.to_samples();
    let xs = grid.x_coordinates();
    let per_axis: Vec<Vec<f64>> = (0..grid.n)
        .map(|_| xs.iter().map(|x| (-x * x / (2.0 * width * width)).exp()).collect())
        .collect();
    let envelope = combine(&per_axis, 1.0, |a, b| a * b);
    let samples: Vec<Complex64> = envelope
        .iter()
        .flat_map(|&e| profile.iter().map(move |&p| p * e))
        .collect();
    let f = crate::lattice::to_spectral(&samples, grid)?;
    let norm = hxy_norm(&f, spec)?;
    if !(norm > 0.0) {
        return Err(Error::DegenerateDraw);
    }
    Ok(f.scale(Complex64::new(delta / norm, 0.0)))
}

/// Seeded random field on a single-block lattice (x-only or torus-only),
/// normalized to unit `L^2`.
pub fn random_lattice_field(lattice: &Lattice, decay_rate: f64, band: Option<i64>, seed: u64) -> Result<LatticeField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = LatticeField::new(lattice.clone(), gaussian_coeffs(lattice, decay_rate, band, &mut rng))?;
    let norm = f.l2_norm();
    if !(norm > 0.0) {
        return Err(Error::DegenerateDraw);
    }
    Ok(f.scale(Complex64::new(1.0 / norm, 0.0)))
}

/// Seeded random field supported in `|j_a| <= band[a]`, normalized to unit
/// `L^2`, whose coefficients depend only on `(band, decay_rate, seed)` and the
/// axis lengths, not on the number of points. Refining a lattice at fixed
/// lengths therefore reproduces the same function.
///
/// Modes are drawn shell by shell in `max_a |j_a|`, lexicographically inside
/// a shell, with variance `(1+|k|^2)^{-decay_rate}`.
pub fn canonical_random_field(lattice: &Lattice, band: &[i64], decay_rate: f64, seed: u64) -> Result<LatticeField> {
    let axes = lattice.axes();
    if band.len() != axes.len() {
        return Err(Error::ShapeMismatch {
            expected: axes.len(),
            found: band.len(),
        });
    }
    for (ax, &b) in axes.iter().zip(band) {
        if b < 0 || b > ax.points as i64 / 2 - 1 {
            return Err(Error::InvalidArgument(format!(
                "band {b} does not fit an axis with {} points",
                ax.points
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::default(); lattice.len()];
    let top = band.iter().copied().max().unwrap_or(0);
    for shell in 0..=top {
        let lim: Vec<i64> = band.iter().map(|&b| b.min(shell)).collect();
        let mut v: Vec<i64> = lim.iter().map(|l| -l).collect();
        'odometer: loop {
            if v.iter().any(|x| x.abs() == shell) {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let mut idx = 0;
                let mut k2 = 0.0;
                for (ax, &j) in axes.iter().zip(&v) {
                    idx = idx * ax.points + crate::lattice::slot_of(j, ax.points).expect("band fits");
                    k2 += (2.0 * std::f64::consts::PI * j as f64 / ax.length).powi(2);
                }
                coeffs[idx] = Complex64::new(a, b) * (1.0 + k2).powf(-decay_rate / 2.0);
            }
            let mut d = v.len();
            loop {
                if d == 0 {
                    break 'odometer;
                }
                d -= 1;
                if v[d] < lim[d] {
                    v[d] += 1;
                    break;
                }
                v[d] = -lim[d];
            }
        }
    }
    let f = LatticeField::new(lattice.clone(), coeffs)?;
    let norm = f.l2_norm();
    if !(norm > 0.0) {
        return Err(Error::DegenerateDraw);
    }
    Ok(f.scale(Complex64::new(1.0 / norm, 0.0)))
}

/// [`canonical_random_field`] on the product grid with bands `band_x` on the
/// x-axes and `band_y` on the torus axes.
pub fn canonical_random_data(grid: &GridSpec, band_x: i64, band_y: i64, decay_rate: f64, seed: u64) -> Result<SpectralField> {
    let band: Vec<i64> = (0..grid.n).map(|_| band_x).chain((0..grid.k).map(|_| band_y)).collect();
    let f = canonical_random_field(&grid.lattice(), &band, decay_rate, seed)?;
    SpectralField::new(grid.clone(), f.into_coeffs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{from_spectral, make_grid, to_spectral};
    use std::f64::consts::PI;

    fn grid2() -> GridSpec {
        make_grid(2, 1, 8.0 * PI, 16, 8, None).unwrap()
    }

    fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
        a.coeffs()
            .iter()
            .zip(b.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(MultiIndex::of_order(2, 2).len(), 3);
        assert_eq!(MultiIndex::of_order(4, 1).len(), 4);
        assert_eq!(MultiIndex::up_to(3, 2).len(), 1 + 3 + 6);
        assert!(MultiIndex::of_order(3, 2).iter().all(|a| a.order() == 2));
        assert_eq!(MultiIndex(vec![2, 3]).factorial(), 12.0);
    }

    #[test]
    fn dx_examples() {
        let g = grid2();
        let f = random_small_data(&g, &SobolevSpec::full(0, 0.0), 1.0, 2.0, 1).unwrap();
        assert_eq!(apply_dx(&f, &MultiIndex::zero(2)).unwrap(), f);

        let g1 = make_grid(2, 1, 2.0 * PI, 8, 4, None).unwrap();
        let pw = SpectralField::pure_mode(&g1, &[1, 0], &[0], Complex64::new(1.0, 0.0)).unwrap();
        let d = apply_dx(&pw, &MultiIndex(vec![1, 0])).unwrap();
        assert!(max_diff(&d, &pw.scale(Complex64::i())) < 1e-15);

        let twice = apply_dx(&apply_dx(&f, &MultiIndex(vec![1, 0])).unwrap(), &MultiIndex(vec![1, 0])).unwrap();
        let direct = apply_dx(&f, &MultiIndex(vec![2, 0])).unwrap();
        assert!(max_diff(&twice, &direct) < 1e-12);

        assert!(matches!(
            apply_dx(&f, &MultiIndex(vec![1])),
            Err(Error::MultiIndexLength { .. })
        ));
    }

    #[test]
    fn bessel_y_examples() {
        let g = make_grid(1, 1, 2.0 * PI, 8, 8, None).unwrap();
        let f = SpectralField::pure_mode(&g, &[0], &[1], Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(apply_bessel_y(&f, 0.0), f);
        let b = apply_bessel_y(&f, 1.0);
        assert!((b.l2_norm() - 2f64.sqrt()).abs() < 1e-15);

        let r = random_small_data(&grid2(), &SobolevSpec::full(0, 1.0), 1.0, 3.0, 4).unwrap();
        let back = apply_bessel_y(&apply_bessel_y(&r, 1.3), -1.3);
        assert!(max_diff(&back, &r) < 1e-12);
    }

    #[test]
    fn bessel_split_examples() {
        let g = make_grid(3, 1, 2.0 * PI, 8, 8, Some(2)).unwrap();
        let f = SpectralField::pure_mode(&g, &[0, 0, 1], &[1], Complex64::new(1.0, 0.0)).unwrap();
        let b = apply_bessel_split(&f, 2.0).unwrap();
        assert!((b.l2_norm() - 3.0).abs() < 1e-14);
        assert_eq!(apply_bessel_split(&f, 0.0).unwrap(), f);
        let r = random_small_data(&g, &SobolevSpec::split(0, 1.0), 1.0, 3.0, 5).unwrap();
        let back = apply_bessel_split(&apply_bessel_split(&r, 0.7).unwrap(), -0.7).unwrap();
        assert!(max_diff(&back, &r) < 1e-12);

        let no_split = make_grid(3, 1, 2.0 * PI, 8, 8, None).unwrap();
        assert!(matches!(
            apply_bessel_split(&SpectralField::zeros(&no_split), 1.0),
            Err(Error::MissingSplit)
        ));
    }

    #[test]
    fn hxy_single_mode_matches_quadrature() {
        // unit-L^2 mode xi=1, m=1 with theta=1, rho=1: (1+1) * sqrt(2)
        let g = make_grid(1, 1, 2.0 * PI, 16, 8, None).unwrap();
        let f = SpectralField::pure_mode(&g, &[1], &[1], Complex64::new(1.0, 0.0)).unwrap();
        let spectral = hxy_norm(&f, &SobolevSpec::full(1, 1.0)).unwrap();

        // Oracle: analytic samples of the mode and of its derivative, with the
        // Bessel factor evaluated by hand, integrated by plain quadrature.
        let vol = (2.0 * PI) * (2.0 * PI);
        let dv = g.lattice().cell_volume();
        let mut l2_f = 0.0;
        let mut l2_df = 0.0;
        for &x in &g.x_coordinates() {
            for &y in &g.y_coordinates() {
                let u = Complex64::from_polar(1.0, x + y) / vol.sqrt() * 2f64.sqrt();
                let du = Complex64::i() * u;
                l2_f += u.norm_sqr() * dv;
                l2_df += du.norm_sqr() * dv;
            }
        }
        let oracle = l2_f.sqrt() + l2_df.sqrt();
        assert!((oracle - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((spectral - oracle).abs() < 1e-12);
    }

    #[test]
    fn hxy_reduces_to_l2() {
        let f = random_small_data(&grid2(), &SobolevSpec::full(0, 1.0), 0.3, 3.0, 11).unwrap();
        let n = hxy_norm(&f, &SobolevSpec::full(0, 0.0)).unwrap();
        assert!((n - f.l2_norm()).abs() < 1e-12);
        let phys = from_spectral(&f);
        let quad: f64 = phys.iter().map(|v| v.norm_sqr()).sum::<f64>() * f.grid().lattice().cell_volume();
        assert!((n - quad.sqrt()).abs() < 1e-12);
        assert_eq!(hxy_norm(&SpectralField::zeros(&grid2()), &SobolevSpec::full(1, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn random_data_properties() {
        let g = grid2();
        let spec = SobolevSpec::full(0, 1.6);
        let a = random_small_data(&g, &spec, 1e-2, default_decay_rate(&g, &spec), 9).unwrap();
        let b = random_small_data(&g, &spec, 1e-2, default_decay_rate(&g, &spec), 9).unwrap();
        assert_eq!(a, b);
        assert!((hxy_norm(&a, &spec).unwrap() - 1e-2).abs() < 1e-14);
        assert!(a.l2_norm() <= 1e-2);
        assert!(random_small_data(&g, &spec, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn band_limited_data_stays_in_band() {
        let g = make_grid(2, 1, 4.0 * PI, 16, 8, None).unwrap();
        let f = random_data_in_band(&g, &SobolevSpec::full(0, 0.0), 1.0, 2.0, Some(2), 3).unwrap();
        let (bx, by) = f.band_extent(0.0);
        assert!(bx <= 2 && by <= 2);
        assert_eq!(alias_free_band(8), 1);
        assert_eq!(alias_free_band(16), 2);
    }

    #[test]
    fn localized_data_is_centred() {
        let g = make_grid(2, 1, 32.0 * PI, 64, 8, None).unwrap();
        let spec = SobolevSpec::theorem_space(&g, DEFAULT_EPSILON).unwrap();
        let f = localized_small_data(&g, &spec, 1e-2, 2.0, 3.0, 5).unwrap();
        assert!((hxy_norm(&f, &spec).unwrap() - 1e-2).abs() < 1e-15);
        let u = from_spectral(&f);
        let back = to_spectral(&u, &g).unwrap();
        assert!(max_diff(&back, &f) < 1e-15);
        // nothing near the corner of the box
        assert!(u[0].norm() < 1e-20);
    }

    #[test]
    fn theorem_space_by_parity() {
        let g2 = grid2();
        let s = SobolevSpec::theorem_space(&g2, 0.1).unwrap();
        assert_eq!(s.theta, 0);
        assert!((s.rho - 0.6).abs() < 1e-15);
        let g3 = make_grid(3, 1, 10.0, 8, 8, Some(2)).unwrap();
        let s = SobolevSpec::theorem_space(&g3, 0.1).unwrap();
        assert_eq!((s.theta, s.variant), (0, Variant::Split));
        assert!((s.rho - 1.1).abs() < 1e-15);
        let g1 = make_grid(1, 1, 10.0, 8, 8, None).unwrap();
        assert!(SobolevSpec::theorem_space(&g1, 0.1).is_err());
    }

    #[test]
    fn canonical_data_survives_refinement() {
        let coarse = make_grid(2, 1, 12.0, 16, 8, None).unwrap();
        let fine = make_grid(2, 1, 12.0, 32, 16, None).unwrap();
        let a = canonical_random_data(&coarse, 3, 2, 2.0, 11).unwrap();
        let b = canonical_random_data(&fine, 3, 2, 2.0, 11).unwrap();
        assert!((a.l2_norm() - 1.0).abs() < 1e-14);
        for xi0 in -3..=3 {
            for xi1 in -3..=3 {
                for m in -2..=2 {
                    let ca = a.coeffs()[coarse.index_of(&[xi0, xi1], &[m]).unwrap()];
                    let cb = b.coeffs()[fine.index_of(&[xi0, xi1], &[m]).unwrap()];
                    assert_eq!(ca, cb);
                    assert!(ca.norm() > 0.0);
                }
            }
        }
        assert_eq!(a.band_extent(0.0), (3, 2));
        assert!(canonical_random_data(&coarse, 8, 2, 2.0, 1).is_err());

        // shells are nested: the draws inside a smaller band are a prefix
        let t = Lattice::new(vec![crate::lattice::Axis { length: 2.0 * PI, points: 32, centered: false }]);
        let s3 = canonical_random_field(&t, &[3], 1.0, 5).unwrap();
        let s7 = canonical_random_field(&t, &[7], 1.0, 5).unwrap();
        let ratio = s3.coeffs()[1] / s7.coeffs()[1];
        assert!((s3.coeffs()[3] / s7.coeffs()[3] - ratio).norm() < 1e-12);
    }
}
