//! User-supplied eigen-data for compact factors other than the flat torus.
//!
//! File layout (all little-endian):
//!
//! ```text
//! {"format":"prodnls-eigen-table","version":1,"count":J,"points":P,"weights":[w_0,..,w_{P-1}]}\n
//! J x f64          eigenvalues lambda_j
//! J x P x f64      eigenfunction samples phi_j(y_p), row j contiguous
//! ```
//!
//! The quadrature weights define the inner product
//! `<a, b> = sum_p w_p a(y_p) b(y_p)`; the table is rejected unless
//! `<phi_i, phi_j> = delta_ij` to `1e-10`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::reduced_evolve;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeField};

const FORMAT: &str = "prodnls-eigen-table";
const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    count: usize,
    points: usize,
    weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenTable {
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    functions: Vec<f64>,
}

impl EigenTable {
    pub fn new(eigenvalues: Vec<f64>, weights: Vec<f64>, functions: Vec<f64>) -> Result<Self> {
        let (count, points) = (eigenvalues.len(), weights.len());
        if count == 0 || points == 0 {
            return Err(Error::EigenTable("empty table".into()));
        }
        if functions.len() != count * points {
            return Err(Error::EigenTable(format!(
                "expected {count} x {points} samples, got {}",
                functions.len()
            )));
        }
        if let Some(l) = eigenvalues.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::EigenTable(format!("eigenvalue {l} is not a finite nonnegative number")));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::EigenTable("quadrature weights must be positive".into()));
        }
        let table = EigenTable {
            eigenvalues,
            weights,
            functions,
        };
        let defect = table.orthonormality_defect();
        if defect > ORTHONORMAL_TOL {
            return Err(Error::EigenTable(format!(
                "eigenfunctions are not orthonormal (max defect {defect:.3e})"
            )));
        }
        Ok(table)
    }

    /// Real Fourier basis of `T^1` on `points` uniform nodes, modes
    /// `0..=max_mode` (cosines and sines), `lambda = m^2`.
    pub fn torus(points: usize, max_mode: usize) -> Result<Self> {
        if 2 * max_mode >= points {
            return Err(Error::EigenTable(format!(
                "{points} nodes cannot resolve mode {max_mode}"
            )));
        }
        let h = 2.0 * PI / points as f64;
        let ys: Vec<f64> = (0..points).map(|p| h * p as f64).collect();
        let mut eigenvalues = vec![0.0];
        let mut functions: Vec<f64> = vec![1.0 / (2.0 * PI).sqrt(); points];
        for m in 1..=max_mode {
            let mf = m as f64;
            eigenvalues.extend([mf * mf, mf * mf]);
            functions.extend(ys.iter().map(|y| (mf * y).cos() / PI.sqrt()));
            functions.extend(ys.iter().map(|y| (mf * y).sin() / PI.sqrt()));
        }
        Self::new(eigenvalues, vec![h; points], functions)
    }

    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn points(&self) -> usize {
        self.weights.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenfunction(&self, j: usize) -> &[f64] {
        let p = self.points();
        &self.functions[j * p..(j + 1) * p]
    }

    /// `max_{i,j} |<phi_i, phi_j> - delta_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.count() {
            for j in 0..=i {
                let dot: f64 = self
                    .eigenfunction(i)
                    .iter()
                    .zip(self.eigenfunction(j))
                    .zip(&self.weights)
                    .map(|((a, b), w)| a * b * w)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// `c_j = <phi_j, g>` for samples `g(y_p)`.
    pub fn project(&self, samples: &[Complex64]) -> Vec<Complex64> {
        (0..self.count())
            .map(|j| {
                self.eigenfunction(j)
                    .iter()
                    .zip(&self.weights)
                    .zip(samples)
                    .map(|((phi, w), g)| g * (phi * w))
                    .sum()
            })
            .collect()
    }

    /// `g(y_p) = sum_j c_j phi_j(y_p)`.
    pub fn reconstruct(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.points()];
        for (j, c) in coeffs.iter().enumerate() {
            for (o, phi) in out.iter_mut().zip(self.eigenfunction(j)) {
                *o += c * phi;
            }
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let header = Header {
            format: FORMAT.into(),
            version: 1,
            count: self.count(),
            points: self.points(),
            weights: self.weights.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for v in self.eigenvalues.iter().chain(&self.functions) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl BufRead) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)
            .map_err(|e| Error::EigenTable(format!("reading header: {e}")))?;
        let header: Header = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::EigenTable(format!("bad header: {e}")))?;
        if header.format != FORMAT || header.version != 1 {
            return Err(Error::EigenTable(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        if header.weights.len() != header.points {
            return Err(Error::EigenTable("weights do not match point count".into()));
        }
        let total = header.count * (1 + header.points);
        let mut bytes = vec![0u8; total * 8];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::EigenTable(format!("truncated payload: {e}")))?;
        let mut vals = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
        let eigenvalues: Vec<f64> = vals.by_ref().take(header.count).collect();
        let functions: Vec<f64> = vals.collect();
        Self::new(eigenvalues, header.weights, functions)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| Error::io(path, e))?;
        crate::cli::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Field on `R^n_x x M` stored as x-coefficients times samples at the
/// table's quadrature nodes, row-major `[x-index][node]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TableField {
    pub x_lattice: Lattice,
    pub points: usize,
    pub data: Vec<Complex64>,
}

/// Eigen-expansion `f = sum_j f_j(x) phi_j(y)`: one x-field per table entry.
pub fn table_decompose(table: &EigenTable, field: &TableField) -> Result<Vec<LatticeField>> {
    if field.points != table.points() || field.data.len() != field.x_lattice.len() * field.points {
        return Err(Error::ShapeMismatch {
            expected: field.x_lattice.len() * table.points(),
            found: field.data.len(),
        });
    }
    let xlen = field.x_lattice.len();
    let mut modes = vec![vec![Complex64::default(); xlen]; table.count()];
    for ix in 0..xlen {
        let row = &field.data[ix * field.points..(ix + 1) * field.points];
        for (j, c) in table.project(row).into_iter().enumerate() {
            modes[j][ix] = c;
        }
    }
    modes
        .into_iter()
        .map(|c| LatticeField::new(field.x_lattice.clone(), c))
        .collect()
}

pub fn table_reconstruct(table: &EigenTable, slices: &[LatticeField]) -> Result<TableField> {
    let Some(first) = slices.first() else {
        return Err(Error::EigenTable("no slices".into()));
    };
    if slices.len() != table.count() {
        return Err(Error::ShapeMismatch {
            expected: table.count(),
            found: slices.len(),
        });
    }
    let x_lattice = first.lattice().clone();
    let xlen = x_lattice.len();
    let mut data = Vec::with_capacity(xlen * table.points());
    for ix in 0..xlen {
        let coeffs: Vec<Complex64> = slices.iter().map(|s| s.coeffs()[ix]).collect();
        data.extend(table.reconstruct(&coeffs));
    }
    Ok(TableField {
        x_lattice,
        points: table.points(),
        data,
    })
}

/// `e^{it(Delta_x + Delta_M)}` through the reduced problems
/// `i d_t u_j + Delta_x u_j - lambda_j u_j = 0`.
pub fn table_free_propagate(table: &EigenTable, field: &TableField, t: f64) -> Result<TableField> {
    let slices = table_decompose(table, field)?
        .iter()
        .zip(table.eigenvalues())
        .map(|(s, &lambda)| reduced_evolve(s, lambda, t, None))
        .collect::<Result<Vec<_>>>()?;
    table_reconstruct(table, &slices)
}
