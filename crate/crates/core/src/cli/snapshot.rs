//! Binary snapshot stream.
//!
//! Layout, all little-endian:
//!
//! | field        | type       |
//! |--------------|------------|
//! | magic        | `b"PNLSSNAP"` |
//! | version      | u32 (= 1)  |
//! | n, k         | u32, u32   |
//! | box length L | f64        |
//! | N_x, N_y     | u32, u32   |
//! | split        | i32 (`-1` when absent) |
//! | config hash  | 32 bytes (SHA-256) |
//! | count        | u64        |
//!
//! followed by `count` records of `time: f64` and `N_x^n N_y^k` pairs
//! `(re: f64, im: f64)`. Coefficients are row-major over the axes
//! `[x_1..x_n, y_1..y_k]` with every axis in FFT-shifted order, i.e. the
//! signed index runs `-N/2, ..., N/2 - 1`.

use std::io::{BufReader, Read};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{make_grid, GridSpec, SpectralField};

pub const MAGIC: &[u8; 8] = b"PNLSSNAP";
pub const VERSION: u32 = 1;

/// Storage slot of each position of the FFT-shifted layout.
fn shifted_order(grid: &GridSpec) -> Vec<usize> {
    let shape = grid.lattice().shape();
    let total: usize = shape.iter().product();
    let mut order = Vec::with_capacity(total);
    let mut pos = vec![0usize; shape.len()];
    for _ in 0..total {
        let mut slot = 0;
        for (&p, &n) in pos.iter().zip(&shape) {
            slot = slot * n + (p + n / 2) % n;
        }
        order.push(slot);
        for a in (0..shape.len()).rev() {
            pos[a] += 1;
            if pos[a] < shape[a] {
                break;
            }
            pos[a] = 0;
        }
    }
    order
}

/// Snapshots read back from a stream.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotFile {
    pub grid: GridSpec,
    pub config_hash: [u8; 32],
    pub snapshots: Vec<(f64, SpectralField)>,
}

pub fn encode_snapshots(grid: &GridSpec, config_hash: &[u8; 32], snapshots: &[(f64, &SpectralField)]) -> Result<Vec<u8>> {
    let order = shifted_order(grid);
    let mut out = Vec::with_capacity(96 + snapshots.len() * (8 + 16 * order.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.n as u32).to_le_bytes());
    out.extend_from_slice(&(grid.k as u32).to_le_bytes());
    out.extend_from_slice(&grid.box_length.to_le_bytes());
    out.extend_from_slice(&(grid.points_per_axis as u32).to_le_bytes());
    out.extend_from_slice(&(grid.torus_modes as u32).to_le_bytes());
    out.extend_from_slice(&grid.split_index.map_or(-1, |s| s as i32).to_le_bytes());
    out.extend_from_slice(config_hash);
    out.extend_from_slice(&(snapshots.len() as u64).to_le_bytes());
    for (t, f) in snapshots {
        if f.grid() != grid {
            return Err(Error::GridMismatch);
        }
        out.extend_from_slice(&t.to_le_bytes());
        let c = f.coeffs();
        for &slot in &order {
            out.extend_from_slice(&c[slot].re.to_le_bytes());
            out.extend_from_slice(&c[slot].im.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_snapshots(
    path: &Path,
    grid: &GridSpec,
    config_hash: &[u8; 32],
    snapshots: &[(f64, &SpectralField)],
) -> Result<()> {
    super::write_atomic(path, &encode_snapshots(grid, config_hash, snapshots)?)
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated snapshot stream: {e}")))?;
    Ok(b)
}

fn take_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(take(r)?))
}

fn take_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(take(r)?))
}

pub fn decode_snapshots(mut r: impl Read) -> Result<SnapshotFile> {
    if &take::<8>(&mut r)? != MAGIC {
        return Err(Error::Format("not a snapshot stream (bad magic)".into()));
    }
    let version = take_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let n = take_u32(&mut r)? as usize;
    let k = take_u32(&mut r)? as usize;
    let length = take_f64(&mut r)?;
    let nx = take_u32(&mut r)? as usize;
    let ny = take_u32(&mut r)? as usize;
    let split = i32::from_le_bytes(take(&mut r)?);
    let split = if split < 0 { None } else { Some(split as usize) };
    let grid = make_grid(n, k, length, nx, ny, split)?;
    let config_hash = take::<32>(&mut r)?;
    let count = u64::from_le_bytes(take(&mut r)?);
    let order = shifted_order(&grid);
    let mut snapshots = Vec::new();
    for _ in 0..count {
        let t = take_f64(&mut r)?;
        let mut coeffs = vec![Complex64::default(); order.len()];
        for &slot in &order {
            coeffs[slot] = Complex64::new(take_f64(&mut r)?, take_f64(&mut r)?);
        }
        snapshots.push((t, SpectralField::new(grid.clone(), coeffs)?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::Format(e.to_string()))? != 0 {
        return Err(Error::Format("trailing bytes after the last snapshot".into()));
    }
    Ok(SnapshotFile {
        grid,
        config_hash,
        snapshots,
    })
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotFile> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_snapshots(BufReader::new(file))
}
