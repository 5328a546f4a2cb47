//! GPF1 field snapshots.
//!
//! Layout (all little-endian):
//!
//! | offset | size | content |
//! |---|---|---|
//! | 0 | 4 | magic `GPF1` (the trailing `1` is the format version) |
//! | 4 | 4 | `u32` n, points per axis |
//! | 8 | 8 | `f64` L, half-width of the box [-L, L)² |
//! | 16 | 1 | `u8` complex flag, 0 = real, 1 = complex |
//! | 17 | 8·n²·(1 + flag) | `f64` samples, row-major; complex samples as (re, im) pairs |

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::discretization::{build_grid, ComplexField, Grid, GridSpec, RealField};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GPF1";
const HEADER: usize = 17;

#[derive(Debug, Clone)]
pub enum Snapshot {
    Real(RealField),
    Complex(ComplexField),
}

impl Snapshot {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            Self::Real(f) => f.grid(),
            Self::Complex(f) => f.grid(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, Self::Complex(_))
    }

    pub fn into_complex(self) -> ComplexField {
        match self {
            Self::Real(f) => f.to_complex(),
            Self::Complex(f) => f,
        }
    }
}

fn header(spec: GridSpec, complex: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * spec.len() * (1 + complex as usize));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(spec.n as u32).to_le_bytes());
    out.extend_from_slice(&spec.extent.to_le_bytes());
    out.push(complex as u8);
    out
}

pub fn encode_real(u: &RealField) -> Vec<u8> {
    let mut out = header(u.grid().spec(), false);
    for v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_complex(u: &ComplexField) -> Vec<u8> {
    let mut out = header(u.grid().spec(), true);
    for z in u.values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn encode(s: &Snapshot) -> Vec<u8> {
    match s {
        Snapshot::Real(u) => encode_real(u),
        Snapshot::Complex(u) => encode_complex(u),
    }
}

/// Decodes a snapshot. With `expected` the file must live on that grid and
/// its samples are attached to it; otherwise a grid is built from the header.
pub fn decode(bytes: &[u8], expected: Option<&Arc<Grid>>) -> Result<Snapshot> {
    if bytes.len() < 4 {
        return Err(Error::Format(format!("truncated header: {} bytes", bytes.len())));
    }
    if &bytes[..3] == b"GPF" && bytes[3] != b'1' {
        return Err(Error::Format(format!("unsupported snapshot version '{}'", bytes[3] as char)));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, not a GPF snapshot".into()));
    }
    if bytes.len() < HEADER {
        return Err(Error::Format(format!("truncated header: {} bytes", bytes.len())));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let extent = f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let complex = match bytes[16] {
        0 => false,
        1 => true,
        f => return Err(Error::Format(format!("bad complex flag {f}"))),
    };
    let spec = GridSpec { n, extent };
    let want = HEADER + 8 * n * n * (1 + complex as usize);
    if bytes.len() != want {
        let what = if bytes.len() < want { "truncated" } else { "trailing bytes in" };
        return Err(Error::Format(format!(
            "{what} snapshot: expected {want} bytes for {spec}, got {}",
            bytes.len()
        )));
    }
    let grid = match expected {
        Some(g) if g.spec() != spec => {
            return Err(Error::GridMismatch {
                left: format!("file {spec}"),
                right: format!("expected {}", g.spec()),
            })
        }
        Some(g) => g.clone(),
        None => build_grid(n, extent)?,
    };
    let floats: Vec<f64> = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let bad = |e: Error| Error::Format(format!("bad samples: {e}"));
    if complex {
        let values = floats.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        Ok(Snapshot::Complex(ComplexField::new(grid, values).map_err(bad)?))
    } else {
        Ok(Snapshot::Real(RealField::new(grid, floats).map_err(bad)?))
    }
}

pub fn write_snapshot(path: impl AsRef<Path>, s: &Snapshot) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(s))?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>, expected: Option<&Arc<Grid>>) -> Result<Snapshot> {
    decode(&fs::read(path)?, expected)
}
