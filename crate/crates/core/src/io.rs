//! Binary container for [`GridFunction`]s.
//!
//! A field is stored as two files:
//!
//! * `<stem>.bin`: the value array in layout `(t, x_1, ..., x_d, component)`,
//!   each complex entry written as two little-endian IEEE-754 `f64`s
//!   (real part first). No header, no padding; the file is exactly
//!   `16 * n_t * n_x^d * N` bytes.
//! * `<stem>.json`: a sidecar holding the grid and a description of the layout.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

pub const FORMAT_NAME: &str = "parareg-gridfunction";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub grid: Grid,
    pub layout: String,
    pub encoding: String,
    pub count: usize,
}

impl Sidecar {
    pub fn for_grid(grid: &Grid) -> Self {
        Sidecar {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            grid: *grid,
            layout: "t,x1..xd,component".to_string(),
            encoding: "f64-le re,im interleaved".to_string(),
            count: grid.len(),
        }
    }
}

pub fn encode_values(values: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn decode_values(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if bytes.len() % 16 != 0 {
        return Err(Error::InvalidField(format!(
            "binary payload of {} bytes is not a whole number of complex f64 pairs",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `<stem>.bin` and `<stem>.json`.
pub fn write_field(stem: &Path, f: &GridFunction) -> Result<()> {
    let (bin, json) = paths(stem);
    let mut file = fs::File::create(bin)?;
    file.write_all(&encode_values(f.values()))?;
    let sidecar = Sidecar::for_grid(f.grid());
    fs::write(json, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads a field written by [`write_field`]. `stem` may carry either extension.
pub fn read_field(stem: &Path) -> Result<GridFunction> {
    let (bin, json) = paths(stem);
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(json)?)?;
    if sidecar.format != FORMAT_NAME || sidecar.version != FORMAT_VERSION {
        return Err(Error::InvalidField(format!(
            "unsupported container {} v{}",
            sidecar.format, sidecar.version
        )));
    }
    let mut bytes = Vec::new();
    fs::File::open(bin)?.read_to_end(&mut bytes)?;
    let values = decode_values(&bytes)?;
    if values.len() != sidecar.count {
        return Err(Error::InvalidField(format!(
            "sidecar promises {} values, payload has {}",
            sidecar.count,
            values.len()
        )));
    }
    GridFunction::new(sidecar.grid, values)
}
