//! Field persistence: `x,value` CSV and the little-endian `NLKG` binary dump.

use std::io::{Read, Write};
use std::path::Path;

use super::grid::{Boundary, Grid, Real};
use super::samples::RealField;
use crate::error::{Error, Result};

pub const DUMP_MAGIC: &[u8; 4] = b"NLKG";
pub const DUMP_VERSION: u16 = 1;

pub fn write_field_csv<T: Real>(path: &Path, f: &RealField<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "value"])?;
    for (i, v) in f.values().iter().enumerate() {
        let x = f.grid().x(i).to_f64().unwrap();
        w.write_record([format!("{x:.17e}"), format!("{:.17e}", v.to_f64().unwrap())])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `x,value` CSV; returns the abscissae and values.
pub fn read_field_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::Parse(format!("missing column {k}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(e.to_string()))
        };
        xs.push(parse(0)?);
        vs.push(parse(1)?);
    }
    Ok((xs, vs))
}

pub fn encode_dump<T: Real>(f: &RealField<T>) -> Vec<u8> {
    let n = f.len();
    let mut out = Vec::with_capacity(4 + 2 + 8 + 8 + 8 * n);
    out.extend_from_slice(DUMP_MAGIC);
    out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&f.grid().spacing().to_f64().unwrap().to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_f64().unwrap().to_le_bytes());
    }
    out
}

/// Decoded dump: spacing and samples.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl FieldDump {
    /// Rebuilds the field on the symmetric grid implied by `n`, `h` and the boundary kind.
    pub fn into_field(self, boundary: Boundary) -> Result<RealField<f64>> {
        let n = self.values.len();
        let half_width = match boundary {
            Boundary::Periodic => 0.5 * self.spacing * n as f64,
            Boundary::Clamped => 0.5 * self.spacing * (n as f64 - 1.0),
        };
        let grid = Grid::new(half_width, n, boundary)?;
        RealField::new(grid, self.values)
    }
}

pub fn decode_dump(bytes: &[u8]) -> Result<FieldDump> {
    let bad = |m: &str| Error::Parse(format!("field dump: {m}"));
    if bytes.len() < 22 || &bytes[..4] != DUMP_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != DUMP_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[6..14].try_into().unwrap()) as usize;
    let spacing = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
    let payload = &bytes[22..];
    if payload.len() != 8 * n {
        return Err(bad(&format!("payload holds {} bytes, expected {}", payload.len(), 8 * n)));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(FieldDump { spacing, values })
}

pub fn write_field_dump<T: Real>(path: &Path, f: &RealField<T>) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode_dump(f))?;
    Ok(())
}

pub fn read_field_dump(path: &Path) -> Result<FieldDump> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_dump(&bytes)
}
