//! Binary field snapshots.
//!
//! A snapshot is one JSON header line `{"dim":..,"n":..,"length":..,"time":..,"b":..}`
//! terminated by `\n`, followed by the field as little-endian `f64` pairs
//! `(re, im)` in row-major node order. Extra header keys are allowed and
//! preserved.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ComplexField, Grid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub time: f64,
    pub b: f64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl SnapshotHeader {
    pub fn new(grid: &Grid, time: f64, b: f64) -> Self {
        SnapshotHeader { dim: grid.dim(), n: grid.points_per_axis(), length: grid.length(), time, b, extra: Map::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.extra.insert(key.to_owned(), value.into());
        self
    }
}

pub fn write_snapshot<W: Write>(mut w: W, header: &SnapshotHeader, field: &ComplexField) -> Result<()> {
    let g = field.grid();
    if header.dim != g.dim() || header.n != g.points_per_axis() || header.length != g.length() {
        return Err(Error::DimensionMismatch("snapshot header does not describe the field grid".into()));
    }
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(16 * field.values().len());
    for z in field.values() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(r: R) -> Result<(SnapshotHeader, ComplexField)> {
    let mut reader = BufReader::new(r);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: SnapshotHeader = serde_json::from_str(line.trim_end())?;
    let grid = Grid::new(header.dim, header.n, header.length)?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 16 * grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "snapshot payload has {} bytes, expected {}",
            bytes.len(),
            16 * grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok((header, ComplexField::new(grid, values)?))
}

pub fn save_snapshot(path: &Path, header: &SnapshotHeader, field: &ComplexField) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_snapshot(&mut w, header, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<(SnapshotHeader, ComplexField)> {
    read_snapshot(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_a_single_json_line_followed_by_le_pairs() {
        let g = Grid::new(1, 8, 2.0).unwrap();
        let u = ComplexField::from_fn(g, |x| Complex64::new(x[0], -x[0]));
        let mut out = Vec::new();
        write_snapshot(&mut out, &SnapshotHeader::new(&g, 0.5, 3.0), &u).unwrap();
        let nl = out.iter().position(|&c| c == b'\n').unwrap();
        let header: Value = serde_json::from_slice(&out[..nl]).unwrap();
        assert_eq!(header["dim"], 1);
        assert_eq!(header["n"], 8);
        assert_eq!(header["b"], 3.0);
        assert_eq!(out.len() - nl - 1, 8 * 16);
        let first_re = f64::from_le_bytes(out[nl + 1..nl + 9].try_into().unwrap());
        assert_eq!(first_re, -1.0);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let g = Grid::new(1, 8, 2.0).unwrap();
        let mut out = Vec::new();
        write_snapshot(&mut out, &SnapshotHeader::new(&g, 0.0, 1.0), &ComplexField::zeros(g)).unwrap();
        out.truncate(out.len() - 3);
        assert!(read_snapshot(&out[..]).is_err());
    }

    proptest! {
        #[test]
        fn snapshots_round_trip_bit_exactly(vals in proptest::collection::vec(any::<(f64, f64)>(), 64), t in any::<f64>()) {
            let g = Grid::new(2, 8, 5.0).unwrap();
            let u = ComplexField::new(g, vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let header = SnapshotHeader::new(&g, if t.is_finite() { t } else { 0.0 }, 2.0).with("h", 0.5);
            let mut out = Vec::new();
            write_snapshot(&mut out, &header, &u).unwrap();
            let (h2, u2) = read_snapshot(&out[..]).unwrap();
            prop_assert_eq!(h2, header);
            for (a, b) in u.values().iter().zip(u2.values()) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }
}
