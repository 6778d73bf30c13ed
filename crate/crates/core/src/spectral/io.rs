//! Field snapshot files: one line of JSON header, then the samples as
//! little-endian `f64` in storage order (component-major, row-major).

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::field::RealField;
use super::grid::Grid;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub points_per_axis: usize,
    pub box_length: f64,
    pub components: usize,
    pub field: String,
    pub time: f64,
}

pub fn encode_snapshot(field: &RealField, name: &str, time: f64) -> Result<Vec<u8>> {
    let g = field.grid();
    let header = SnapshotHeader {
        dim: g.dim(),
        points_per_axis: g.points_per_axis(),
        box_length: g.box_length(),
        components: field.components(),
        field: name.to_owned(),
        time,
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(8 * field.data().len());
    for v in field.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_snapshot(mut reader: impl BufRead) -> Result<(SnapshotHeader, RealField)> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: SnapshotHeader = serde_json::from_str(line.trim_end())?;
    let grid = Grid::new(header.dim, header.points_per_axis, header.box_length)?;
    let count = header.components * grid.len();
    let mut bytes = Vec::with_capacity(8 * count);
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * count {
        return Err(Error::InvalidInput(format!(
            "snapshot payload has {} bytes, header implies {}",
            bytes.len(),
            8 * count
        )));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let field = RealField::new(grid, header.components, data)?;
    Ok((header, field))
}

pub fn write_snapshot(path: impl AsRef<Path>, field: &RealField, name: &str, time: f64) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_snapshot(field, name, time)?;
    let mut file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<(SnapshotHeader, RealField)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    decode_snapshot(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let g = Grid::new(2, 8, 1.25).unwrap();
        let f = RealField::vector_fn(g, |x, c| (x[0] * 3.0 + c as f64).sin() * 1e-7 + x[1]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.snap");
        write_snapshot(&path, &f, "u", 0.125).unwrap();
        let (h, back) = read_snapshot(&path).unwrap();
        assert_eq!(h.field, "u");
        assert_eq!(h.time, 0.125);
        assert_eq!(h.components, 2);
        assert_eq!(back, f);
    }

    #[test]
    fn header_is_first_line_and_payload_little_endian() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let f = RealField::scalar_fn(g, |x| x[0]);
        let bytes = encode_snapshot(&f, "rho", 0.0).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        assert_eq!(header["points_per_axis"], 8);
        assert_eq!(&bytes[nl + 1 + 8..nl + 1 + 16], &0.125f64.to_le_bytes());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let mut bytes = encode_snapshot(&RealField::zeros(g, 1), "x", 0.0).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(decode_snapshot(&bytes[..]).is_err());
    }
}
