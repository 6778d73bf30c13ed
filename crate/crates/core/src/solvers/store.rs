use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::spectral::io::{read_snapshot, write_snapshot};
use crate::spectral::RealField;

/// A snapshot made of named fields.
pub trait Snapshot: Sized {
    fn field_names() -> Vec<&'static str>;
    fn fields(&self) -> Vec<&RealField>;
    fn from_fields(fields: Vec<RealField>) -> Result<Self>;
}

impl Snapshot for RealField {
    fn field_names() -> Vec<&'static str> {
        vec!["field"]
    }

    fn fields(&self) -> Vec<&RealField> {
        vec![self]
    }

    fn from_fields(mut fields: Vec<RealField>) -> Result<Self> {
        fields.pop().ok_or_else(|| Error::InvalidInput("missing field".into()))
    }
}

/// `index.json` of a stored series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesIndex {
    pub times: Vec<f64>,
    pub fields: Vec<String>,
    /// File name per field, per snapshot.
    pub files: Vec<BTreeMap<String, String>>,
}

pub fn write_series<T: Snapshot>(dir: impl AsRef<Path>, series: &TimeSeries<T>) -> Result<SeriesIndex> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let names = T::field_names();
    let mut files = Vec::with_capacity(series.len());
    for (i, (t, snap)) in series.iter().enumerate() {
        let mut row = BTreeMap::new();
        for (name, field) in names.iter().zip(snap.fields()) {
            let file = format!("{name}_{i:05}.snap");
            write_snapshot(dir.join(&file), field, name, t)?;
            row.insert(name.to_string(), file);
        }
        files.push(row);
    }
    let index = SeriesIndex { times: series.times().to_vec(), fields: names.iter().map(|s| s.to_string()).collect(), files };
    let path = dir.join("index.json");
    fs::write(&path, serde_json::to_vec_pretty(&index)?).map_err(|e| Error::file(&path, e))?;
    Ok(index)
}

pub fn read_series<T: Snapshot>(dir: impl AsRef<Path>) -> Result<TimeSeries<T>> {
    let dir = dir.as_ref();
    let path = dir.join("index.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
    let index: SeriesIndex = serde_json::from_str(&text)?;
    let names = T::field_names();
    if index.fields != names {
        return Err(Error::InvalidInput(format!("series holds fields {:?}, expected {names:?}", index.fields)));
    }
    let snaps = index
        .files
        .iter()
        .map(|row| {
            let fields = names
                .iter()
                .map(|n| {
                    let file = row.get(*n).ok_or_else(|| Error::InvalidInput(format!("missing file for {n}")))?;
                    Ok(read_snapshot(dir.join(file))?.1)
                })
                .collect::<Result<Vec<_>>>()?;
            T::from_fields(fields)
        })
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new(index.times, snaps)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn round_trip() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let snaps: Vec<RealField> = (0..3).map(|i| RealField::scalar_fn(g, |x| (x[0] * i as f64).sin())).collect();
        let ts = TimeSeries::new(vec![0.0, 0.5, 1.0], snaps).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let index = write_series(dir.path(), &ts).unwrap();
        assert_eq!(index.files.len(), 3);
        let back: TimeSeries<RealField> = read_series(dir.path()).unwrap();
        assert_eq!(back.times(), ts.times());
        for (a, b) in back.snapshots().iter().zip(ts.snapshots()) {
            assert_eq!(a.data(), b.data());
        }
    }
}
