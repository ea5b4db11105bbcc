//! Configuration and result-table serialization.
//!
//! CSV output is comma separated with LF line endings and a header row;
//! floats use the shortest representation that round-trips.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{Configuration, Point};
use crate::Result;

/// One configuration entry as written to disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z: Option<f64>,
    pub multiplicity: u32,
}

fn records(phi: &Configuration, dim: usize) -> Vec<PointRecord> {
    phi.entries()
        .iter()
        .map(|(p, m)| {
            let c = p.coords();
            PointRecord { x: c[0], y: c[1], z: (dim == 3).then_some(c[2]), multiplicity: *m }
        })
        .collect()
}

/// Columns `x,y[,z],multiplicity`; `y` is 0 for one-dimensional spaces.
/// An empty configuration still gets its header.
pub fn write_config_csv<W: Write>(phi: &Configuration, dim: usize, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    if dim == 3 {
        w.write_record(["x", "y", "z", "multiplicity"])?;
    } else {
        w.write_record(["x", "y", "multiplicity"])?;
    }
    for r in records(phi, dim) {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads points written by [`write_config_csv`] as sites.
pub fn read_config_csv<R: Read>(input: R) -> Result<Configuration> {
    let mut rd = csv::Reader::from_reader(input);
    let mut entries = Vec::new();
    for rec in rd.deserialize() {
        let r: PointRecord = rec?;
        let p = match r.z {
            Some(z) => Point::site(&[r.x, r.y, z]),
            None => Point::site(&[r.x, r.y]),
        };
        entries.push((p, r.multiplicity));
    }
    Configuration::from_entries(entries)
}

/// A JSON array of `{x, y[, z], multiplicity}` objects.
pub fn config_to_json(phi: &Configuration, dim: usize) -> Result<String> {
    Ok(serde_json::to_string(&records(phi, dim))?)
}

/// Output format of result tables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Writes flat rows as CSV (header from the field names, written even when
/// there are no rows) or as a pretty JSON array.
pub fn write_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T], format: Format) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, rows)?;
            buf.push(b'\n');
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let phi = Configuration::from_entries([(Point::xy(0.25, 0.5), 2), (Point::xy(0.1, 0.9), 1)]).unwrap();
        let mut buf = Vec::new();
        write_config_csv(&phi, 2, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,multiplicity\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_config_csv(buf.as_slice()).unwrap(), phi);
    }

    #[test]
    fn empty_configuration_has_header() {
        let mut buf = Vec::new();
        write_config_csv(&Configuration::new(), 2, &mut buf).unwrap();
        assert_eq!(buf, b"x,y,multiplicity\n");
    }

    #[test]
    fn json_array() {
        let phi = Configuration::from_points([Point::xy(1.0, 2.0)]);
        assert_eq!(config_to_json(&phi, 2).unwrap(), r#"[{"x":1.0,"y":2.0,"multiplicity":1}]"#);
    }
}
