//! Text artifacts. Every float is printed as `{:.16e}` (17 significant digits),
//! so values round-trip exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::checkpoint::write_checkpoint;
use crate::error::{Result, SnlsError};
use crate::spectral::ComplexField;

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with fixed-precision floats. Non-finite values become `null`.
struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            w.write_all(format_f64(v).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| SnlsError::Format(format!("json: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Column-major numeric table; `None` cells are written empty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Series {
    pub fn new(columns: &[&str]) -> Self {
        Series {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| Some(v)).collect());
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| SnlsError::Format(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.map(format_f64).unwrap_or_default()))
                .map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| SnlsError::Format(format!("csv: {e}")))
    }
}

/// Everything one experiment writes.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub summary: serde_json::Value,
    pub series: Series,
    /// `(file stem, field, time)`, written as `<stem>.snls`.
    pub checkpoints: Vec<(String, ComplexField, f64)>,
}

pub fn write_artifacts(dir: &Path, a: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), to_json_string(&a.summary)?)?;
    fs::write(dir.join("series.csv"), a.series.to_csv()?)?;
    for (stem, field, t) in &a.checkpoints {
        write_checkpoint(&dir.join(format!("{stem}.snls")), field, *t)?;
    }
    Ok(())
}

/// Whitespace-delimited columns for gnuplot, headed by `# c1 c2 ...`.
/// Empty cells become `NaN`.
pub fn emit_plot_data(series_csv: &Path, columns: &[String], out: &Path) -> Result<()> {
    let text = fs::read_to_string(series_csv)?;
    let rendered = plot_data_from_csv(&text, columns)?;
    fs::write(out, rendered)?;
    Ok(())
}

pub fn plot_data_from_csv(text: &str, columns: &[String]) -> Result<String> {
    if columns.is_empty() {
        return Err(SnlsError::Config("no columns requested".into()));
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| SnlsError::Format(format!("csv: {e}")))?
        .clone();
    let available: Vec<&str> = headers.iter().collect();
    let idx = columns
        .iter()
        .map(|c| {
            available.iter().position(|h| h == c).ok_or_else(|| {
                SnlsError::Config(format!(
                    "unknown column '{c}'; available: {}",
                    available.join(", ")
                ))
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut out = format!("# {}\n", columns.join(" "));
    for record in reader.records() {
        let record = record.map_err(|e| SnlsError::Format(format!("csv: {e}")))?;
        let cells: Vec<&str> = idx
            .iter()
            .map(|&i| match record.get(i) {
                Some(s) if !s.is_empty() => s,
                _ => "NaN",
            })
            .collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn json_floats_have_17_digits() {
        let s = to_json_string(&serde_json::json!({"a": 0.1, "b": 3, "c": [f64::NAN, -2.5]})).unwrap();
        assert!(s.contains("\"a\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"b\": 3"));
        assert!(s.contains("null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert_eq!(back["c"][1].as_f64(), Some(-2.5));
    }

    #[test]
    fn plot_data_columns() {
        let mut s = Series::new(&["t", "mass", "energy"]);
        s.push_values(&[0.0, 1.0, 2.0]);
        s.push(vec![Some(1.0), None, Some(3.0)]);
        let csv = String::from_utf8(s.to_csv().unwrap()).unwrap();
        let out = plot_data_from_csv(&csv, &["t".into(), "mass".into()]).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "# t mass");
        assert_eq!(lines[1], "0.0000000000000000e0 1.0000000000000000e0");
        assert_eq!(lines[2], "1.0000000000000000e0 NaN");
    }

    #[test]
    fn unknown_column_lists_available() {
        let csv = "t,mass\n";
        let err = plot_data_from_csv(csv, &["t".into(), "decay_ratio".into()]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("decay_ratio") && msg.contains("t, mass"), "{msg}");
    }

    #[test]
    fn empty_series_gives_header_only() {
        let csv = String::from_utf8(Series::new(&["t", "decay_ratio"]).to_csv().unwrap()).unwrap();
        let out = plot_data_from_csv(&csv, &["t".into(), "decay_ratio".into()]).unwrap();
        assert_eq!(out, "# t decay_ratio\n");
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
