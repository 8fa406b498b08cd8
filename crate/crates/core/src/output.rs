//! CSV and JSON emission. Floats go out with 17 significant digits so that
//! reading a file back reproduces the arrays bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> std::io::Result<()>
where
    I: IntoIterator,
    I::Item: AsRef<[f64]>,
{
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()
}

/// Header and numeric rows of a CSV written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), csv::Error> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|e| {
                    csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Pretty JSON with a trailing newline; keys follow declaration order.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        for x in [std::f64::consts::PI, 1e-300, -7.25e12, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let rows = vec![vec![0.1, 1.0 / 3.0], vec![-1e-17, 2.5e100]];
        write_csv(&path, &["x", "y"], &rows).unwrap();
        let (h, back) = read_csv(&path).unwrap();
        assert_eq!(h, ["x", "y"]);
        assert_eq!(back, rows);
    }
}
