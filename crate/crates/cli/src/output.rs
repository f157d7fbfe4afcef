use std::path::Path;

use anyhow::{bail, Context, Result};
use hyperwave_core::DiagnosticsRow;
use serde::Serialize;

/// `rows.csv`: header of [`DiagnosticsRow::COLUMNS`], one line per completed
/// slice, floats in shortest round-trip decimal form.
pub fn write_rows_csv(path: &Path, rows: &[DiagnosticsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(DiagnosticsRow::COLUMNS)?;
    for r in rows {
        w.write_record(r.values().iter().map(|v| format_float(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != DiagnosticsRow::COLUMNS {
        bail!("{}: unexpected columns", path.display());
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(DiagnosticsRow::from_values(&vals).context("row length")?);
    }
    Ok(rows)
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows: Vec<DiagnosticsRow> = (0..3)
            .map(|k| {
                let mut v: Vec<f64> = (0..DiagnosticsRow::COLUMNS.len())
                    .map(|c| (c as f64 + 0.1).sqrt() / 3.0 * 10f64.powi(k - 1))
                    .collect();
                v[0] = 2.0 + k as f64;
                DiagnosticsRow::from_values(&v).unwrap()
            })
            .collect();
        write_rows_csv(&path, &rows).unwrap();
        assert_eq!(read_rows_csv(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("s,t_min,t_max,n_points,"));
    }
}
