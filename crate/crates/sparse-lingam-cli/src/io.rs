//! File emission and ingestion helpers: numeric CSV matrices, JSON
//! documents, and binary portable pixmaps. All float text is the shortest
//! round-trip decimal form, so reruns are byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use sparse_lingam::{Error, Result};

/// Writes a matrix as plain CSV rows with no header.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format_float(m[(r, c)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes a data matrix as CSV with an `x1,...,xd` header row.
pub fn write_data_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for c in 0..m.ncols() {
        if c > 0 {
            out.push(',');
        }
        out.push_str(&format!("x{}", c + 1));
    }
    out.push('\n');
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format_float(m[(r, c)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a headerless numeric CSV into a matrix.
pub fn read_matrix_csv(path: &Path, delimiter: char) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(delimiter) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("not a number: {field:?}"),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, msg: "file holds no numeric rows".into() });
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |r, c| rows[r][c]))
}

/// Writes a JSON value with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// One-per-line positive integers (1-based variable positions).
pub fn write_order(path: &Path, order: &[usize]) -> Result<()> {
    let mut out = String::new();
    for &j in order {
        out.push_str(&(j + 1).to_string());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// The shortest decimal text that parses back to exactly this value.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        // normalize -0 so identical estimates always serialize identically
        "0".into()
    } else {
        format!("{v}")
    }
}

/// Serializes a float matrix to a JSON array of row arrays.
pub fn matrix_to_json(m: &DMatrix<f64>) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = (0..m.nrows())
        .map(|r| {
            serde_json::Value::Array(
                (0..m.ncols())
                    .map(|c| {
                        serde_json::Number::from_f64(m[(r, c)])
                            .map(serde_json::Value::Number)
                            .unwrap_or(serde_json::Value::Null)
                    })
                    .collect(),
            )
        })
        .collect();
    serde_json::Value::Array(rows)
}

/// Renders a matrix as a binary portable pixmap with a diverging color
/// map: white at zero, red for positive, blue for negative, saturating at
/// the largest magnitude. Each cell covers `cell` × `cell` pixels.
pub fn write_heatmap_ppm(path: &Path, m: &DMatrix<f64>, cell: usize) -> Result<()> {
    const RED: [f64; 3] = [178.0, 24.0, 43.0];
    const BLUE: [f64; 3] = [33.0, 102.0, 172.0];
    let (d_r, d_c) = m.shape();
    let (h, w) = (d_r * cell, d_c * cell);
    let peak = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let scale = if peak > 0.0 { peak } else { 1.0 };

    let mut body = Vec::with_capacity(h * w * 3);
    for pr in 0..h {
        for pc in 0..w {
            let v = m[(pr / cell, pc / cell)];
            let t = (v.abs() / scale).min(1.0);
            let target = if v > 0.0 { RED } else { BLUE };
            for ch in 0..3 {
                let mixed = 255.0 + (target[ch] - 255.0) * t;
                body.push(mixed.round() as u8);
            }
        }
    }
    let mut file = fs::File::create(path)?;
    write!(file, "P6\n{w} {h}\n255\n")?;
    file.write_all(&body)?;
    Ok(())
}
