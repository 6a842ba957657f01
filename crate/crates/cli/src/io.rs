//! File formats: embedding matrices (CSV or binary), label lists and CSV
//! matrices.

use std::fs;
use std::path::Path;

use pota_core::Mat;

use crate::error::{CliError, CliResult};

pub const EMB_MAGIC: &[u8; 8] = b"CAOTEMB1";

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{}: not valid UTF-8 text", path.display())))
}

/// Render a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a matrix from either the binary embedding format or CSV.
pub fn read_matrix(path: &Path) -> CliResult<Mat> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(EMB_MAGIC) {
        return parse_binary(path, &bytes);
    }
    let text = String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{}: not valid UTF-8 text", path.display())))?;
    parse_csv(path, &text)
}

fn parse_binary(path: &Path, bytes: &[u8]) -> CliResult<Mat> {
    let bad = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    if bytes.len() < 16 {
        return Err(bad("binary header truncated".into()));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = &bytes[16..];
    let expected = n.checked_mul(d).and_then(|c| c.checked_mul(4)).ok_or_else(|| bad("header counts overflow".into()))?;
    if body.len() != expected {
        return Err(bad(format!("header promises {n}x{d} values ({expected} bytes), body has {} bytes", body.len())));
    }
    let data: Vec<f64> = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(bad(format!("value {} (row {}, column {}) is not finite", pos, pos / d.max(1), pos % d.max(1))));
    }
    Ok(Mat::new(n, d, data)?)
}

fn parse_row(path: &Path, line_no: usize, line: &str) -> CliResult<Vec<f64>> {
    line.split(',')
        .enumerate()
        .map(|(c, field)| {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::at(path, line_no, format!("column {}: cannot parse {field:?} as a number", c + 1)))?;
            if !v.is_finite() {
                return Err(CliError::at(path, line_no, format!("column {}: value is not finite", c + 1)));
            }
            Ok(v)
        })
        .collect()
}

fn header_counts(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split(',').map(str::trim);
    let n = parts.next()?.parse().ok()?;
    let d = parts.next()?.parse().ok()?;
    parts.next().is_none().then_some((n, d))
}

/// CSV rows of equal width. A first line `N,D` of two integers is taken as
/// a header when exactly `N` rows of `D` values follow it.
pub fn parse_csv(path: &Path, text: &str) -> CliResult<Mat> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    let mut body = &lines[..];
    let mut declared = None;
    if let Some((n, d)) = header_counts(lines[0].1) {
        let rest = &lines[1..];
        if rest.len() == n && rest.iter().all(|(_, l)| l.split(',').count() == d) {
            body = rest;
            declared = Some((n, d));
        }
    }
    let mut data = Vec::new();
    let mut width = None;
    for &(line_no, line) in body {
        let row = parse_row(path, line_no, line)?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::at(path, line_no, format!("expected {w} columns, found {}", row.len())));
            }
            _ => {}
        }
        data.extend(row);
    }
    let d = declared.map_or(width.unwrap_or(0), |(_, d)| d);
    Ok(Mat::new(body.len(), d, data)?)
}

pub fn matrix_csv(m: &Mat, header: bool) -> String {
    let mut out = String::new();
    if header {
        out.push_str(&format!("{},{}\n", m.rows(), m.cols()));
    }
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn embedding_binary(m: &Mat) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * m.as_slice().len());
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().map_err(|_| CliError::at(path, i + 1, format!("cannot parse {line:?} as a label")))?);
    }
    Ok(out)
}

pub fn labels_text(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

pub fn values_text(values: &[f64]) -> String {
    values.iter().map(|&v| format!("{}\n", fmt_f64(v))).collect()
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::write(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::write(path, e))?;
    text.push('\n');
    write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn csv_with_and_without_header() {
        let m = parse_csv(p(), "2,3\n1,2,3\n4,5,6\n").unwrap();
        assert_eq!(m.shape(), (2, 3));
        let plain = parse_csv(p(), "1,2\n3,4\n5,6\n").unwrap();
        assert_eq!(plain.shape(), (3, 2));
        assert_eq!(plain.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // a first line that fits the header rule is read as one
        assert_eq!(parse_csv(p(), "1,2\n3,4\n").unwrap().as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = parse_csv(p(), "1,2\n3,x\n").unwrap_err().to_string();
        assert!(err.starts_with("mem.csv:2:"), "{err}");
        let ragged = parse_csv(p(), "1,2\n\n3\n").unwrap_err().to_string();
        assert!(ragged.starts_with("mem.csv:3:"), "{ragged}");
        assert!(parse_csv(p(), "1,nan\n").is_err());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let m = Mat::from_rows(&[[0.1, 1.0 / 3.0], [-2.5e-300, 7.0e12]]).unwrap();
        assert_eq!(parse_csv(p(), &matrix_csv(&m, true)).unwrap(), m);
        assert_eq!(parse_csv(p(), &matrix_csv(&m, false)).unwrap(), m);
        let values = [0.1, 1.0 / 3.0, -4e-9];
        assert_eq!(parse_csv(p(), &values_text(&values)).unwrap().as_slice(), &values);
    }

    #[test]
    fn binary_round_trip() {
        let m = Mat::from_rows(&[[0.5, -1.25, 3.0], [2.0, 0.0, -8.5]]).unwrap();
        assert_eq!(parse_binary(p(), &embedding_binary(&m)).unwrap(), m);
        let mut short = embedding_binary(&m);
        short.pop();
        assert!(parse_binary(p(), &short).is_err());
    }
}
