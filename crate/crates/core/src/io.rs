//! CSV helpers and atomic file output.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = PathBuf::from(path);
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    tmp.set_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Shortest round-trip text for `x`; exponent form outside [1e-4, 1e15).
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Numeric columns -> CSV text. Floats use the shortest round-trip form.
pub fn csv_string(headers: &[&str], columns: &[&[f64]]) -> String {
    let n = columns.first().map_or(0, |c| c.len());
    debug_assert!(columns.iter().all(|c| c.len() == n));
    let mut out = headers.join(",");
    out.push('\n');
    for k in 0..n {
        for (j, col) in columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(col[k]));
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    atomic_write(path, csv_string(headers, columns).as_bytes())
}

/// Rows of pre-formatted fields.
pub fn write_rows(path: &Path, headers: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    };
    w.write_record(headers).map_err(io_err)?;
    for r in rows {
        w.write_record(r).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })?;
    atomic_write(path, &bytes)
}

/// Reads a numeric CSV whose header must match `header` exactly.
pub fn read_columns<const N: usize>(path: &Path, header: [&str; N]) -> Result<[Vec<f64>; N]> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_columns(path, &text, header)
}

pub fn read_columns2(path: &Path, header: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let [a, b] = read_columns(path, header)?;
    Ok((a, b))
}

pub(crate) fn parse_columns<const N: usize>(
    path: &Path,
    text: &str,
    header: [&str; N],
) -> Result<[Vec<f64>; N]> {
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if found.len() != N || found.iter().zip(header.iter()).any(|(a, b)| a != *b) {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut cols: [Vec<f64>; N] = std::array::from_fn(|_| Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != N {
            return Err(parse_err(line, format!("expected {N} fields, got {}", rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value `{field}`")));
            }
            cols[j].push(v);
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_numeric_columns() {
        let a = [0.0, 1.0, 2.0];
        let b = [0.1, -1.0 / 3.0, 1e-300];
        assert_eq!(fmt_f64(7.5e-32), "7.5e-32");
        assert_eq!(fmt_f64(0.25), "0.25");
        let text = csv_string(&["t_s", "x"], &[&a, &b]);
        let [ra, rb] = parse_columns(Path::new("mem"), &text, ["t_s", "x"]).unwrap();
        assert_eq!(ra, a);
        assert_eq!(rb, b);
    }

    #[test]
    fn reports_line_numbers() {
        let text = "t_s,x\n0,1\n1,oops\n";
        match parse_columns(Path::new("mem"), text, ["t_s", "x"]) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "t,x\n0,1\n";
        assert!(matches!(
            parse_columns(Path::new("mem"), text, ["t_s", "x"]),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
