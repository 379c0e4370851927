//! Reading and writing point sets and label files.
//!
//! Two on-disk shapes are supported and sniffed automatically on load:
//! a compact binary format (magic `LBF1`, little-endian u64 row/column
//! counts, then row-major f64 values) whose round-trip is bit-exact, and
//! delimited text with one point per line and an optional header row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read as _, Write as _};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::pipeline::ClusteringResult;

const MAGIC: &[u8; 4] = b"LBF1";

/// On-disk layout for a clustering result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    /// One JSON object per line: a summary record first (cluster count and
    /// energies), then `{"point": i, "label": l, "distance": d}` per point.
    JsonLines,
    /// One `label,distance` row per point.
    DelimitedText,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Writes a matrix in the binary format. The encoding is exact: loading the
/// file returns the same bits that were stored.
pub fn save_matrix_binary(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));
    write(MAGIC)?;
    write(&(matrix.nrows() as u64).to_le_bytes())?;
    write(&(matrix.ncols() as u64).to_le_bytes())?;
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            write(&matrix[(i, j)].to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Loads a matrix stored by [`save_matrix_binary`].
pub fn load_matrix_binary(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if &magic != MAGIC {
        return Err(parse_err(path, 0, "bad magic: not a binary point file"));
    }
    let mut u = [0u8; 8];
    r.read_exact(&mut u).map_err(|e| io_err(path, e))?;
    let n = u64::from_le_bytes(u) as usize;
    r.read_exact(&mut u).map_err(|e| io_err(path, e))?;
    let d = u64::from_le_bytes(u) as usize;
    let total = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| parse_err(path, 0, "size header overflows"))?;
    let mut bytes = vec![0u8; total];
    r.read_exact(&mut bytes).map_err(|e| io_err(path, e))?;
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(parse_err(path, 0, "trailing bytes after matrix data")),
        Err(e) => return Err(io_err(path, e)),
    }
    let mut matrix = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let off = (i * d + j) * 8;
            let chunk: [u8; 8] = bytes[off..off + 8].try_into().expect("sized above");
            matrix[(i, j)] = f64::from_le_bytes(chunk);
        }
    }
    Ok(matrix)
}

/// Writes a matrix as delimited text, one row per line. Pass `None` to
/// separate fields with a single space.
pub fn save_matrix_text(path: &Path, matrix: &DMatrix<f64>, delimiter: Option<char>) -> Result<()> {
    let sep = delimiter.unwrap_or(' ');
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for i in 0..matrix.nrows() {
        line.clear();
        for j in 0..matrix.ncols() {
            if j > 0 {
                line.push(sep);
            }
            // Display for f64 prints the shortest digits that parse back to
            // the same value, so text files round-trip too.
            line.push_str(&format!("{}", matrix[(i, j)]));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn split_fields(line: &str, delimiter: Option<char>) -> Vec<&str> {
    match delimiter {
        Some(c) => line.split(c).map(str::trim).collect(),
        None => line.split_whitespace().collect(),
    }
}

fn parse_row(fields: &[&str]) -> std::result::Result<Vec<f64>, String> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| format!("cannot parse {f:?} as a number"))
        })
        .collect()
}

/// Loads a delimited text matrix. Blank lines are skipped; a first line that
/// does not parse as numbers is treated as a header. Errors carry the
/// 1-based line number.
pub fn load_matrix_text(path: &Path, delimiter: Option<char>) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut ncols = 0usize;
    let mut header_used = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(&line, delimiter);
        match parse_row(&fields) {
            Ok(row) => {
                if !rows.is_empty() && row.len() != ncols {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("expected {ncols} columns, found {}", row.len()),
                    ));
                }
                ncols = row.len();
                rows.push(row);
            }
            Err(msg) => {
                // one unparsable line before any data passes as a header
                if rows.is_empty() && !header_used {
                    header_used = true;
                } else {
                    return Err(parse_err(path, lineno, msg));
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no data rows"));
    }
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(n, ncols, &flat))
}

/// Loads a point file of either format, choosing by the binary magic.
pub fn load_matrix(path: &Path, delimiter: Option<char>) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 4];
    let got = {
        let mut f = File::open(path).map_err(|e| io_err(path, e))?;
        f.read(&mut magic).map_err(|e| io_err(path, e))?
    };
    if got == 4 && &magic == MAGIC {
        load_matrix_binary(path)
    } else {
        load_matrix_text(path, delimiter)
    }
}

/// Loads points as a [`PointCloud`], rejecting empty and non-finite data.
pub fn load_points(path: &Path, delimiter: Option<char>) -> Result<PointCloud> {
    PointCloud::new(load_matrix(path, delimiter)?)
}

/// Loads a trajectory-style file laid out transposed: each column is one
/// point, each row one coordinate across all points (the common layout for
/// feature-track files, 2F rows by N columns). Returns the N×2F cloud.
pub fn load_trajectories(path: &Path, delimiter: Option<char>) -> Result<PointCloud> {
    let matrix = load_matrix(path, delimiter)?;
    PointCloud::new(matrix.transpose())
}

/// Writes per-point assignments and distances from a clustering run.
/// Float fields print their shortest round-tripping form, so the output for
/// a given result is byte-stable.
pub fn save_result(path: &Path, result: &ClusteringResult, format: ResultFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        ResultFormat::JsonLines => {
            let summary = serde_json::json!({
                "clusters": result.flats.len(),
                "l1_energy": result.l1_energy,
                "l2_energy": result.l2_energy,
            });
            writeln!(w, "{summary}").map_err(|e| io_err(path, e))?;
            for (i, (&label, &dist)) in result.labels.iter().zip(&result.distances).enumerate() {
                let row = serde_json::json!({"point": i, "label": label, "distance": dist});
                writeln!(w, "{row}").map_err(|e| io_err(path, e))?;
            }
        }
        ResultFormat::DelimitedText => {
            for (&label, &dist) in result.labels.iter().zip(&result.distances) {
                writeln!(w, "{label},{dist}").map_err(|e| io_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes integer labels, one per line.
pub fn save_labels(path: &Path, labels: &[i64]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for l in labels {
        writeln!(w, "{l}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Loads integer labels, one per line; `-1` marks an outlier.
pub fn load_labels(path: &Path) -> Result<Vec<i64>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut labels = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: i64 = t
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("cannot parse {t:?} as a label")))?;
        labels.push(v);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        let dir = tempfile::tempdir().unwrap();
        // keep the dir alive by leaking it: simpler than threading guards
        let path = dir.path().join(name);
        std::mem::forget(dir);
        path
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let m = DMatrix::from_row_slice(
            2,
            3,
            &[
                0.1,
                -0.0,
                f64::MIN_POSITIVE,
                1e300,
                std::f64::consts::PI,
                -7.25,
            ],
        );
        let path = tmp("pts.bin");
        save_matrix_binary(&path, &m).unwrap();
        let back = load_matrix_binary(&path).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // sniffing picks the binary branch
        let sniffed = load_matrix(&path, Some(',')).unwrap();
        assert_eq!(sniffed, back);
    }

    #[test]
    fn text_round_trip_and_header() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 2.5, -3.0, 4.75]);
        let path = tmp("pts.csv");
        save_matrix_text(&path, &m, Some(',')).unwrap();
        assert_eq!(load_matrix_text(&path, Some(',')).unwrap(), m);

        let path2 = tmp("with_header.csv");
        let mut f = File::create(&path2).unwrap();
        writeln!(f, "x,y").unwrap();
        writeln!(f, "1.0, 2.0").unwrap();
        writeln!(f).unwrap();
        writeln!(f, "3.0, 4.0").unwrap();
        drop(f);
        let got = load_matrix_text(&path2, Some(',')).unwrap();
        assert_eq!(got, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let path = tmp("bad.csv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "1.0,2.0").unwrap();
        writeln!(f, "3.0,oops").unwrap();
        drop(f);
        match load_matrix_text(&path, Some(',')) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let path2 = tmp("ragged.csv");
        let mut f = File::create(&path2).unwrap();
        writeln!(f, "1.0,2.0").unwrap();
        writeln!(f, "3.0").unwrap();
        drop(f);
        match load_matrix_text(&path2, Some(',')) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn whitespace_delimited_and_trajectories() {
        let path = tmp("traj.txt");
        let mut f = File::create(&path).unwrap();
        // 4 coordinate rows (2 frames), 3 points
        writeln!(f, "1 2 3").unwrap();
        writeln!(f, "4 5 6").unwrap();
        writeln!(f, "7 8 9").unwrap();
        writeln!(f, "10 11 12").unwrap();
        drop(f);
        let cloud = load_trajectories(&path, None).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.ambient_dim(), 4);
        assert_eq!(cloud.point(0).as_slice(), &[1.0, 4.0, 7.0, 10.0]);
    }

    #[test]
    fn result_files_list_every_point() {
        let pts = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let cloud = PointCloud::new(pts).unwrap();
        let cfg = crate::pipeline::LbfConfig::new(1, 2);
        let result = crate::pipeline::lbf_cluster(&cloud, &cfg).unwrap();

        let jl = tmp("result.jsonl");
        save_result(&jl, &result, ResultFormat::JsonLines).unwrap();
        let text = std::fs::read_to_string(&jl).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + cloud.len());
        let summary: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(summary["clusters"], 2);
        for (i, line) in lines[1..].iter().enumerate() {
            let row: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(row["point"], i as u64);
            assert_eq!(row["label"], result.labels[i] as u64);
        }

        let csv = tmp("result.csv");
        save_result(&csv, &result, ResultFormat::DelimitedText).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), cloud.len());
        for (line, &label) in text.lines().zip(&result.labels) {
            let (l, d) = line.split_once(',').unwrap();
            assert_eq!(l.parse::<usize>().unwrap(), label);
            assert!(d.parse::<f64>().unwrap().is_finite());
        }
    }

    #[test]
    fn labels_round_trip() {
        let path = tmp("labels.txt");
        let labels = vec![0, 1, 2, -1, 0];
        save_labels(&path, &labels).unwrap();
        assert_eq!(load_labels(&path).unwrap(), labels);
    }

    #[test]
    fn missing_file_is_io_error() {
        let path = PathBuf::from("/nonexistent/definitely/not/here.csv");
        assert!(matches!(
            load_matrix_text(&path, None),
            Err(Error::Io { .. })
        ));
    }
}
