//! The LDMX binary matrix container.
//!
//! Layout: 4 magic bytes "LDMX", u32 LE version (currently 1), u64 LE row
//! count, u64 LE column count, then row-major IEEE-754 f64 LE payload.
//! Writes refuse non-finite values and are atomic; read errors name the
//! byte offset.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Matrix;

pub const MAGIC: [u8; 4] = *b"LDMX";
pub const VERSION: u32 = 1;

fn format_error(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

/// Write a matrix to the binary container, atomically.
pub fn write_matrix(path: impl AsRef<Path>, matrix: &Matrix) -> Result<()> {
    let path = path.as_ref();
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "matrix written to {}",
            path.display()
        )));
    }
    super::atomic_write(path, |w| {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(matrix.nrows() as u64).to_le_bytes())?;
        w.write_all(&(matrix.ncols() as u64).to_le_bytes())?;
        for i in 0..matrix.nrows() {
            for j in 0..matrix.ncols() {
                w.write_all(&matrix[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    })
}

/// Read a matrix from the binary container.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let mut reader = BufReader::new(File::open(path)?);
    let mut offset = 0u64;

    let mut read_exact = |buf: &mut [u8], what: &str| -> Result<()> {
        let mut filled = 0usize;
        while filled < buf.len() {
            let n = reader.read(&mut buf[filled..])?;
            if n == 0 {
                return Err(format_error(
                    path,
                    offset + filled as u64,
                    format!("truncated {what}"),
                ));
            }
            filled += n;
        }
        offset += buf.len() as u64;
        Ok(())
    };

    let mut magic = [0u8; 4];
    read_exact(&mut magic, "magic")?;
    if magic != MAGIC {
        return Err(format_error(path, 0, "bad magic (expected LDMX)"));
    }
    let mut word = [0u8; 4];
    read_exact(&mut word, "version")?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(format_error(
            path,
            4,
            format!("unsupported version {version}"),
        ));
    }
    let mut long = [0u8; 8];
    read_exact(&mut long, "row count")?;
    let n_rows = u64::from_le_bytes(long) as usize;
    read_exact(&mut long, "column count")?;
    let n_cols = u64::from_le_bytes(long) as usize;

    let n_values = n_rows
        .checked_mul(n_cols)
        .ok_or_else(|| format_error(path, 8, "dimension overflow"))?;
    let mut values = Vec::with_capacity(n_values);
    let mut cell = [0u8; 8];
    for _ in 0..n_values {
        read_exact(&mut cell, "payload")?;
        values.push(f64::from_le_bytes(cell));
    }
    // trailing bytes are a format violation
    let mut probe = [0u8; 1];
    if reader.read(&mut probe)? != 0 {
        return Err(format_error(path, offset, "trailing bytes after payload"));
    }
    Ok(Matrix::from_row_iterator(n_rows, n_cols, values))
}

/// Write a matrix as comma-separated text with shortest-round-trip floats.
pub fn write_matrix_csv(path: impl AsRef<Path>, matrix: &Matrix) -> Result<()> {
    let path = path.as_ref();
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "matrix written to {}",
            path.display()
        )));
    }
    super::atomic_write(path, |w| {
        for i in 0..matrix.nrows() {
            let row: Vec<String> = (0..matrix.ncols())
                .map(|j| format!("{:?}", matrix[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })
}

/// Read a comma-separated matrix; all rows must have equal width.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|e| {
                    format_error(path, 0, format!("line {}: {e}", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format_error(
                    path,
                    0,
                    format!("line {}: ragged row", lineno + 1),
                ));
            }
        }
        rows.push(row);
    }
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    Ok(Matrix::from_row_iterator(
        n_rows,
        n_cols,
        rows.into_iter().flatten(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = crate::rng::seeded_stream(seed, 21);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ldmx");
        let m = random_matrix(100, 7, 1);
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ldmx");
        let mut m = Matrix::zeros(2, 2);
        m[(0, 1)] = f64::INFINITY;
        assert!(matches!(
            write_matrix(&path, &m),
            Err(Error::NonFinite(_))
        ));
        assert!(!path.exists());
    }

    #[test]
    fn truncation_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ldmx");
        let m = random_matrix(4, 3, 2);
        write_matrix(&path, &m).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        match read_matrix(&path) {
            Err(Error::Format { offset, message, .. }) => {
                assert!(message.contains("truncated"));
                // header is 24 bytes; the cut lands inside the payload
                assert!(offset > 24);
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ldmx");
        let m = random_matrix(2, 2, 3);
        write_matrix(&path, &m).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Format { .. })));

        write_matrix(&path, &m).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        std::fs::write(&path, &bytes).unwrap();
        match read_matrix(&path) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ldmx");
        write_matrix(&path, &random_matrix(2, 2, 4)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn csv_matches_binary_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let m = random_matrix(20, 5, 5);
        let bin = dir.path().join("m.ldmx");
        let csv = dir.path().join("m.csv");
        write_matrix(&bin, &m).unwrap();
        write_matrix_csv(&csv, &m).unwrap();
        let from_bin = read_matrix(&bin).unwrap();
        let from_csv = read_matrix_csv(&csv).unwrap();
        // shortest-round-trip formatting parses back bit-identically
        assert_eq!(from_bin, from_csv);
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2,3\n4,5\n").unwrap();
        assert!(read_matrix_csv(&path).is_err());
    }
}
