//! Plain-text matrix dumps.
//!
//! The first line holds `rows cols`; each following line holds one row of
//! whitespace-separated values in scientific notation. Values are written
//! with the shortest representation that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Matrix;
use crate::error::{Error, Result};

pub fn to_string(m: &Matrix) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 24 + 16);
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:e}");
        }
        out.push('\n');
    }
    out
}

pub fn from_str(text: &str, origin: &Path) -> Result<Matrix> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(origin, "missing header line"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(origin, format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::parse(origin, format!("header must be `rows cols`, got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(origin, format!("missing row {i}")))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| Error::parse(origin, format!("row {i}: bad value {tok:?}: {e}")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::parse(
                origin,
                format!("row {i} has {} values, expected {cols}", data.len() - before),
            ));
        }
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn write(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, to_string(m)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = Rng::new(11).gaussian_matrix(5, 3, 1e-3);
        m.set(0, 0, f64::MIN_POSITIVE);
        m.set(1, 1, -0.0);
        let back = from_str(&to_string(&m), Path::new("mem")).unwrap();
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&m), bits(&back));
    }

    #[test]
    fn empty_matrix() {
        let m = Matrix::zeros(0, 4);
        let back = from_str(&to_string(&m), Path::new("mem")).unwrap();
        assert_eq!(back.shape(), (0, 4));
    }

    #[test]
    fn short_row_is_reported() {
        let err = from_str("2 2\n1 2\n3\n", Path::new("m.txt")).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }
}
