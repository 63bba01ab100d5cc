//! MatrixMarket reader for `coordinate real general` and `array real general`
//! files with nonnegative entries.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, DenseMatrix, SparseMatrix};

const COORDINATE_HEADER: &str = "%%MatrixMarket matrix coordinate real general";
const ARRAY_HEADER: &str = "%%MatrixMarket matrix array real general";

#[derive(Clone, Copy)]
enum Layout {
    Coordinate,
    Array,
}

/// Loads a MatrixMarket file: coordinate files become [`SparseMatrix`],
/// array files [`DenseMatrix`].
pub fn load_matrix(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_matrix_market(BufReader::new(file), path)
}

/// Parses MatrixMarket text from `reader`; `path` only labels errors.
pub fn read_matrix_market(reader: impl BufRead, path: &Path) -> Result<DataMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(path),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (line_no, header) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(err(1, "empty file".into())),
    };
    let layout = match header.trim_end() {
        COORDINATE_HEADER => Layout::Coordinate,
        ARRAY_HEADER => Layout::Array,
        other => {
            return Err(err(
                line_no,
                format!("unsupported header `{other}`; expected `{COORDINATE_HEADER}` or `{ARRAY_HEADER}`"),
            ))
        }
    };

    // skip comments and blank lines up to the size line
    let mut content = Vec::new();
    for (n, l) in lines {
        let l = l?;
        let t = l.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        content.push((n, t.to_string()));
    }
    let mut it = content.into_iter();
    let (size_line, size) = it.next().ok_or_else(|| err(line_no, "missing size line".into()))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    let parse_usize = |s: &str, n: usize| s.parse::<usize>().map_err(|_| err(n, format!("expected an integer, got `{s}`")));
    let parse_f64 = |s: &str, n: usize| match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(err(n, format!("expected a finite real, got `{s}`"))),
    };

    match layout {
        Layout::Coordinate => {
            if dims.len() != 3 {
                return Err(err(size_line, "coordinate size line needs `rows cols nnz`".into()));
            }
            let (rows, cols, nnz) = (
                parse_usize(dims[0], size_line)?,
                parse_usize(dims[1], size_line)?,
                parse_usize(dims[2], size_line)?,
            );
            let mut seen = HashSet::with_capacity(nnz);
            let mut triplets = Vec::with_capacity(nnz);
            for (n, l) in it {
                let f: Vec<&str> = l.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(err(n, format!("expected `row col value`, got `{l}`")));
                }
                let (i, j, v) = (parse_usize(f[0], n)?, parse_usize(f[1], n)?, parse_f64(f[2], n)?);
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(err(n, format!("index ({i}, {j}) outside {rows}x{cols}")));
                }
                if !seen.insert((i, j)) {
                    return Err(err(n, format!("duplicate entry ({i}, {j})")));
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        path: path.into(),
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                triplets.push((i - 1, j - 1, v));
            }
            if triplets.len() != nnz {
                return Err(err(
                    size_line,
                    format!("header declares {nnz} entries, file has {}", triplets.len()),
                ));
            }
            Ok(SparseMatrix::from_triplets(rows, cols, triplets)?.into())
        }
        Layout::Array => {
            if dims.len() != 2 {
                return Err(err(size_line, "array size line needs `rows cols`".into()));
            }
            let (rows, cols) = (parse_usize(dims[0], size_line)?, parse_usize(dims[1], size_line)?);
            let mut values = Vec::with_capacity(rows * cols);
            for (n, l) in it {
                for tok in l.split_whitespace() {
                    let v = parse_f64(tok, n)?;
                    if values.len() == rows * cols {
                        return Err(err(n, format!("more than the declared {} entries", rows * cols)));
                    }
                    if v < 0.0 {
                        let k = values.len();
                        return Err(Error::NegativeEntry {
                            path: path.into(),
                            row: k % rows.max(1) + 1,
                            col: k / rows.max(1) + 1,
                            value: v,
                        });
                    }
                    values.push(v);
                }
            }
            if values.len() != rows * cols {
                return Err(err(
                    size_line,
                    format!("header declares {} entries, file has {}", rows * cols, values.len()),
                ));
            }
            Ok(DenseMatrix::from_col_major(rows, cols, &values)?.into())
        }
    }
}

/// Writes `a` in array format (column-major).
pub fn write_matrix_market_array(a: &DenseMatrix, mut out: impl std::io::Write) -> Result<()> {
    writeln!(out, "{ARRAY_HEADER}")?;
    writeln!(out, "{} {}", a.rows(), a.cols())?;
    for v in a.to_col_major() {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<DataMatrix> {
        read_matrix_market(text.as_bytes(), Path::new("test.mtx"))
    }

    #[test]
    fn array_is_column_major() {
        let a = parse("%%MatrixMarket matrix array real general\n% note\n2 2\n1\n2\n3\n4\n").unwrap();
        let DataMatrix::Dense(d) = a else { panic!("expected dense") };
        assert_eq!(d, DenseMatrix::from_rows(&[[1.0, 3.0], [2.0, 4.0]]).unwrap());
    }

    #[test]
    fn coordinate_is_sparse() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n3 2 2\n1 1 0.5\n3 2 2\n").unwrap();
        let DataMatrix::Sparse(s) = a else { panic!("expected sparse") };
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.to_dense().get(2, 1), 2.0);
    }

    #[test]
    fn duplicate_coordinate_rejected_with_line() {
        let e = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n1 1 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");
    }

    #[test]
    fn negative_entry_named() {
        let e = parse("%%MatrixMarket matrix array real general\n2 1\n1\n-0.5\n").unwrap_err();
        assert!(matches!(e, Error::NegativeEntry { row: 2, col: 1, .. }), "{e}");
        let e = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n2 1 -0.5\n").unwrap_err();
        assert!(matches!(e, Error::NegativeEntry { row: 2, col: 1, .. }), "{e}");
    }

    #[test]
    fn header_and_count_errors() {
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate integer general\n1 1 0\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n").is_err());
    }

    #[test]
    fn array_round_trip() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.25], [2.5, 4.0], [0.0, 7.0]]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market_array(&a, &mut buf).unwrap();
        let DataMatrix::Dense(b) = read_matrix_market(buf.as_slice(), Path::new("x")).unwrap() else {
            panic!()
        };
        assert_eq!(a, b);
    }
}
