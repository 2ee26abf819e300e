//! CSV and JSON file formats.
//!
//! Data CSV: a header row, a response column named `y`, and covariate
//! columns in group order. Numbers are written with 17 significant digits
//! so a write/read cycle is exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::penalty::GroupStructure;

pub const RESPONSE_COLUMN: &str = "y";

/// Full-precision decimal form of `v`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Parses a dataset from CSV text. Row numbers in diagnostics are 1-based
/// file lines (the header is line 1); columns are 1-based.
pub fn parse_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let y_col = headers
        .iter()
        .position(|h| h == RESPONSE_COLUMN)
        .ok_or_else(|| Error::Parse {
            row: 1,
            column: 0,
            message: format!("no '{RESPONSE_COLUMN}' column in header"),
        })?;
    let width = headers.len();
    if width < 2 {
        return Err(Error::Parse {
            row: 1,
            column: width,
            message: "need at least one covariate column".into(),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.len() != width {
            return Err(Error::Parse {
                row: line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                column: c + 1,
                message: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: c + 1,
                    message: format!("non-finite value '{field}'"),
                });
            }
            if c == y_col {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    if n == 0 {
        return Err(Error::Parse {
            row: 2,
            column: 0,
            message: "no data rows".into(),
        });
    }
    let x = Array2::from_shape_vec((n, width - 1), xs).map_err(|e| Error::Shape(e.to_string()))?;
    Dataset::new(x, Array1::from(ys))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    parse_dataset(f)
}

/// Writes `y` first, then covariates `x1..xp`.
pub fn write_dataset_to<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![RESPONSE_COLUMN.to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (row, y) in data.x().rows().into_iter().zip(data.y().iter()) {
        let mut rec = vec![format_f64(*y)];
        rec.extend(row.iter().map(|v| format_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv writer>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    write_dataset_to(data, f)
}

/// Group sizes from a JSON file (`[10, 10]` or `{"sizes": [10, 10]}`) or an
/// inline list such as `10,10,5` or `[10, 10, 5]`.
pub fn parse_groups(spec: &str) -> Result<GroupStructure> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = read_text(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let list = value.get("sizes").cloned().unwrap_or(value);
        let sizes: Vec<usize> = serde_json::from_value(list)?;
        return GroupStructure::new(sizes);
    }
    let inner = spec.trim().trim_start_matches('[').trim_end_matches(']');
    let sizes = inner
        .split(',')
        .map(|t| {
            t.trim().parse::<usize>().map_err(|_| {
                Error::Argument(format!(
                    "'{spec}' is neither a file nor a list of group sizes"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GroupStructure::new(sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_is_exact() {
        let x = array![
            [0.1, 1.0 / 3.0],
            [-2.5e-300, 123_456_789.123_456_79],
            [f64::MIN_POSITIVE, -0.0]
        ];
        let y = array![1.0, 0.7, 2.0f64.sqrt()];
        let d = Dataset::new(x, y).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&d, &mut buf).unwrap();
        let back = parse_dataset(buf.as_slice()).unwrap();
        assert_eq!(back.x(), d.x());
        assert_eq!(back.y(), d.y());
        for (a, b) in back.x().iter().zip(d.x().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn response_column_anywhere() {
        let d = parse_dataset("a,y,b\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(d.y(), array![2.0, 5.0]);
        assert_eq!(d.x(), array![[1.0, 3.0], [4.0, 6.0]]);
    }

    #[test]
    fn malformed_rows_are_located() {
        match parse_dataset("y,x1\n1,2\n3,abc\n".as_bytes()) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_dataset("x1,x2\n1,2\n".as_bytes()),
            Err(Error::Parse { row: 1, .. })
        ));
        assert!(matches!(
            parse_dataset("y,x1\n1,2,3\n".as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            parse_dataset("y,x1\n1,inf\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
        assert!(parse_dataset("y,x1\n".as_bytes()).is_err());
    }

    #[test]
    fn group_specs() {
        assert_eq!(parse_groups("10,10,5").unwrap().sizes(), &[10, 10, 5]);
        assert_eq!(parse_groups("[2, 3]").unwrap().sizes(), &[2, 3]);
        assert!(parse_groups("1,0").is_err());
        assert!(parse_groups("no/such/file.json").is_err());
        let dir = std::env::temp_dir().join(format!("grpglm-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let f = dir.join("g.json");
        fs::write(&f, "{\"sizes\": [4, 1]}").unwrap();
        assert_eq!(parse_groups(f.to_str().unwrap()).unwrap().sizes(), &[4, 1]);
        fs::write(&f, "[7]").unwrap();
        assert_eq!(parse_groups(f.to_str().unwrap()).unwrap().sizes(), &[7]);
        fs::remove_dir_all(&dir).unwrap();
    }
}
