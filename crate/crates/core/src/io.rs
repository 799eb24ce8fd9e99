//! CSV matrix files.
//!
//! One matrix row per line, decimal reals. An empty cell or a literal `NaN`
//! marks a missing entry: the loaded matrix stores 0 there and the returned
//! mask has a 0 bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, MaskMatrix};

/// A matrix read from CSV together with its observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedMatrix {
    pub matrix: DenseMatrix,
    pub mask: MaskMatrix,
}

pub fn read_matrix_csv<R: Read>(reader: R) -> Result<LoadedMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut bits = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0usize;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: line + 1,
            message: e.to_string(),
        })?;
        // A single empty field is a blank line.
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse {
                    line: line + 1,
                    message: format!("expected {c} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            if field.is_empty() || field.eq_ignore_ascii_case("nan") {
                data.push(0.0);
                bits.push(false);
                continue;
            }
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line: line + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line + 1,
                    message: format!("non-finite value: {field:?}"),
                });
            }
            data.push(value);
            bits.push(true);
        }
        rows += 1;
    }
    let cols = cols.ok_or(Error::Parse {
        line: 0,
        message: "empty matrix".into(),
    })?;
    Ok(LoadedMatrix {
        matrix: DenseMatrix::new(rows, cols, data)?,
        mask: MaskMatrix::new(rows, cols, bits)?,
    })
}

pub fn load_matrix_csv(path: &Path) -> Result<LoadedMatrix> {
    let file = std::fs::File::open(path)?;
    read_matrix_csv(std::io::BufReader::new(file))
}

/// Writes full-precision (round-trip) decimals.
pub fn write_matrix_csv<W: Write>(matrix: &DenseMatrix, writer: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    for i in 0..matrix.rows() {
        let line = matrix
            .row(i)
            .iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_matrix_csv(matrix: &DenseMatrix, path: &Path) -> Result<()> {
    write_matrix_csv(matrix, std::fs::File::create(path)?)
}
