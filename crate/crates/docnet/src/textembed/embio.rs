//! Embedding files.
//!
//! Two interchangeable formats. TSV: `id<TAB>f1<TAB>...<TAB>fd` with `.` as
//! the decimal separator. Binary: magic `EMB1`, little-endian u32 row and
//! column counts, row-major little-endian f32 values, then the ids joined by
//! newlines. Values are stored in f32 in both formats, so loading the same
//! data from either format produces bit-identical matrices.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Tsv,
    Binary,
}

impl std::str::FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "binary" | "bin" => Ok(Self::Binary),
            other => Err(Error::InvalidArgument(format!(
                "unknown embedding format `{other}` (expected tsv or binary)"
            ))),
        }
    }
}

/// Write an embedding. Values are narrowed to f32 first; f32 round-trips
/// through the TSV decimal form at nine significant digits.
pub fn write_embedding<S: Scalar>(
    embedding: &EmbeddingMatrix<S>,
    path: &Path,
    format: EmbeddingFormat,
) -> Result<()> {
    let values: DenseMatrix<f32> = embedding.data().cast();
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        EmbeddingFormat::Tsv => {
            for (i, id) in embedding.ids().iter().enumerate() {
                write!(out, "{id}")?;
                for &v in values.row(i) {
                    write!(out, "\t{v}")?;
                }
                writeln!(out)?;
            }
        }
        EmbeddingFormat::Binary => {
            out.write_all(MAGIC)?;
            out.write_all(&(values.rows() as u32).to_le_bytes())?;
            out.write_all(&(values.cols() as u32).to_le_bytes())?;
            for &v in values.data() {
                out.write_all(&v.to_le_bytes())?;
            }
            out.write_all(embedding.ids().join("\n").as_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Read an embedding file in either format (detected by the magic bytes),
/// keeping the file's row order.
pub fn read_embedding(path: &Path) -> Result<EmbeddingMatrix<f64>> {
    let mut file = File::open(path)?;
    let mut head = [0u8; 4];
    let is_binary = file.read_exact(&mut head).is_ok() && &head == MAGIC;
    if is_binary {
        read_binary(file)
    } else {
        read_tsv(BufReader::new(File::open(path)?))
    }
}

fn read_binary(mut file: File) -> Result<EmbeddingMatrix<f64>> {
    let mut u32buf = [0u8; 4];
    file.read_exact(&mut u32buf)?;
    let n = u32::from_le_bytes(u32buf) as usize;
    file.read_exact(&mut u32buf)?;
    let d = u32::from_le_bytes(u32buf) as usize;
    let mut data = Vec::with_capacity(n * d);
    let mut f32buf = [0u8; 4];
    for _ in 0..n * d {
        file.read_exact(&mut f32buf)?;
        data.push(f32::from_le_bytes(f32buf) as f64);
    }
    let mut id_block = String::new();
    file.read_to_string(&mut id_block)?;
    let ids: Vec<String> = if id_block.is_empty() {
        Vec::new()
    } else {
        id_block.split('\n').map(str::to_string).collect()
    };
    if ids.len() != n {
        return Err(Error::BadFormat(format!(
            "binary embedding declares {n} rows but carries {} ids",
            ids.len()
        )));
    }
    EmbeddingMatrix::new(ids, DenseMatrix::from_vec(n, d, data), EmbeddingKind::External)
}

fn read_tsv<R: BufRead>(reader: R) -> Result<EmbeddingMatrix<f64>> {
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                msg: "embedding row without an id".into(),
            });
        }
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f32>().map(|v| v as f64).map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("bad float `{f}`: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::DimensionMismatch {
                    line: lineno,
                    expected: d,
                    got: values.len(),
                })
            }
            _ => {}
        }
        ids.push(id);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::EmptyMatrix("embedding file has no rows".into()));
    }
    EmbeddingMatrix::new(ids, DenseMatrix::from_rows(&rows), EmbeddingKind::External)
}

/// Load an embedding and align its rows to `expected_ids` (the corpus index
/// order). Ids absent from the file are an error; extra ids are ignored.
pub fn load_external_embeddings(path: &Path, expected_ids: &[String]) -> Result<EmbeddingMatrix<f64>> {
    let raw = read_embedding(path)?;
    let index: std::collections::HashMap<&str, usize> = raw
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let missing: Vec<String> = expected_ids
        .iter()
        .filter(|id| !index.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing));
    }
    let mut data = DenseMatrix::zeros(expected_ids.len(), raw.dim());
    for (row, id) in expected_ids.iter().enumerate() {
        let src = raw.data().row(index[id.as_str()]);
        data.row_mut(row).copy_from_slice(src);
    }
    EmbeddingMatrix::new(expected_ids.to_vec(), data, EmbeddingKind::External)
}
