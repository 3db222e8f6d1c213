//! Plain-text cache of an encoded (unscaled) dataset.
//!
//! ```text
//! somdagmm-cache 1
//! schema <sha256 of the schema text>
//! source <free text>
//! dim <d>
//! rows <n>
//! <v_1> ... <v_d> <0|1>
//! ```
//!
//! The last column of each row is 1 for an anomaly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::preprocess::{LabeledDataset, Provenance};
use super::schema::RecordSchema;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

const MAGIC: &str = "somdagmm-cache 1";

pub fn write_cache(path: &Path, ds: &LabeledDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "schema {}", ds.provenance.schema_hash)?;
    writeln!(w, "source {}", ds.provenance.source)?;
    writeln!(w, "dim {}", ds.features.cols())?;
    writeln!(w, "rows {}", ds.len())?;
    for (row, &anomaly) in ds.features.iter_rows().zip(&ds.anomaly) {
        for v in row {
            write!(w, "{v} ")?;
        }
        writeln!(w, "{}", u8::from(anomaly))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cache, checking it was produced under `schema`.
pub fn read_cache(path: &Path, schema: &RecordSchema) -> Result<LabeledDataset> {
    let fail = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = BufReader::new(File::open(path)?).lines();
    let mut next =
        |what: &str| -> Result<String> { lines.next().transpose()?.ok_or_else(|| fail(format!("missing {what}"))) };
    if next("header")?.trim() != MAGIC {
        return Err(fail(format!("expected '{MAGIC}' header")));
    }
    let field = |line: String, key: &str| -> Result<String> {
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' ').or(Some(r).filter(|r| r.is_empty())))
            .map(str::to_string)
            .ok_or_else(|| fail(format!("expected '{key}' line")))
    };
    let hash = field(next("schema")?, "schema")?;
    let source = field(next("source")?, "source")?;
    let dim: usize = field(next("dim")?, "dim")?
        .trim()
        .parse()
        .map_err(|_| fail("bad dim".into()))?;
    let rows: usize = field(next("rows")?, "rows")?
        .trim()
        .parse()
        .map_err(|_| fail("bad row count".into()))?;
    if hash != schema.hash() {
        return Err(Error::SchemaMismatch {
            expected: schema.hash(),
            actual: hash,
        });
    }
    if dim != schema.encoded_dim() {
        return Err(fail(format!(
            "dim {dim} does not match schema width {}",
            schema.encoded_dim()
        )));
    }
    let mut data = Vec::with_capacity(rows * dim);
    let mut anomaly = Vec::with_capacity(rows);
    for r in 0..rows {
        let line = next("row")?;
        let mut fields = line.split_whitespace();
        for _ in 0..dim {
            let v: f64 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| fail(format!("row {} is malformed", r + 1)))?;
            data.push(v);
        }
        anomaly.push(match fields.next() {
            Some("0") => false,
            Some("1") => true,
            _ => return Err(fail(format!("row {} has no 0/1 label", r + 1))),
        });
        if fields.next().is_some() {
            return Err(fail(format!("row {} has extra fields", r + 1)));
        }
    }
    let provenance = Provenance {
        source,
        schema_hash: hash,
        seed: None,
    };
    LabeledDataset::new(Matrix::new(rows, dim, data)?, anomaly, provenance)
}
