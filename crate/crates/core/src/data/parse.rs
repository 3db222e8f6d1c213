use std::fs::File;
use std::io::Read;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::schema::{FeatureKind, RecordSchema};
use crate::error::{Error, Result};

/// Default tolerated fraction of malformed lines.
pub const DEFAULT_MAX_BAD_RATIO: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub enum RawValue {
    Number(f64),
    Category(String),
}

/// One parsed line, values in schema feature order.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub values: Vec<RawValue>,
    pub label: String,
    pub anomaly: bool,
    pub line: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineError {
    pub line: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParseReport {
    pub lines: usize,
    pub records: usize,
    pub inliers: usize,
    pub anomalies: usize,
    pub bad_lines: Vec<LineError>,
}

impl ParseReport {
    pub fn bad_ratio(&self) -> f64 {
        if self.lines == 0 {
            0.0
        } else {
            self.bad_lines.len() as f64 / self.lines as f64
        }
    }

    pub fn to_json(&self) -> String {
        let bad: Vec<_> = self
            .bad_lines
            .iter()
            .map(|b| serde_json::json!({ "line": b.line, "message": b.message }))
            .collect();
        let value = serde_json::json!({
            "lines": self.lines,
            "records": self.records,
            "inliers": self.inliers,
            "anomalies": self.anomalies,
            "bad_line_count": self.bad_lines.len(),
            "bad_lines": bad,
        });
        serde_json::to_string_pretty(&value).expect("plain json")
    }
}

fn parse_value(schema_kind: &FeatureKind, name: &str, field: &str) -> std::result::Result<RawValue, String> {
    match schema_kind {
        FeatureKind::Continuous => match field.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(RawValue::Number(v)),
            _ => Err(format!("feature '{name}': '{field}' is not a finite number")),
        },
        FeatureKind::Categorical(_) => Ok(RawValue::Category(field.to_string())),
    }
}

fn build_record(
    schema: &RecordSchema,
    fields: impl Iterator<Item = String>,
    label: &str,
    line: u64,
) -> std::result::Result<RawRecord, String> {
    let values = schema
        .features
        .iter()
        .zip(fields)
        .map(|(f, field)| parse_value(&f.kind, &f.name, &field))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if label.is_empty() {
        return Err("empty label".into());
    }
    Ok(RawRecord {
        values,
        anomaly: schema.convention.is_anomaly(label),
        label: label.to_string(),
        line,
    })
}

fn finish(
    records: Vec<RawRecord>,
    mut report: ParseReport,
    max_bad_ratio: f64,
) -> Result<(Vec<RawRecord>, ParseReport)> {
    report.records = records.len();
    report.anomalies = records.iter().filter(|r| r.anomaly).count();
    report.inliers = report.records - report.anomalies;
    if report.bad_ratio() > max_bad_ratio {
        let first = &report.bad_lines[0];
        return Err(Error::Parse(format!(
            "{} of {} lines malformed (limit {:.2}%); first at line {}: {}",
            report.bad_lines.len(),
            report.lines,
            max_bad_ratio * 100.0,
            first.line,
            first.message
        )));
    }
    Ok((records, report))
}

fn line_of(rec: &StringRecord, fallback: u64) -> u64 {
    rec.position().map_or(fallback, |p| p.line())
}

/// Headerless NSL-KDD lines: features in schema order, the label, then up
/// to `optional_trailing` ignored fields.
pub fn parse_nslkdd_reader<R: Read>(
    reader: R,
    schema: &RecordSchema,
    max_bad_ratio: f64,
) -> Result<(Vec<RawRecord>, ParseReport)> {
    schema.validate()?;
    let mut rdr = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(reader);
    let n = schema.features.len();
    let mut report = ParseReport::default();
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        report.lines += 1;
        let fallback = i as u64 + 1;
        let (line, outcome) = match rec {
            Err(e) => (fallback, Err(e.to_string())),
            Ok(rec) => {
                let line = line_of(&rec, fallback);
                let arity = rec.len();
                if arity < n + 1 || arity > n + 1 + schema.optional_trailing {
                    (line, Err(format!("expected {} fields, found {arity}", n + 1)))
                } else {
                    let fields = rec.iter().take(n).map(str::to_string);
                    (line, build_record(schema, fields, &rec[n], line))
                }
            }
        };
        match outcome {
            Ok(r) => records.push(r),
            Err(message) => report.bad_lines.push(LineError { line, message }),
        }
    }
    finish(records, report, max_bad_ratio)
}

pub fn parse_nslkdd(path: &Path, schema: &RecordSchema, max_bad_ratio: f64) -> Result<(Vec<RawRecord>, ParseReport)> {
    parse_nslkdd_reader(File::open(path)?, schema, max_bad_ratio)
}

/// CSV with a header row; columns are matched to the schema by name and
/// unlisted columns are ignored.
pub fn parse_csv_reader<R: Read>(
    reader: R,
    schema: &RecordSchema,
    max_bad_ratio: f64,
) -> Result<(Vec<RawRecord>, ParseReport)> {
    schema.validate()?;
    let mut rdr = ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaMismatch {
                expected: format!("column '{name}'"),
                actual: "no such header".into(),
            })
    };
    let columns = schema
        .features
        .iter()
        .map(|f| find(&f.name))
        .collect::<Result<Vec<_>>>()?;
    let label_col = find(&schema.label)?;
    let mut report = ParseReport::default();
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        report.lines += 1;
        let fallback = i as u64 + 2;
        let (line, outcome) = match rec {
            Err(e) => (fallback, Err(e.to_string())),
            Ok(rec) => {
                let line = line_of(&rec, fallback);
                if rec.len() != header.len() {
                    (
                        line,
                        Err(format!("expected {} fields, found {}", header.len(), rec.len())),
                    )
                } else {
                    let fields = columns.iter().map(|&c| rec[c].to_string());
                    (line, build_record(schema, fields, &rec[label_col], line))
                }
            }
        };
        match outcome {
            Ok(r) => records.push(r),
            Err(message) => report.bad_lines.push(LineError { line, message }),
        }
    }
    finish(records, report, max_bad_ratio)
}

pub fn parse_csv(path: &Path, schema: &RecordSchema, max_bad_ratio: f64) -> Result<(Vec<RawRecord>, ParseReport)> {
    parse_csv_reader(File::open(path)?, schema, max_bad_ratio)
}
