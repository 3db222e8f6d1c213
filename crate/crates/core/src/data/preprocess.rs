use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::parse::{RawRecord, RawValue};
use super::schema::{FeatureKind, RecordSchema};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// What to do with a category missing from the vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UnseenPolicy {
    /// Encode the group as all zeros and count it.
    #[default]
    WarnZeros,
    Reject,
}

impl FromStr for UnseenPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warn-zeros" => Ok(Self::WarnZeros),
            "reject" => Ok(Self::Reject),
            _ => Err(Error::Config(format!("unknown unseen-category policy '{s}'"))),
        }
    }
}

impl fmt::Display for UnseenPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::WarnZeros => "warn-zeros",
            Self::Reject => "reject",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub schema_hash: String,
    pub seed: Option<u64>,
}

/// Feature rows with a parallel anomaly flag per row.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub anomaly: Vec<bool>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(features: Matrix, anomaly: Vec<bool>, provenance: Provenance) -> Result<Self> {
        if features.rows() != anomaly.len() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                actual: anomaly.len(),
            });
        }
        Ok(Self {
            features,
            anomaly,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.anomaly.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anomaly.is_empty()
    }

    pub fn anomaly_count(&self) -> usize {
        self.anomaly.iter().filter(|&&a| a).count()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            anomaly: indices.iter().map(|&i| self.anomaly[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Unseen-category counts per feature.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EncodeReport {
    pub unseen: BTreeMap<String, usize>,
}

impl EncodeReport {
    pub fn total_unseen(&self) -> usize {
        self.unseen.values().sum()
    }
}

/// One-hot categorical groups, continuous values left unscaled.
pub fn encode_values(
    schema: &RecordSchema,
    values: &[RawValue],
    policy: UnseenPolicy,
    report: &mut EncodeReport,
) -> Result<Vec<f64>> {
    if values.len() != schema.features.len() {
        return Err(Error::SchemaMismatch {
            expected: format!("{} features", schema.features.len()),
            actual: format!("{} features", values.len()),
        });
    }
    let mut out = Vec::with_capacity(schema.encoded_dim());
    for (spec, value) in schema.features.iter().zip(values) {
        match (&spec.kind, value) {
            (FeatureKind::Continuous, RawValue::Number(v)) => out.push(*v),
            (FeatureKind::Categorical(vocab), RawValue::Category(c)) => {
                let start = out.len();
                out.resize(start + vocab.len(), 0.0);
                match vocab.iter().position(|v| v == c) {
                    Some(i) => out[start + i] = 1.0,
                    None if policy == UnseenPolicy::WarnZeros => {
                        *report.unseen.entry(spec.name.clone()).or_default() += 1;
                    }
                    None => {
                        return Err(Error::UnknownCategory {
                            feature: spec.name.clone(),
                            value: c.clone(),
                        })
                    }
                }
            }
            _ => {
                return Err(Error::SchemaMismatch {
                    expected: format!("feature '{}' of its schema kind", spec.name),
                    actual: format!("{value:?}"),
                })
            }
        }
    }
    Ok(out)
}

/// Encodes records into an unscaled dataset.
pub fn encode(
    records: &[RawRecord],
    schema: &RecordSchema,
    policy: UnseenPolicy,
) -> Result<(LabeledDataset, EncodeReport)> {
    let mut report = EncodeReport::default();
    let dim = schema.encoded_dim();
    let mut data = Vec::with_capacity(records.len() * dim);
    for r in records {
        data.extend(encode_values(schema, &r.values, policy, &mut report)?);
    }
    let features = Matrix::new(records.len(), dim, data)?;
    let provenance = Provenance {
        schema_hash: schema.hash(),
        ..Provenance::default()
    };
    let ds = LabeledDataset::new(features, records.iter().map(|r| r.anomaly).collect(), provenance)?;
    Ok((ds, report))
}

/// Min-max statistics of the continuous columns plus the vocabularies.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessStats {
    pub schema: RecordSchema,
    /// Per continuous feature, in schema order.
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl PreprocessStats {
    fn continuous_columns(schema: &RecordSchema) -> Vec<usize> {
        schema
            .features
            .iter()
            .zip(schema.offsets())
            .filter(|(f, _)| f.kind == FeatureKind::Continuous)
            .map(|(_, o)| o)
            .collect()
    }

    /// Fits on unscaled encoded rows.
    pub fn fit(schema: &RecordSchema, encoded: &Matrix) -> Result<Self> {
        if encoded.rows() == 0 {
            return Err(Error::EmptyInput("cannot fit scaling on zero rows".into()));
        }
        if encoded.cols() != schema.encoded_dim() {
            return Err(Error::DimensionMismatch {
                expected: schema.encoded_dim(),
                actual: encoded.cols(),
            });
        }
        let cols = Self::continuous_columns(schema);
        let mut min = vec![f64::INFINITY; cols.len()];
        let mut max = vec![f64::NEG_INFINITY; cols.len()];
        for row in encoded.iter_rows() {
            for (j, &c) in cols.iter().enumerate() {
                min[j] = min[j].min(row[c]);
                max[j] = max[j].max(row[c]);
            }
        }
        Self::new(schema.clone(), min, max)
    }

    pub fn new(schema: RecordSchema, min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        let n = Self::continuous_columns(&schema).len();
        if min.len() != n || max.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: min.len().min(max.len()),
            });
        }
        if min
            .iter()
            .zip(&max)
            .any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::InvalidArgument("scaling bounds need finite min <= max".into()));
        }
        Ok(Self { schema, min, max })
    }

    pub fn encoded_dim(&self) -> usize {
        self.schema.encoded_dim()
    }

    /// Scales one unscaled encoded row in place; continuous values are
    /// clipped to `[0, 1]` and constant columns map to 0.
    pub fn scale_row(&self, row: &mut [f64]) -> Result<()> {
        if row.len() != self.encoded_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.encoded_dim(),
                actual: row.len(),
            });
        }
        for (j, c) in Self::continuous_columns(&self.schema).into_iter().enumerate() {
            let span = self.max[j] - self.min[j];
            row[c] = if span > 0.0 {
                ((row[c] - self.min[j]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        Ok(())
    }

    pub fn transform(&self, encoded: &Matrix) -> Result<Matrix> {
        let mut out = encoded.clone();
        for i in 0..out.rows() {
            self.scale_row(out.row_mut(i))?;
        }
        Ok(out)
    }

    pub fn transform_dataset(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        if ds.provenance.schema_hash != self.schema.hash() {
            return Err(Error::SchemaMismatch {
                expected: self.schema.hash(),
                actual: ds.provenance.schema_hash.clone(),
            });
        }
        Ok(LabeledDataset {
            features: self.transform(&ds.features)?,
            anomaly: ds.anomaly.clone(),
            provenance: ds.provenance.clone(),
        })
    }

    /// Encodes and scales one raw record.
    pub fn transform_values(&self, values: &[RawValue], policy: UnseenPolicy) -> Result<Vec<f64>> {
        let mut row = encode_values(&self.schema, values, policy, &mut EncodeReport::default())?;
        self.scale_row(&mut row)?;
        Ok(row)
    }

    pub fn transform_records(
        &self,
        records: &[RawRecord],
        policy: UnseenPolicy,
    ) -> Result<(LabeledDataset, EncodeReport)> {
        let (ds, report) = encode(records, &self.schema, policy)?;
        Ok((self.transform_dataset(&ds)?, report))
    }
}

/// Fits scaling on `records` and returns the scaled dataset.
pub fn fit_transform(
    records: &[RawRecord],
    schema: &RecordSchema,
    policy: UnseenPolicy,
) -> Result<(LabeledDataset, PreprocessStats, EncodeReport)> {
    let (ds, report) = encode(records, schema, policy)?;
    let stats = PreprocessStats::fit(schema, &ds.features)?;
    Ok((stats.transform_dataset(&ds)?, stats, report))
}
