//! Energy thresholding, confusion-matrix metrics, multi-run aggregation and
//! plot-ready summaries.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How energies become anomaly flags.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdPolicy {
    /// Flag the `ceil(N · ratio)` highest energies.
    Percentile(f64),
    /// Flag energies strictly above the value.
    Fixed(f64),
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Percentile(r) if !(r > 0.0 && r < 1.0) => {
                Err(Error::Config(format!("percentile ratio must be in (0, 1), got {r}")))
            }
            Self::Fixed(v) if !v.is_finite() => Err(Error::Config("fixed threshold must be finite".into())),
            _ => Ok(()),
        }
    }
}

impl FromStr for ThresholdPolicy {
    type Err = Error;

    /// `percentile:<ratio>` or `fixed:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "threshold must be 'percentile:<ratio>' or 'fixed:<value>', got '{s}'"
            ))
        };
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        let policy = match kind.trim() {
            "percentile" => Self::Percentile(value),
            "fixed" => Self::Fixed(value),
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Percentile(r) => write!(f, "percentile:{r}"),
            Self::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

/// Number of samples a percentile policy flags. A tolerance of 1e-9 keeps
/// representation noise in `N · ratio` from adding a sample.
pub fn flagged_count(n: usize, ratio: f64) -> usize {
    ((n as f64 * ratio - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Anomaly flags for `energies`. Under a percentile policy ties at the cut
/// go to the earlier index.
pub fn threshold_energies(energies: &[f64], policy: ThresholdPolicy) -> Vec<bool> {
    match policy {
        ThresholdPolicy::Fixed(v) => energies.iter().map(|&e| e > v).collect(),
        ThresholdPolicy::Percentile(ratio) => {
            let k = flagged_count(energies.len(), ratio);
            let mut order: Vec<usize> = (0..energies.len()).collect();
            order.sort_by(|&a, &b| energies[b].total_cmp(&energies[a]));
            let mut flags = vec![false; energies.len()];
            for &i in &order[..k] {
                flags[i] = true;
            }
            flags
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Metrics whose denominator was zero are reported as 0 and flagged here.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UndefinedMetrics {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub undefined: UndefinedMetrics,
}

impl Metrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::F1];

    /// Row label used in the result tables.
    pub fn label(self) -> &'static str {
        match self {
            Self::Accuracy => "Accuracy",
            Self::Precision => "Precision",
            Self::Recall => "Recall",
            Self::F1 => "F1 Score",
        }
    }
}

fn ratio_or_zero(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Anomaly is the positive class.
pub fn compute_metrics(predicted: &[bool], actual: &[bool]) -> Result<Metrics> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput("no predictions to score".into()));
    }
    let mut c = Confusion::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let accuracy = (c.tp + c.tn) as f64 / c.total() as f64;
    let (precision, p_undef) = ratio_or_zero(c.tp, c.tp + c.fp);
    let (recall, r_undef) = ratio_or_zero(c.tp, c.tp + c.fn_);
    let (f1, f_undef) = if precision + recall > 0.0 {
        (2.0 * precision * recall / (precision + recall), false)
    } else {
        (0.0, true)
    };
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f1,
        confusion: c,
        undefined: UndefinedMetrics {
            precision: p_undef,
            recall: r_undef,
            f1: f_undef,
        },
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Summary {
    pub avg: f64,
    /// Population standard deviation.
    pub stdev: f64,
}

/// Mean and population standard deviation. Values are summed in sorted
/// order so the result does not depend on run order.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let avg = v.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - avg) * (x - avg)).collect();
    dev.sort_by(f64::total_cmp);
    let stdev = (dev.iter().sum::<f64>() / n).sqrt();
    Some(Summary { avg, stdev })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateMetrics {
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    pub runs: usize,
}

impl AggregateMetrics {
    pub fn get(&self, m: Metric) -> Summary {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
        }
    }
}

pub fn aggregate(runs: &[Metrics]) -> Option<AggregateMetrics> {
    let col = |m: Metric| summarize(&runs.iter().map(|r| r.get(m)).collect::<Vec<_>>());
    Some(AggregateMetrics {
        accuracy: col(Metric::Accuracy)?,
        precision: col(Metric::Precision)?,
        recall: col(Metric::Recall)?,
        f1: col(Metric::F1)?,
        runs: runs.len(),
    })
}

/// Inclusive linear-interpolation quantile of sorted values, `p ∈ [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn five_number(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(FiveNumber {
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    })
}
