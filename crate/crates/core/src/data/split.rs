use rand::seq::SliceRandom;

use super::preprocess::LabeledDataset;
use crate::error::{Error, Result};
use crate::numeric::Matrix;
use crate::rng::{self, Stream};

/// Row indices of a train/test partition plus any anomalies held aside for
/// contaminating the training set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub pool: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub pool: LabeledDataset,
}

impl SplitIndices {
    pub fn apply(&self, ds: &LabeledDataset) -> Split {
        Split {
            train: ds.select(&self.train),
            test: ds.select(&self.test),
            pool: ds.select(&self.pool),
        }
    }
}

fn class_indices(ds: &LabeledDataset) -> (Vec<usize>, Vec<usize>) {
    (0..ds.len()).partition(|&i| !ds.anomaly[i])
}

/// Half of the inliers (seeded) train; the other half and every anomaly test.
pub fn split_ideal_indices(ds: &LabeledDataset, seed: u64) -> Result<SplitIndices> {
    split_with_pool_indices(ds, 0, seed)
}

pub fn split_ideal(ds: &LabeledDataset, seed: u64) -> Result<Split> {
    Ok(split_ideal_indices(ds, seed)?.apply(ds))
}

/// As [`split_ideal_indices`], but `pool_size` seeded anomalies are held out
/// of the test set for later contamination.
pub fn split_with_pool_indices(ds: &LabeledDataset, pool_size: usize, seed: u64) -> Result<SplitIndices> {
    let (mut inliers, mut anomalies) = class_indices(ds);
    if inliers.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 inliers to split, found {}",
            inliers.len()
        )));
    }
    if anomalies.is_empty() {
        return Err(Error::InsufficientData("dataset has no anomalies".into()));
    }
    if pool_size >= anomalies.len() {
        return Err(Error::InsufficientData(format!(
            "holding out {pool_size} anomalies leaves none of {} for testing",
            anomalies.len()
        )));
    }
    let mut rng = rng::stream(seed, Stream::Split);
    inliers.shuffle(&mut rng);
    let half = inliers.len() / 2;
    let mut train = inliers[..half].to_vec();
    let mut test = inliers[half..].to_vec();
    let mut pool = Vec::new();
    if pool_size > 0 {
        anomalies.shuffle(&mut rng);
        pool = anomalies.drain(..pool_size).collect();
        pool.sort_unstable();
    }
    test.extend(anomalies);
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test, pool })
}

pub fn split_with_pool(ds: &LabeledDataset, pool_size: usize, seed: u64) -> Result<Split> {
    Ok(split_with_pool_indices(ds, pool_size, seed)?.apply(ds))
}

/// `n` rows drawn without replacement, kept in their original order. Returns
/// the whole dataset when `n` is not smaller than it.
pub fn subsample(ds: &LabeledDataset, n: usize, seed: u64) -> LabeledDataset {
    if n >= ds.len() {
        return ds.clone();
    }
    let mut rng = rng::stream(seed, Stream::Subsample);
    let mut picked = rand::seq::index::sample(&mut rng, ds.len(), n).into_vec();
    picked.sort_unstable();
    ds.select(&picked)
}

/// Number of anomalies `a` to add to `inliers` rows so that
/// `a == round(ratio · (inliers + a))`.
pub fn contamination_count(inliers: usize, ratio: f64) -> Result<usize> {
    if !(0.0..0.5).contains(&ratio) {
        return Err(Error::InvalidArgument(format!(
            "contamination ratio {ratio} outside [0, 0.5)"
        )));
    }
    let estimate = (ratio * inliers as f64 / (1.0 - ratio)).round() as usize;
    (estimate.saturating_sub(2)..=estimate + 2)
        .find(|&a| a == (ratio * (inliers + a) as f64).round() as usize)
        .ok_or_else(|| Error::InvalidArgument(format!("no exact contamination count for ratio {ratio}")))
}

/// Training rows with seeded anomalies mixed in. The per-row labels are
/// kept only for auditing; training consumes [`ContaminatedSet::features`].
#[derive(Clone, Debug, PartialEq)]
pub struct ContaminatedSet {
    features: Matrix,
    audit: Vec<bool>,
}

impl ContaminatedSet {
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn into_features(self) -> Matrix {
        self.features
    }

    pub fn len(&self) -> usize {
        self.audit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.audit.is_empty()
    }

    pub fn audit_anomaly_count(&self) -> usize {
        self.audit.iter().filter(|&&a| a).count()
    }
}

/// Appends seeded draws (without replacement) from `pool` so anomalies make
/// up `round(ratio × final size)` of the result.
pub fn mix_contamination(train: &Matrix, pool: &Matrix, ratio: f64, seed: u64) -> Result<ContaminatedSet> {
    let a = contamination_count(train.rows(), ratio)?;
    if a == 0 {
        return Ok(ContaminatedSet {
            features: train.clone(),
            audit: vec![false; train.rows()],
        });
    }
    if pool.cols() != train.cols() {
        return Err(Error::DimensionMismatch {
            expected: train.cols(),
            actual: pool.cols(),
        });
    }
    if pool.rows() < a {
        return Err(Error::InsufficientData(format!(
            "contamination needs {a} anomalies, pool has {}",
            pool.rows()
        )));
    }
    let mut rng = rng::stream(seed, Stream::Contamination);
    let picked: Vec<usize> = rand::seq::index::sample(&mut rng, pool.rows(), a).into_vec();
    let features = Matrix::vconcat(&[train, &pool.select_rows(&picked)])?;
    let mut audit = vec![false; train.rows()];
    audit.resize(train.rows() + a, true);
    Ok(ContaminatedSet { features, audit })
}
