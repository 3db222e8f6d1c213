//! Flat `key = value` experiment configuration.
//!
//! Keys use dotted sections (`som.learning_rate`, `train.epochs`, ...).
//! Lines starting with `#` are comments. [`ExperimentConfig::to_text`]
//! writes every key, defaults included, so a report embedding it fully
//! determines the run.

use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::compression::{Activation, AutoencoderConfig, ReconstructionMode};
use crate::data::{UnseenPolicy, DEFAULT_MAX_BAD_RATIO};
use crate::error::{Error, Result};
use crate::estimation::EstimationConfig;
use crate::eval::ThresholdPolicy;
use crate::som::{Neighborhood, SomConfig};
use crate::trainer::{ModelConfig, TrainConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DataFormat {
    /// Output of the `preprocess` subcommand.
    #[default]
    Cache,
    /// Headerless NSL-KDD lines.
    NslKdd,
    /// CSV with a header row.
    Csv,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cache" => Ok(Self::Cache),
            "nsl-kdd" => Ok(Self::NslKdd),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::Config(format!(
                "unknown data format '{s}' (cache, nsl-kdd, csv)"
            ))),
        }
    }
}

impl std::fmt::Display for DataFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cache => "cache",
            Self::NslKdd => "nsl-kdd",
            Self::Csv => "csv",
        })
    }
}

/// Which model variants an experiment runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Arms {
    #[default]
    Both,
    SomOnly,
    NoSomOnly,
}

impl Arms {
    /// `with_som` flags in table column order.
    pub fn flags(self) -> Vec<bool> {
        match self {
            Self::Both => vec![false, true],
            Self::SomOnly => vec![true],
            Self::NoSomOnly => vec![false],
        }
    }
}

impl FromStr for Arms {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Self::Both),
            "som" => Ok(Self::SomOnly),
            "no-som" => Ok(Self::NoSomOnly),
            _ => Err(Error::Config(format!("unknown ablation '{s}' (both, som, no-som)"))),
        }
    }
}

impl std::fmt::Display for Arms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Both => "both",
            Self::SomOnly => "som",
            Self::NoSomOnly => "no-som",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    /// Training on inliers only.
    Ideal,
    /// Training with anomalies mixed in at each ratio.
    Mixed(Vec<f64>),
}

impl Scenario {
    /// Contamination ratios, `None` for the ideal scenario.
    pub fn ratios(&self) -> Vec<Option<f64>> {
        match self {
            Self::Ideal => vec![None],
            Self::Mixed(r) => r.iter().copied().map(Some).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub data_path: Option<PathBuf>,
    pub data_format: DataFormat,
    /// `None` is the built-in NSL-KDD schema.
    pub schema_path: Option<PathBuf>,
    /// Overrides the schema's label convention when set.
    pub inlier_labels: Option<Vec<String>>,
    pub subsample: Option<usize>,
    pub subsample_seed: u64,
    pub unseen: UnseenPolicy,
    pub max_bad_ratio: f64,
    pub scenario: Scenario,
    pub arms: Arms,
    pub som: SomConfig,
    pub ae_hidden: Vec<usize>,
    pub ae_code: usize,
    pub estimation: EstimationConfig,
    pub reconstruction: ReconstructionMode,
    pub train: TrainConfig,
    /// `None` thresholds at each test set's anomaly ratio.
    pub threshold: Option<ThresholdPolicy>,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub sweep_learning_rates: Vec<f64>,
    pub sweep_neighborhoods: Vec<Neighborhood>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data_path: None,
            data_format: DataFormat::Cache,
            schema_path: None,
            inlier_labels: None,
            subsample: None,
            subsample_seed: 0,
            unseen: UnseenPolicy::WarnZeros,
            max_bad_ratio: DEFAULT_MAX_BAD_RATIO,
            scenario: Scenario::Ideal,
            arms: Arms::Both,
            som: SomConfig::default(),
            ae_hidden: vec![60, 30, 10],
            ae_code: 1,
            estimation: EstimationConfig::default(),
            reconstruction: ReconstructionMode::Both,
            train: TrainConfig::default(),
            threshold: None,
            seeds: (0..10).collect(),
            jobs: 1,
            sweep_learning_rates: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            sweep_neighborhoods: vec![Neighborhood::Bubble, Neighborhood::Gaussian],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn list<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "none" | "auto" | "" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

/// `a..b` (half-open) or a comma list.
fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = value.split_once("..") {
        let a: u64 = parse("seeds", a.trim())?;
        let b: u64 = parse("seeds", b.trim())?;
        return Ok((a..b).collect());
    }
    parse_list("seeds", value)
}

impl ExperimentConfig {
    /// Every recognized key, in the order [`to_text`](Self::to_text) writes them.
    pub const KEYS: [&'static str; 35] = [
        "data.path",
        "data.format",
        "data.schema",
        "data.inlier_labels",
        "data.subsample",
        "data.subsample_seed",
        "data.unseen",
        "data.max_bad_ratio",
        "scenario",
        "scenario.ratios",
        "ablation",
        "som.grid_width",
        "som.grid_height",
        "som.learning_rate",
        "som.neighborhood",
        "som.initial_radius",
        "som.iterations",
        "ae.hidden",
        "ae.code",
        "est.hidden",
        "est.components",
        "est.dropout",
        "recon.mode",
        "train.learning_rate",
        "train.batch_size",
        "train.lambda1",
        "train.lambda2",
        "train.epochs",
        "train.eps",
        "train.optimizer",
        "threshold",
        "seeds",
        "jobs",
        "sweep.learning_rates",
        "sweep.neighborhoods",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "data.path" => self.data_path = optional::<PathBuf>(key, value)?,
            "data.format" => self.data_format = parse(key, value)?,
            "data.schema" => {
                self.schema_path = match value {
                    "nsl-kdd" => None,
                    p => Some(PathBuf::from(p)),
                }
            }
            "data.inlier_labels" => {
                self.inlier_labels = match value {
                    "none" | "" => None,
                    v => Some(v.split(',').map(|s| s.trim().to_string()).collect()),
                }
            }
            "data.subsample" => self.subsample = optional(key, value)?,
            "data.subsample_seed" => self.subsample_seed = parse(key, value)?,
            "data.unseen" => self.unseen = parse(key, value)?,
            "data.max_bad_ratio" => self.max_bad_ratio = parse(key, value)?,
            "scenario" => {
                self.scenario = match value {
                    "ideal" => Scenario::Ideal,
                    "mixed" => match &self.scenario {
                        Scenario::Mixed(r) => Scenario::Mixed(r.clone()),
                        Scenario::Ideal => Scenario::Mixed(vec![0.01, 0.05, 0.10]),
                    },
                    _ => return Err(Error::Config(format!("unknown scenario '{value}' (ideal, mixed)"))),
                }
            }
            "scenario.ratios" => {
                let r = parse_list(key, value)?;
                if let Scenario::Mixed(old) = &mut self.scenario {
                    *old = r;
                } else if !r.is_empty() {
                    self.scenario = Scenario::Mixed(r);
                }
            }
            "ablation" => self.arms = parse(key, value)?,
            "som.grid_width" => self.som.grid_width = parse(key, value)?,
            "som.grid_height" => self.som.grid_height = parse(key, value)?,
            "som.learning_rate" => self.som.learning_rate = parse(key, value)?,
            "som.neighborhood" => self.som.neighborhood = parse(key, value)?,
            "som.initial_radius" => self.som.initial_radius = parse(key, value)?,
            "som.iterations" => self.som.iterations = optional(key, value)?,
            "ae.hidden" => self.ae_hidden = parse_list(key, value)?,
            "ae.code" => self.ae_code = parse(key, value)?,
            "est.hidden" => self.estimation.hidden = parse_list(key, value)?,
            "est.components" => self.estimation.components = parse(key, value)?,
            "est.dropout" => self.estimation.dropout = parse(key, value)?,
            "recon.mode" => self.reconstruction = parse(key, value)?,
            "train.learning_rate" => self.train.learning_rate = parse(key, value)?,
            "train.batch_size" => self.train.batch_size = parse(key, value)?,
            "train.lambda1" => self.train.lambda1 = parse(key, value)?,
            "train.lambda2" => self.train.lambda2 = parse(key, value)?,
            "train.epochs" => self.train.epochs = parse(key, value)?,
            "train.eps" => self.train.eps = parse(key, value)?,
            "train.optimizer" => self.train.optimizer = parse(key, value)?,
            "threshold" => {
                self.threshold = match value {
                    "test-anomaly-ratio" | "auto" => None,
                    v => Some(v.parse()?),
                }
            }
            "seeds" => self.seeds = parse_seeds(value)?,
            "jobs" => self.jobs = parse(key, value)?,
            "sweep.learning_rates" => self.sweep_learning_rates = parse_list(key, value)?,
            "sweep.neighborhoods" => self.sweep_neighborhoods = parse_list(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        Some(match key {
            "data.path" => opt(self.data_path.as_ref().map(|p| p.display().to_string())),
            "data.format" => self.data_format.to_string(),
            "data.schema" => self
                .schema_path
                .as_ref()
                .map_or_else(|| "nsl-kdd".into(), |p| p.display().to_string()),
            "data.inlier_labels" => opt(self.inlier_labels.as_ref().map(|l| l.join(","))),
            "data.subsample" => opt(self.subsample.map(|n| n.to_string())),
            "data.subsample_seed" => self.subsample_seed.to_string(),
            "data.unseen" => self.unseen.to_string(),
            "data.max_bad_ratio" => self.max_bad_ratio.to_string(),
            "scenario" => match self.scenario {
                Scenario::Ideal => "ideal".into(),
                Scenario::Mixed(_) => "mixed".into(),
            },
            "scenario.ratios" => match &self.scenario {
                Scenario::Ideal => String::new(),
                Scenario::Mixed(r) => list(r),
            },
            "ablation" => self.arms.to_string(),
            "som.grid_width" => self.som.grid_width.to_string(),
            "som.grid_height" => self.som.grid_height.to_string(),
            "som.learning_rate" => self.som.learning_rate.to_string(),
            "som.neighborhood" => self.som.neighborhood.to_string(),
            "som.initial_radius" => self.som.initial_radius.to_string(),
            "som.iterations" => self.som.iterations.map_or_else(|| "auto".into(), |n| n.to_string()),
            "ae.hidden" => list(&self.ae_hidden),
            "ae.code" => self.ae_code.to_string(),
            "est.hidden" => list(&self.estimation.hidden),
            "est.components" => self.estimation.components.to_string(),
            "est.dropout" => self.estimation.dropout.to_string(),
            "recon.mode" => self.reconstruction.to_string(),
            "train.learning_rate" => self.train.learning_rate.to_string(),
            "train.batch_size" => self.train.batch_size.to_string(),
            "train.lambda1" => self.train.lambda1.to_string(),
            "train.lambda2" => self.train.lambda2.to_string(),
            "train.epochs" => self.train.epochs.to_string(),
            "train.eps" => self.train.eps.to_string(),
            "train.optimizer" => self.train.optimizer.to_string(),
            "threshold" => self
                .threshold
                .map_or_else(|| "test-anomaly-ratio".into(), |t| t.to_string()),
            "seeds" => list(&self.seeds),
            "jobs" => self.jobs.to_string(),
            "sweep.learning_rates" => list(&self.sweep_learning_rates),
            "sweep.neighborhoods" => list(&self.sweep_neighborhoods),
            _ => return None,
        })
    }

    /// Every key with its resolved value.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        Self::KEYS
            .iter()
            .map(|&k| (k, self.get(k).expect("known key")))
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Hex SHA-256 of [`to_text`](Self::to_text).
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.som.validate()?;
        self.estimation.validate()?;
        self.train.validate()?;
        if let Some(t) = self.threshold {
            t.validate()?;
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seed list has duplicates".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.ae_code == 0 || self.ae_hidden.contains(&0) {
            return Err(Error::Config("autoencoder widths must be positive".into()));
        }
        if let Scenario::Mixed(r) = &self.scenario {
            if r.is_empty() {
                return Err(Error::Config("mixed scenario needs at least one ratio".into()));
            }
            if let Some(bad) = r.iter().find(|x| !(0.0..0.5).contains(*x)) {
                return Err(Error::Config(format!("contamination ratio {bad} outside [0, 0.5)")));
            }
        }
        if !(0.0..=1.0).contains(&self.max_bad_ratio) {
            return Err(Error::Config("data.max_bad_ratio must be in [0, 1]".into()));
        }
        if self.subsample == Some(0) {
            return Err(Error::Config("data.subsample must be positive".into()));
        }
        Ok(())
    }

    pub fn autoencoder(&self, input_dim: usize) -> AutoencoderConfig {
        let mut layer_sizes = vec![input_dim];
        layer_sizes.extend(&self.ae_hidden);
        layer_sizes.push(self.ae_code);
        AutoencoderConfig {
            layer_sizes,
            activation: Activation::Tanh,
            seed: 0,
        }
    }

    pub fn model(&self, input_dim: usize, use_som: bool) -> ModelConfig {
        ModelConfig {
            use_som,
            som: self.som.clone(),
            autoencoder: self.autoencoder(input_dim),
            estimation: self.estimation.clone(),
            reconstruction: self.reconstruction,
        }
    }

    /// Training settings for one seed.
    pub fn train_for(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let c = ExperimentConfig::default();
        let text = c.to_text();
        assert_eq!(text.lines().count(), ExperimentConfig::KEYS.len());
        assert_eq!(ExperimentConfig::from_text(&text).unwrap(), c);
        assert!(text.contains("train.learning_rate = 0.0001\n"));
        assert!(text.contains("seeds = 0,1,2,3,4,5,6,7,8,9\n"));
    }

    #[test]
    fn every_key_is_settable_and_gettable() {
        let mut c = ExperimentConfig::default();
        for k in ExperimentConfig::KEYS {
            let v = c.get(k).unwrap();
            c.set(k, &v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn mixed_scenario_and_overrides() {
        let c = ExperimentConfig::from_text(
            "# comment\nscenario = mixed\nscenario.ratios = 0.01, 0.05\nseeds = 3..6\nthreshold = fixed:2.5\nsom.iterations = 100\ndata.path = x.txt\ndata.inlier_labels = normal\n",
        )
        .unwrap();
        assert_eq!(c.scenario, Scenario::Mixed(vec![0.01, 0.05]));
        assert_eq!(c.seeds, vec![3, 4, 5]);
        assert_eq!(c.threshold, Some(ThresholdPolicy::Fixed(2.5)));
        assert_eq!(c.som.iterations, Some(100));
        assert_eq!(c.inlier_labels, Some(vec!["normal".to_string()]));
        let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        c.validate().unwrap();
        let default_mixed = ExperimentConfig::from_text("scenario = mixed").unwrap();
        assert_eq!(default_mixed.scenario, Scenario::Mixed(vec![0.01, 0.05, 0.10]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_text("nope = 1").is_err());
        assert!(ExperimentConfig::from_text("train.epochs = many").is_err());
        assert!(ExperimentConfig::from_text("just text").is_err());
        let dup = ExperimentConfig::from_text("seeds = 1,1").unwrap();
        assert!(dup.validate().is_err());
        let bad_ratio = ExperimentConfig::from_text("scenario.ratios = 0.6").unwrap();
        assert!(bad_ratio.validate().is_err());
    }

    #[test]
    fn model_config_wiring() {
        let c = ExperimentConfig::default();
        let m = c.model(122, true);
        assert_eq!(m.autoencoder.layer_sizes, vec![122, 60, 30, 10, 1]);
        assert_eq!(m.layout().dim(), 5);
        assert_eq!(c.model(122, false).layout().dim(), 3);
        assert_eq!(c.train_for(7).seed, 7);
    }

    proptest::proptest! {
        #[test]
        fn text_round_trip_preserves_config(
            lr in 1e-6f64..1.0,
            lambda1 in 0.0f64..1.0,
            ratios in proptest::collection::vec(0.001f64..0.5, 1..4),
            seeds in proptest::collection::vec(0u64..1_000_000, 1..12),
            jobs in 1usize..16,
            som_lr in 0.01f64..1.0,
        ) {
            let mut c = ExperimentConfig::default();
            c.train.learning_rate = lr;
            c.train.lambda1 = lambda1;
            c.scenario = Scenario::Mixed(ratios);
            c.seeds = seeds;
            c.jobs = jobs;
            c.som.learning_rate = som_lr;
            let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
            proptest::prop_assert_eq!(&back, &c);
            proptest::prop_assert_eq!(back.hash(), c.hash());
        }
    }
}
