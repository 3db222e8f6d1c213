//! Two-phase training: the SOM is fit first and frozen, then the compression
//! and estimation networks are optimized jointly on minibatches.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::compression::{
    reconstruction_feature_batch, AutoencoderConfig, CompressionNet, ReconstructionFeatureOp, ReconstructionMode,
};
use crate::data::{PreprocessStats, RawValue, UnseenPolicy};
use crate::error::{Error, Result};
use crate::estimation::{
    dropout_masks, energy_batch, estimate_gmm, EstimationConfig, EstimationNet, GmmParams, GmmVars, LatentLayout,
};
use crate::numeric::{Matrix, Tape, Var};
use crate::rng::{self, Stream};
use crate::som::{train_som, SomConfig, SomModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(Self::Adam),
            "sgd" => Ok(Self::Sgd),
            _ => Err(Error::Config(format!("unknown optimizer '{s}'"))),
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Adam => "adam",
            Self::Sgd => "sgd",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub epochs: usize,
    pub seed: u64,
    pub eps: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 1024,
            lambda1: 0.1,
            lambda2: 0.005,
            epochs: 200,
            seed: 0,
            eps: 1e-6,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Config("lambda1 and lambda2 must be non-negative".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Config("eps must be non-negative".into()));
        }
        Ok(())
    }
}

/// Architecture of every sub-model. Seeds inside the sub-configs are
/// replaced by the run seed at training time.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub use_som: bool,
    pub som: SomConfig,
    pub autoencoder: AutoencoderConfig,
    pub estimation: EstimationConfig,
    pub reconstruction: ReconstructionMode,
}

impl ModelConfig {
    pub fn for_input(dim: usize) -> Self {
        Self {
            use_som: true,
            som: SomConfig::default(),
            autoencoder: AutoencoderConfig::for_input(dim),
            estimation: EstimationConfig::default(),
            reconstruction: ReconstructionMode::Both,
        }
    }

    pub fn layout(&self) -> LatentLayout {
        LatentLayout {
            with_som: self.use_som,
            reconstruction: self.reconstruction,
            code_dim: self.autoencoder.code_dim(),
        }
    }

    fn seeded(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.som.seed = seed;
        c.autoencoder.seed = seed;
        c.estimation.seed = seed;
        c
    }
}

/// The three addends of the objective and their weighted sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObjectiveTerms {
    /// Mean squared reconstruction error.
    pub reconstruction: f64,
    /// Mean sample energy.
    pub energy: f64,
    /// Covariance penalty.
    pub penalty: f64,
    /// `reconstruction + λ1·energy + λ2·penalty`
    pub total: f64,
}

impl ObjectiveTerms {
    pub fn compose(reconstruction: f64, energy: f64, penalty: f64, lambda1: f64, lambda2: f64) -> Self {
        Self {
            reconstruction,
            energy,
            penalty,
            total: reconstruction + lambda1 * energy + lambda2 * penalty,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub terms: ObjectiveTerms,
}

pub const LOG_CSV_HEADER: &str = "epoch,reconstruction,energy,penalty,objective";

impl EpochLog {
    pub fn csv_row(&self) -> String {
        let t = self.terms;
        format!(
            "{},{},{},{},{}",
            self.epoch, t.reconstruction, t.energy, t.penalty, t.total
        )
    }
}

pub fn write_log_csv<W: Write>(log: &[EpochLog], mut w: W) -> Result<()> {
    writeln!(w, "{LOG_CSV_HEADER}")?;
    for e in log {
        writeln!(w, "{}", e.csv_row())?;
    }
    Ok(())
}

/// Handles of one objective evaluation on the tape.
pub struct ObjectiveVars {
    pub reconstruction: Var,
    pub energy: Var,
    pub penalty: Var,
    pub total: Var,
}

/// Records the objective for one batch. `z_s` is the frozen SOM encoding
/// (omitted when the SOM is disabled); `masks` are the dropout masks.
#[allow(clippy::too_many_arguments)]
pub fn record_objective(
    tape: &mut Tape,
    compression: &crate::compression::CompressionVars,
    estimation: &crate::estimation::EstimationVars,
    x: &Matrix,
    z_s: Option<&Matrix>,
    mode: ReconstructionMode,
    masks: &[Matrix],
    train: &TrainConfig,
) -> Result<ObjectiveVars> {
    let xv = tape.constant(x.clone());
    let (code, recon) = compression.forward(tape, xv)?;
    let sq = tape.row_sq_dist(xv, recon)?;
    let reconstruction = tape.mean(sq)?;
    let z_r = tape.apply(ReconstructionFeatureOp(mode), &[xv, recon])?;
    let mut parts = Vec::with_capacity(3);
    if let Some(zs) = z_s {
        parts.push(tape.constant(zs.clone()));
    }
    parts.push(z_r);
    parts.push(code);
    let z = tape.concat_cols(&parts)?;
    let gamma = estimation.forward(tape, z, masks)?;
    let gmm = GmmVars::estimate(tape, gamma, z, train.eps)?;
    let e = gmm.energy(tape, z, train.eps)?;
    let energy = tape.mean(e)?;
    let dim = tape.value(z).cols();
    let penalty = gmm.penalty(tape, dim, train.eps)?;
    let weighted_energy = tape.scale(energy, train.lambda1)?;
    let weighted_penalty = tape.scale(penalty, train.lambda2)?;
    let partial = tape.add(reconstruction, weighted_energy)?;
    let total = tape.add(partial, weighted_penalty)?;
    Ok(ObjectiveVars {
        reconstruction,
        energy,
        penalty,
        total,
    })
}

/// Objective of one batch with dropout disabled.
pub fn objective(
    x: &Matrix,
    z_s: Option<&Matrix>,
    compression: &CompressionNet,
    estimation: &EstimationNet,
    mode: ReconstructionMode,
    train: &TrainConfig,
) -> Result<ObjectiveTerms> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("objective needs a non-empty batch".into()));
    }
    let mut tape = Tape::new();
    let c = compression.register(&mut tape);
    let e = estimation.register(&mut tape);
    let v = record_objective(&mut tape, &c, &e, x, z_s, mode, &[], train)?;
    let read = |var| tape.value(var).get(0, 0);
    Ok(ObjectiveTerms {
        reconstruction: read(v.reconstruction),
        energy: read(v.energy),
        penalty: read(v.penalty),
        total: read(v.total),
    })
}

/// First-order optimizer state over a flat parameter list.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    kind: Optimizer,
    learning_rate: f64,
    step: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    pub fn new(kind: Optimizer, learning_rate: f64, shapes: &[(usize, usize)]) -> Self {
        let zeros = |_: ()| shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect::<Vec<_>>();
        Self {
            kind,
            learning_rate,
            step: 0,
            m: zeros(()),
            v: zeros(()),
        }
    }

    pub fn update(&mut self, params: Vec<&mut Matrix>, grads: &[Matrix]) {
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= lr * d;
                    }
                }
            }
            Optimizer::Adam => {
                let c1 = 1.0 - BETA1.powi(self.step);
                let c2 = 1.0 - BETA2.powi(self.step);
                for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    let iter = p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut());
                    for (((w, &d), m), v) in iter {
                        *m = BETA1 * *m + (1.0 - BETA1) * d;
                        *v = BETA2 * *v + (1.0 - BETA2) * d * d;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

fn shapes(params: &[&Matrix]) -> Vec<(usize, usize)> {
    params.iter().map(|p| p.shape()).collect()
}

fn batches(n: usize, size: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(size).map(<[usize]>::to_vec).collect()
}

/// A fully trained detector.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub som: Option<SomModel>,
    pub compression: CompressionNet,
    pub estimation: EstimationNet,
    pub final_gmm: GmmParams,
    pub reconstruction: ReconstructionMode,
    pub eps: f64,
    pub preprocessing: Option<PreprocessStats>,
    pub log: Vec<EpochLog>,
}

const SCORE_CHUNK: usize = 2048;

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        self.compression.input_dim()
    }

    pub fn layout(&self) -> LatentLayout {
        LatentLayout {
            with_som: self.som.is_some(),
            reconstruction: self.reconstruction,
            code_dim: self.compression.code_dim(),
        }
    }

    /// Latent vectors `[z_s, z_r, z_c]` of preprocessed rows.
    pub fn latent(&self, x: &Matrix) -> Result<Matrix> {
        latent_batch(self.som.as_ref(), &self.compression, self.reconstruction, x)
    }

    /// Energies of preprocessed rows; rows are scored independently.
    pub fn score_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.cols(),
            });
        }
        let chunks: Vec<Vec<usize>> = (0..x.rows())
            .collect::<Vec<_>>()
            .chunks(SCORE_CHUNK)
            .map(<[usize]>::to_vec)
            .collect();
        let scored = chunks
            .par_iter()
            .map(|idx| {
                let z = self.latent(&x.select_rows(idx))?;
                energy_batch(&z, &self.final_gmm, self.eps)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(scored.into_iter().flatten().collect())
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.score_batch(&Matrix::row_vector(x.to_vec()))?[0])
    }

    /// Applies the stored preprocessing to a raw record, then scores it.
    pub fn score_raw(&self, values: &[RawValue], policy: UnseenPolicy) -> Result<f64> {
        let stats = self
            .preprocessing
            .as_ref()
            .ok_or_else(|| Error::Contract("model carries no preprocessing statistics".into()))?;
        self.score(&stats.transform_values(values, policy)?)
    }
}

fn latent_batch(
    som: Option<&SomModel>,
    compression: &CompressionNet,
    mode: ReconstructionMode,
    x: &Matrix,
) -> Result<Matrix> {
    let code = compression.encode_batch(x)?;
    let recon = compression.decode_batch(&code)?;
    let z_r = reconstruction_feature_batch(x, &recon, mode)?;
    match som {
        Some(s) => Matrix::hconcat(&[&s.encode_batch(x)?, &z_r, &code]),
        None => Matrix::hconcat(&[&z_r, &code]),
    }
}

/// Trains a detector on preprocessed rows.
pub fn train(data: &Matrix, model: &ModelConfig, config: &TrainConfig) -> Result<TrainedModel> {
    train_with_progress(data, model, config, |_| {})
}

/// As [`train`], calling `progress` after every epoch.
pub fn train_with_progress(
    data: &Matrix,
    model: &ModelConfig,
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochLog),
) -> Result<TrainedModel> {
    config.validate()?;
    if data.rows() == 0 {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    if !data.is_finite() {
        return Err(Error::InvalidArgument(
            "training data contains non-finite values".into(),
        ));
    }
    if model.autoencoder.input_dim() != data.cols() {
        return Err(Error::DimensionMismatch {
            expected: model.autoencoder.input_dim(),
            actual: data.cols(),
        });
    }
    let model = model.seeded(config.seed);

    let som = if model.use_som {
        Some(train_som(data, &model.som)?)
    } else {
        None
    };
    let z_s = som.as_ref().map(|s| s.encode_batch(data)).transpose()?;

    let mut compression = CompressionNet::new(&model.autoencoder)?;
    let mut estimation = EstimationNet::new(&model.estimation, model.layout().dim())?;
    let mut opt = {
        let mut all = compression.parameters();
        all.extend(estimation.parameters());
        OptimizerState::new(config.optimizer, config.learning_rate, &shapes(&all))
    };
    let mut order_rng = rng::stream(config.seed, Stream::BatchOrder);
    let mut dropout_rng = rng::stream(config.seed, Stream::Dropout);
    let hidden = estimation.hidden_widths();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut sums = [0.0; 3];
        for (b, idx) in batches(data.rows(), config.batch_size, &mut order_rng)
            .into_iter()
            .enumerate()
        {
            let diverged = || Error::Diverged {
                epoch,
                batch: b,
                last_good_epoch: (epoch > 1).then(|| epoch - 1),
            };
            let x = data.select_rows(&idx);
            let zs = z_s.as_ref().map(|z| z.select_rows(&idx));
            let masks = if estimation.dropout() > 0.0 {
                dropout_masks(&mut dropout_rng, idx.len(), &hidden, estimation.dropout())
            } else {
                Vec::new()
            };
            let mut tape = Tape::new();
            let cv = compression.register(&mut tape);
            let ev = estimation.register(&mut tape);
            let vars = match record_objective(
                &mut tape,
                &cv,
                &ev,
                &x,
                zs.as_ref(),
                model.reconstruction,
                &masks,
                config,
            ) {
                Ok(v) => v,
                Err(e @ (Error::DimensionMismatch { .. } | Error::Contract(_))) => return Err(e),
                Err(_) => return Err(diverged()),
            };
            if !tape.value(vars.total).is_finite() {
                return Err(diverged());
            }
            let grads = tape.backward(vars.total).map_err(|_| diverged())?.params();
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(diverged());
            }
            let w = idx.len() as f64;
            sums[0] += w * tape.value(vars.reconstruction).get(0, 0);
            sums[1] += w * tape.value(vars.energy).get(0, 0);
            sums[2] += w * tape.value(vars.penalty).get(0, 0);
            let mut params = compression.parameters_mut();
            params.extend(estimation.parameters_mut());
            opt.update(params, &grads);
        }
        let n = data.rows() as f64;
        let terms = ObjectiveTerms::compose(sums[0] / n, sums[1] / n, sums[2] / n, config.lambda1, config.lambda2);
        if !terms.total.is_finite() || !compression.is_finite() || !estimation.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: 0,
                last_good_epoch: (epoch > 1).then(|| epoch - 1),
            });
        }
        let entry = EpochLog { epoch, terms };
        progress(&entry);
        log.push(entry);
    }

    let z = latent_batch(som.as_ref(), &compression, model.reconstruction, data)?;
    let gamma = estimation.infer(&z)?.gamma;
    let final_gmm = estimate_gmm(&gamma, &z, config.eps)?;
    Ok(TrainedModel {
        som,
        compression,
        estimation,
        final_gmm,
        reconstruction: model.reconstruction,
        eps: config.eps,
        preprocessing: None,
        log,
    })
}

/// Reconstruction-only training with the same initialization, batch order
/// and optimizer as [`train`]; returns the trained autoencoder.
pub fn train_autoencoder(
    data: &Matrix,
    autoencoder: &AutoencoderConfig,
    config: &TrainConfig,
) -> Result<CompressionNet> {
    config.validate()?;
    if data.rows() == 0 {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    let mut ae = autoencoder.clone();
    ae.seed = config.seed;
    let mut net = CompressionNet::new(&ae)?;
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, &shapes(&net.parameters()));
    let mut order_rng = rng::stream(config.seed, Stream::BatchOrder);
    for epoch in 1..=config.epochs {
        for (b, idx) in batches(data.rows(), config.batch_size, &mut order_rng)
            .into_iter()
            .enumerate()
        {
            let mut tape = Tape::new();
            let vars = net.register(&mut tape);
            let x = tape.constant(data.select_rows(&idx));
            let (_, recon) = vars.forward(&mut tape, x)?;
            let sq = tape.row_sq_dist(x, recon)?;
            let loss = tape.mean(sq)?;
            let grads = tape
                .backward(loss)
                .map_err(|_| Error::Diverged {
                    epoch,
                    batch: b,
                    last_good_epoch: (epoch > 1).then(|| epoch - 1),
                })?
                .params();
            opt.update(net.parameters_mut(), &grads);
        }
    }
    Ok(net)
}
