//! Deep autoencoder: encoder to the code `z_c`, mirrored decoder back to the
//! input space, and the reconstruction features `z_r` fed to the estimator.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{dot, norm2, Matrix, Primitive, Tape, Var};
use crate::rng::{self, Stream};

/// Norm floor used when a reconstruction feature would divide by zero.
pub const EPS_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("tanh")
    }
}

/// Which reconstruction features make up `z_r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ReconstructionMode {
    /// Relative Euclidean distance and cosine similarity.
    #[default]
    Both,
    EuclideanOnly,
}

impl ReconstructionMode {
    pub fn width(self) -> usize {
        match self {
            ReconstructionMode::Both => 2,
            ReconstructionMode::EuclideanOnly => 1,
        }
    }
}

impl FromStr for ReconstructionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(ReconstructionMode::Both),
            "euclidean-only" => Ok(ReconstructionMode::EuclideanOnly),
            other => Err(Error::Config(format!("unknown z_r mode {other:?}"))),
        }
    }
}

impl fmt::Display for ReconstructionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReconstructionMode::Both => "both",
            ReconstructionMode::EuclideanOnly => "euclidean-only",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderConfig {
    /// Encoder widths from the input dimension down to the code dimension.
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl AutoencoderConfig {
    /// `d → 60 → 30 → 10 → 1`
    pub fn for_input(dim: usize) -> Self {
        Self {
            layer_sizes: vec![dim, 60, 30, 10, 1],
            activation: Activation::Tanh,
            seed: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn code_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config("autoencoder needs at least 2 layer sizes".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config("autoencoder layer sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Fully connected layer `y = x·W + b`, `W` stored `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Matrix,
}

impl Dense {
    pub fn new(weights: Matrix, bias: Matrix) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weights.cols() {
            return Err(Error::DimensionMismatch {
                expected: weights.cols(),
                actual: bias.len(),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(inputs, outputs),
            bias: Matrix::zeros(1, outputs),
        }
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero bias.
    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            weights: Matrix::from_fn(inputs, outputs, |_, _| rng.gen_range(-limit..limit)),
            bias: Matrix::zeros(1, outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        x.matmul(&self.weights)?.add_row(&self.bias)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite() && self.bias.is_finite()
    }
}

/// Layer stack with tanh on every layer but the last.
pub(crate) fn forward_stack(layers: &[Dense], x: &Matrix) -> Result<Matrix> {
    let mut h = x.clone();
    for (i, layer) in layers.iter().enumerate() {
        h = layer.forward(&h)?;
        if i + 1 < layers.len() {
            h = h.map(f64::tanh);
        }
    }
    Ok(h)
}

/// Tape handles for one layer stack.
#[derive(Clone, Debug)]
pub struct LayerVars {
    pub layers: Vec<(Var, Var)>,
}

impl LayerVars {
    pub fn register(tape: &mut Tape, layers: &[Dense]) -> Self {
        Self {
            layers: layers
                .iter()
                .map(|l| (tape.param(l.weights.clone()), tape.param(l.bias.clone())))
                .collect(),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            h = tape.matmul(h, w)?;
            h = tape.add_row(h, b)?;
            if i + 1 < self.layers.len() {
                h = tape.tanh(h)?;
            }
        }
        Ok(h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressionNet {
    encoder: Vec<Dense>,
    decoder: Vec<Dense>,
}

impl CompressionNet {
    pub fn new(config: &AutoencoderConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, Stream::CompressionInit);
        let sizes = &config.layer_sizes;
        let encoder = sizes.windows(2).map(|w| Dense::glorot(w[0], w[1], &mut rng)).collect();
        let decoder = sizes
            .windows(2)
            .rev()
            .map(|w| Dense::glorot(w[1], w[0], &mut rng))
            .collect();
        Ok(Self { encoder, decoder })
    }

    /// Assembles a net from explicit layers; the decoder must mirror the encoder.
    pub fn from_layers(encoder: Vec<Dense>, decoder: Vec<Dense>) -> Result<Self> {
        if encoder.is_empty() || encoder.len() != decoder.len() {
            return Err(Error::InvalidArgument(
                "decoder must have as many layers as the encoder".into(),
            ));
        }
        for (e, d) in encoder.iter().zip(decoder.iter().rev()) {
            if e.inputs() != d.outputs() || e.outputs() != d.inputs() {
                return Err(Error::InvalidArgument(format!(
                    "decoder layer {}x{} does not mirror encoder layer {}x{}",
                    d.inputs(),
                    d.outputs(),
                    e.inputs(),
                    e.outputs()
                )));
            }
        }
        for pair in encoder.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::InvalidArgument("encoder layers do not chain".into()));
            }
        }
        let net = Self { encoder, decoder };
        if !net.is_finite() {
            return Err(Error::InvalidArgument("autoencoder parameters must be finite".into()));
        }
        Ok(net)
    }

    pub fn encoder(&self) -> &[Dense] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Dense] {
        &self.decoder
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].inputs()
    }

    pub fn code_dim(&self) -> usize {
        self.encoder.last().expect("non-empty").outputs()
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.iter().chain(&self.decoder).all(Dense::is_finite)
    }

    fn check_cols(m: &Matrix, expected: usize) -> Result<()> {
        if m.cols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: m.cols(),
            });
        }
        Ok(())
    }

    pub fn encode_batch(&self, x: &Matrix) -> Result<Matrix> {
        Self::check_cols(x, self.input_dim())?;
        forward_stack(&self.encoder, x)
    }

    pub fn decode_batch(&self, code: &Matrix) -> Result<Matrix> {
        Self::check_cols(code, self.code_dim())?;
        forward_stack(&self.decoder, code)
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encode_batch(&Matrix::row_vector(x.to_vec()))?.into_data())
    }

    pub fn decode(&self, code: &[f64]) -> Result<Vec<f64>> {
        Ok(self.decode_batch(&Matrix::row_vector(code.to_vec()))?.into_data())
    }

    /// Parameters in tape registration order: encoder layers then decoder layers,
    /// each as `(weights, bias)`.
    pub fn parameters(&self) -> Vec<&Matrix> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|l| [&l.weights, &l.bias])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    pub fn register(&self, tape: &mut Tape) -> CompressionVars {
        CompressionVars {
            encoder: LayerVars::register(tape, &self.encoder),
            decoder: LayerVars::register(tape, &self.decoder),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompressionVars {
    pub encoder: LayerVars,
    pub decoder: LayerVars,
}

impl CompressionVars {
    /// Returns `(z_c, x′)`.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<(Var, Var)> {
        let code = self.encoder.forward(tape, x)?;
        let recon = self.decoder.forward(tape, code)?;
        Ok((code, recon))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionFeatures {
    pub rel_euclidean: f64,
    pub cosine_sim: f64,
}

impl ReconstructionFeatures {
    pub fn to_vec(self, mode: ReconstructionMode) -> Vec<f64> {
        match mode {
            ReconstructionMode::Both => vec![self.rel_euclidean, self.cosine_sim],
            ReconstructionMode::EuclideanOnly => vec![self.rel_euclidean],
        }
    }
}

/// `‖x − x′‖ / max(‖x‖, ε)` and `⟨x, x′⟩ / max(‖x‖‖x′‖, ε)`.
pub fn reconstruction_features(x: &[f64], recon: &[f64]) -> Result<ReconstructionFeatures> {
    if x.len() != recon.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: recon.len(),
        });
    }
    let nx = norm2(x);
    let nr = norm2(recon);
    let nd = x.iter().zip(recon).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(ReconstructionFeatures {
        rel_euclidean: nd / nx.max(EPS_NORM),
        cosine_sim: dot(x, recon) / (nx * nr).max(EPS_NORM),
    })
}

/// Squared L2 reconstruction error.
pub fn reconstruction_loss(x: &[f64], recon: &[f64]) -> Result<f64> {
    if x.len() != recon.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: recon.len(),
        });
    }
    Ok(x.iter().zip(recon).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Row-wise reconstruction features as an `N × width` matrix.
pub fn reconstruction_feature_batch(x: &Matrix, recon: &Matrix, mode: ReconstructionMode) -> Result<Matrix> {
    ReconstructionFeatureOp(mode).forward(&[x, recon])
}

/// Tape primitive for row-wise reconstruction features; inputs `(x, x′)`.
pub struct ReconstructionFeatureOp(pub ReconstructionMode);

impl Primitive for ReconstructionFeatureOp {
    fn name(&self) -> &'static str {
        "reconstruction_features"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        let (x, recon) = (inputs[0], inputs[1]);
        if x.shape() != recon.shape() {
            return Err(Error::DimensionMismatch {
                expected: x.cols(),
                actual: recon.cols(),
            });
        }
        let width = self.0.width();
        let mut out = Matrix::zeros(x.rows(), width);
        for i in 0..x.rows() {
            let f = reconstruction_features(x.row(i), recon.row(i))?;
            out.row_mut(i).copy_from_slice(&f.to_vec(self.0));
        }
        Ok(out)
    }

    fn backward(&self, inputs: &[&Matrix], _: &Matrix, grad: &Matrix, needs: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let (x, recon) = (inputs[0], inputs[1]);
        let (n, d) = x.shape();
        let mut gx = Matrix::zeros(n, d);
        let mut gr = Matrix::zeros(n, d);
        for i in 0..n {
            let xi = x.row(i);
            let ri = recon.row(i);
            let nx = norm2(xi);
            let nr = norm2(ri);
            let diff: Vec<f64> = xi.iter().zip(ri).map(|(a, b)| a - b).collect();
            let nd = norm2(&diff);

            // relative euclidean distance
            let g_rel = grad.get(i, 0);
            let den = nx.max(EPS_NORM);
            if nd > 0.0 {
                for k in 0..d {
                    let t = g_rel * diff[k] / (nd * den);
                    gx.row_mut(i)[k] += t;
                    gr.row_mut(i)[k] -= t;
                }
            }
            if nx > EPS_NORM {
                for k in 0..d {
                    gx.row_mut(i)[k] -= g_rel * nd / (den * den) * xi[k] / nx;
                }
            }

            if self.0 == ReconstructionMode::Both {
                let g_cos = grad.get(i, 1);
                let num = dot(xi, ri);
                let prod = nx * nr;
                let den = prod.max(EPS_NORM);
                for k in 0..d {
                    gx.row_mut(i)[k] += g_cos * ri[k] / den;
                    gr.row_mut(i)[k] += g_cos * xi[k] / den;
                }
                if prod > EPS_NORM {
                    let s = g_cos * num / (den * den);
                    for k in 0..d {
                        if nx > 0.0 {
                            gx.row_mut(i)[k] -= s * nr * xi[k] / nx;
                        }
                        if nr > 0.0 {
                            gr.row_mut(i)[k] -= s * nx * ri[k] / nr;
                        }
                    }
                }
            }
        }
        Ok(vec![needs[0].then_some(gx), needs[1].then_some(gr)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::gradcheck::check_gradients;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_net(sizes: &[usize]) -> CompressionNet {
        let enc = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        let dec = sizes.windows(2).rev().map(|w| Dense::zeros(w[1], w[0])).collect();
        CompressionNet::from_layers(enc, dec).unwrap()
    }

    fn identity_net(d: usize) -> CompressionNet {
        let l = || Dense::new(Matrix::identity(d), Matrix::zeros(1, d)).unwrap();
        CompressionNet::from_layers(vec![l()], vec![l()]).unwrap()
    }

    /// Layer-by-layer recomputation with explicit loops.
    fn naive_stack(layers: &[Dense], x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (i, l) in layers.iter().enumerate() {
            let mut next = vec![0.0; l.outputs()];
            for (o, slot) in next.iter_mut().enumerate() {
                let mut v = l.bias.get(0, o);
                for (k, hk) in h.iter().enumerate() {
                    v += hk * l.weights.get(k, o);
                }
                *slot = if i + 1 < layers.len() { v.tanh() } else { v };
            }
            h = next;
        }
        h
    }

    #[test]
    fn config_validation() {
        let mut c = AutoencoderConfig::for_input(122);
        assert_eq!(c.layer_sizes, vec![122, 60, 30, 10, 1]);
        assert!(c.validate().is_ok());
        c.layer_sizes = vec![5];
        assert!(c.validate().is_err());
        c.layer_sizes = vec![5, 0, 1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn decoder_mirrors_encoder() {
        let net = CompressionNet::new(&AutoencoderConfig::for_input(122)).unwrap();
        for (e, d) in net.encoder().iter().zip(net.decoder().iter().rev()) {
            assert_eq!(e.weights.shape(), (d.outputs(), d.inputs()));
        }
        assert_eq!(net.code_dim(), 1);
        assert!(net.is_finite());
        let bad = CompressionNet::from_layers(vec![Dense::zeros(3, 2)], vec![Dense::zeros(2, 4)]);
        assert!(bad.is_err());
    }

    #[test]
    fn init_respects_glorot_bound_and_seed() {
        let cfg = AutoencoderConfig {
            layer_sizes: vec![8, 4, 2],
            activation: Activation::Tanh,
            seed: 5,
        };
        let a = CompressionNet::new(&cfg).unwrap();
        let b = CompressionNet::new(&cfg).unwrap();
        assert_eq!(a, b);
        let limit = (6.0f64 / 12.0).sqrt();
        assert!(a.encoder()[0].weights.data().iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn zero_parameters_give_zero_outputs() {
        let net = zero_net(&[4, 3, 2]);
        assert_eq!(net.encode(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.decode(&[0.7, 0.1]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn identity_config_passes_through() {
        let net = identity_net(3);
        let x = [0.25, -1.5, 2.0];
        assert_eq!(net.encode(&x).unwrap(), x.to_vec());
        assert_eq!(net.decode(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn encode_decode_match_naive_recomputation() {
        let cfg = AutoencoderConfig {
            layer_sizes: vec![6, 5, 3, 2],
            activation: Activation::Tanh,
            seed: 17,
        };
        let mut net = CompressionNet::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in net.parameters_mut() {
            for v in p.data_mut() {
                *v += rng.gen_range(-0.2..0.2);
            }
        }
        for _ in 0..20 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let code = net.encode(&x).unwrap();
            let expect_code = naive_stack(net.encoder(), &x);
            for (a, b) in code.iter().zip(&expect_code) {
                assert!((a - b).abs() < 1e-12);
            }
            let recon = net.decode(&code).unwrap();
            let expect_recon = naive_stack(net.decoder(), &code);
            for (a, b) in recon.iter().zip(&expect_recon) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = zero_net(&[4, 2]);
        assert!(matches!(net.encode(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(net.decode(&[1.0, 2.0, 3.0]).is_err());
        assert!(reconstruction_features(&[1.0], &[1.0, 2.0]).is_err());
        assert!(reconstruction_loss(&[1.0], &[]).is_err());
    }

    #[test]
    fn reconstruction_feature_examples() {
        let f = reconstruction_features(&[3.0, 4.0], &[3.0, 4.0]).unwrap();
        assert_eq!(f.rel_euclidean, 0.0);
        assert!((f.cosine_sim - 1.0).abs() < 1e-15);

        let f = reconstruction_features(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!((f.rel_euclidean, f.cosine_sim), (1.0, 0.0));

        let f = reconstruction_features(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((f.rel_euclidean - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.cosine_sim, 0.0);

        let f = reconstruction_features(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(f.rel_euclidean.is_finite() && f.cosine_sim.is_finite());
    }

    #[test]
    fn reconstruction_loss_examples() {
        assert_eq!(reconstruction_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(reconstruction_loss(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let a: Vec<f64> = (0..7).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..7).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut oracle = 0.0;
            for k in 0..7 {
                oracle += (a[k] - b[k]).powi(2);
            }
            assert!((reconstruction_loss(&a, &b).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let net = CompressionNet::new(&AutoencoderConfig::for_input(10)).unwrap();
        let x: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(net.encode(&x).unwrap(), net.encode(&x).unwrap());
    }

    #[test]
    fn feature_primitive_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Matrix::from_fn(5, 4, |_, _| rng.gen_range(-1.0..1.0));
        let r = Matrix::from_fn(5, 4, |_, _| rng.gen_range(-1.0..1.0));
        let weights = Matrix::from_fn(5, 2, |_, _| rng.gen_range(-1.0..1.0));
        for mode in [ReconstructionMode::Both, ReconstructionMode::EuclideanOnly] {
            let w = Matrix::from_fn(5, mode.width(), |i, j| weights.get(i, j));
            let err = check_gradients(&[x.clone(), r.clone()], 1e-6, 1e-6, |t, v| {
                let f = t.apply(ReconstructionFeatureOp(mode), &[v[0], v[1]])?;
                let c = t.constant(w.clone());
                let fw = t.mul(f, c)?;
                t.sum(fw)
            });
            assert!(err < 1e-6, "{mode}: {err}");
        }
    }

    #[test]
    fn reconstruction_loss_gradients_through_autoencoder() {
        let cfg = AutoencoderConfig {
            layer_sizes: vec![4, 3, 1],
            activation: Activation::Tanh,
            seed: 2,
        };
        let net = CompressionNet::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_fn(6, 4, |_, _| rng.gen_range(0.0..1.0));
        let params: Vec<Matrix> = net.parameters().into_iter().cloned().collect();
        let err = check_gradients(&params, 1e-5, 1e-6, |t, v| {
            let enc = LayerVars {
                layers: vec![(v[0], v[1]), (v[2], v[3])],
            };
            let dec = LayerVars {
                layers: vec![(v[4], v[5]), (v[6], v[7])],
            };
            let xv = t.constant(x.clone());
            let code = enc.forward(t, xv)?;
            let recon = dec.forward(t, code)?;
            let d = t.row_sq_dist(xv, recon)?;
            t.mean(d)
        });
        assert!(err < 1e-4, "{err}");
    }

    proptest! {
        #[test]
        fn feature_ranges(
            x in proptest::collection::vec(-10.0f64..10.0, 1..8),
            seed in 0u64..10_000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r: Vec<f64> = x.iter().map(|_| rng.gen_range(-10.0..10.0)).collect();
            let f = reconstruction_features(&x, &r).unwrap();
            prop_assert!(f.rel_euclidean >= 0.0);
            prop_assert!(f.cosine_sim >= -1.0 - 1e-12 && f.cosine_sim <= 1.0 + 1e-12);
        }
    }
}
