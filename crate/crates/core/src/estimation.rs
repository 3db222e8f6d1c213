//! Estimation network and the batch Gaussian mixture it parameterizes.
//!
//! The network maps a latent vector `z = [z_s, z_r, z_c]` to soft mixture
//! memberships. Mixture weights, means and covariances are then estimated
//! from a batch of `(γ, z)` pairs, and a sample's energy is its negative
//! log-likelihood under that mixture. Every step is a tape primitive so the
//! training objective can be differentiated end to end.

use std::f64::consts::PI;

use rand::Rng;

use crate::compression::{forward_stack, Dense, LayerVars, ReconstructionMode};
use crate::error::{Error, Result};
use crate::numeric::{factor_lower, log_sum_exp, tape::RowSoftmax, Cholesky, Matrix, Primitive, Tape, Var};
use crate::rng::{self, Stream};

/// Below this total membership a component is treated as empty.
pub const DEGENERATE_MASS: f64 = 1e-12;

/// Column layout of the latent vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentLayout {
    pub with_som: bool,
    pub reconstruction: ReconstructionMode,
    pub code_dim: usize,
}

impl LatentLayout {
    pub fn dim(&self) -> usize {
        let som = if self.with_som { 2 } else { 0 };
        som + self.reconstruction.width() + self.code_dim
    }
}

/// One sample's latent representation.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode {
    pub z_s: Option<(f64, f64)>,
    pub z_r: Vec<f64>,
    pub z_c: Vec<f64>,
}

impl LatentCode {
    /// `[z_s, z_r, z_c]`, omitting `z_s` when the SOM is disabled.
    pub fn concat(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(2 + self.z_r.len() + self.z_c.len());
        if let Some((a, b)) = self.z_s {
            z.push(a);
            z.push(b);
        }
        z.extend_from_slice(&self.z_r);
        z.extend_from_slice(&self.z_c);
        z
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationConfig {
    pub hidden: Vec<usize>,
    pub components: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            hidden: vec![10],
            components: 4,
            dropout: 0.5,
            seed: 0,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Multi-layer membership network: tanh hidden layers with dropout, linear
/// output of width `K`, row-wise softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationNet {
    layers: Vec<Dense>,
    dropout: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembershipBatch {
    /// `N × K` soft memberships.
    pub gamma: Matrix,
    /// `N × K` pre-softmax outputs.
    pub logits: Matrix,
}

/// Inverted-dropout masks, one per hidden layer.
pub fn dropout_masks<R: Rng>(rng: &mut R, rows: usize, hidden: &[usize], rate: f64) -> Vec<Matrix> {
    let keep = 1.0 - rate;
    hidden
        .iter()
        .map(|&w| Matrix::from_fn(rows, w, |_, _| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }))
        .collect()
}

impl EstimationNet {
    pub fn new(config: &EstimationConfig, latent_dim: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, Stream::EstimationInit);
        let mut sizes = vec![latent_dim];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(config.components);
        let layers = sizes.windows(2).map(|w| Dense::glorot(w[0], w[1], &mut rng)).collect();
        Ok(Self {
            layers,
            dropout: config.dropout,
        })
    }

    pub fn from_layers(layers: Vec<Dense>, dropout: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("estimation network needs a layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::InvalidArgument("estimation layers do not chain".into()));
            }
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument(format!("dropout {dropout} outside [0, 1)")));
        }
        Ok(Self { layers, dropout })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn components(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Dense::outputs)
            .collect()
    }

    pub fn parameters(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias]).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    /// Memberships for a batch. With `dropout_rng` set, hidden activations
    /// are masked (training mode); otherwise the deterministic path is used.
    pub fn membership<R: Rng>(&self, z: &Matrix, dropout_rng: Option<&mut R>) -> Result<MembershipBatch> {
        if z.cols() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                actual: z.cols(),
            });
        }
        let logits = match dropout_rng {
            Some(rng) if self.dropout > 0.0 => {
                let masks = dropout_masks(rng, z.rows(), &self.hidden_widths(), self.dropout);
                let mut h = z.clone();
                for (i, layer) in self.layers.iter().enumerate() {
                    h = layer.forward(&h)?;
                    if i + 1 < self.layers.len() {
                        h = h.map(f64::tanh).hadamard(&masks[i])?;
                    }
                }
                h
            }
            _ => forward_stack(&self.layers, z)?,
        };
        let gamma = RowSoftmax.forward(&[&logits])?;
        Ok(MembershipBatch { gamma, logits })
    }

    /// Deterministic memberships (dropout off).
    pub fn infer(&self, z: &Matrix) -> Result<MembershipBatch> {
        self.membership::<rand_chacha::ChaCha8Rng>(z, None)
    }

    pub fn register(&self, tape: &mut Tape) -> EstimationVars {
        EstimationVars {
            layers: LayerVars::register(tape, &self.layers),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EstimationVars {
    pub layers: LayerVars,
}

impl EstimationVars {
    /// Records the membership network; `masks` holds one dropout mask per
    /// hidden layer, or is empty for the deterministic path. Returns `γ`.
    pub fn forward(&self, tape: &mut Tape, z: Var, masks: &[Matrix]) -> Result<Var> {
        let n = self.layers.layers.len();
        let mut h = z;
        for (i, &(w, b)) in self.layers.layers.iter().enumerate() {
            h = tape.matmul(h, w)?;
            h = tape.add_row(h, b)?;
            if i + 1 < n {
                h = tape.tanh(h)?;
                if let Some(mask) = masks.get(i) {
                    h = tape.mul_const(h, mask.clone())?;
                }
            }
        }
        tape.row_softmax(h)
    }
}

/// Mixture weights, means and covariances estimated from one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmParams {
    pub phi: Vec<f64>,
    /// `K × D`
    pub mu: Matrix,
    pub sigma: Vec<Matrix>,
}

impl GmmParams {
    pub fn new(phi: Vec<f64>, mu: Matrix, sigma: Vec<Matrix>) -> Result<Self> {
        let k = phi.len();
        let d = mu.cols();
        if k == 0 || mu.rows() != k || sigma.len() != k {
            return Err(Error::InvalidGmm(format!(
                "inconsistent component counts: {} weights, {} means, {} covariances",
                k,
                mu.rows(),
                sigma.len()
            )));
        }
        if sigma.iter().any(|s| s.shape() != (d, d)) {
            return Err(Error::InvalidGmm(
                "covariance shape does not match mean dimension".into(),
            ));
        }
        if phi.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidGmm("mixture weights must be non-negative".into()));
        }
        Ok(Self { phi, mu, sigma })
    }

    pub fn components(&self) -> usize {
        self.phi.len()
    }

    pub fn dim(&self) -> usize {
        self.mu.cols()
    }

    fn sigma_flat(&self) -> Matrix {
        let d = self.dim();
        let mut data = Vec::with_capacity(self.components() * d * d);
        for s in &self.sigma {
            data.extend_from_slice(s.data());
        }
        Matrix::new(self.components(), d * d, data).expect("consistent shapes")
    }

    fn from_parts(phi: &Matrix, mu: &Matrix, sigma_flat: &Matrix) -> Self {
        let d = mu.cols();
        Self {
            phi: phi.data().to_vec(),
            mu: mu.clone(),
            sigma: sigma_flat
                .iter_rows()
                .map(|r| Matrix::new(d, d, r.to_vec()).expect("flat covariance"))
                .collect(),
        }
    }
}

fn check_batch(gamma: &Matrix, z: &Matrix) -> Result<()> {
    if gamma.rows() == 0 {
        return Err(Error::EmptyInput("mixture estimation needs at least one sample".into()));
    }
    if gamma.rows() != z.rows() {
        return Err(Error::DimensionMismatch {
            expected: gamma.rows(),
            actual: z.rows(),
        });
    }
    if gamma.cols() == 0 {
        return Err(Error::InvalidArgument("memberships need at least one component".into()));
    }
    Ok(())
}

fn component_mass(gamma: &Matrix) -> Vec<f64> {
    gamma.col_sums().into_data()
}

/// `φ_k = Σ_i γ_ik / N`; input `γ`, output `1 × K`.
pub struct MixtureWeightOp;

impl Primitive for MixtureWeightOp {
    fn name(&self) -> &'static str {
        "mixture_weights"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        let gamma = inputs[0];
        if gamma.rows() == 0 {
            return Err(Error::EmptyInput("mixture estimation needs at least one sample".into()));
        }
        Ok(gamma.col_sums().scale(1.0 / gamma.rows() as f64))
    }

    fn backward(&self, inputs: &[&Matrix], _: &Matrix, grad: &Matrix, _: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let gamma = inputs[0];
        let n = gamma.rows() as f64;
        Ok(vec![Some(Matrix::from_fn(gamma.rows(), gamma.cols(), |_, k| {
            grad.get(0, k) / n
        }))])
    }
}

/// `μ_k = Σ_i γ_ik z_i / Σ_i γ_ik`; inputs `(γ, z)`, output `K × D`.
///
/// An empty component takes the batch mean.
pub struct MixtureMeanOp;

impl Primitive for MixtureMeanOp {
    fn name(&self) -> &'static str {
        "mixture_means"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        let (gamma, z) = (inputs[0], inputs[1]);
        check_batch(gamma, z)?;
        let mass = component_mass(gamma);
        let weighted = gamma.t_matmul(z)?;
        let batch_mean = z.col_sums().scale(1.0 / z.rows() as f64);
        Ok(Matrix::from_fn(gamma.cols(), z.cols(), |k, j| {
            if mass[k] < DEGENERATE_MASS {
                batch_mean.get(0, j)
            } else {
                weighted.get(k, j) / mass[k]
            }
        }))
    }

    fn backward(
        &self,
        inputs: &[&Matrix],
        output: &Matrix,
        grad: &Matrix,
        needs: &[bool],
    ) -> Result<Vec<Option<Matrix>>> {
        let (gamma, z) = (inputs[0], inputs[1]);
        let (n, kk) = gamma.shape();
        let d = z.cols();
        let mass = component_mass(gamma);
        let mut g_gamma = Matrix::zeros(n, kk);
        let mut g_z = Matrix::zeros(n, d);
        for k in 0..kk {
            let gm = grad.row(k);
            if mass[k] < DEGENERATE_MASS {
                for i in 0..n {
                    for (o, g) in g_z.row_mut(i).iter_mut().zip(gm) {
                        *o += g / n as f64;
                    }
                }
                continue;
            }
            let mu = output.row(k);
            for i in 0..n {
                let zi = z.row(i);
                let w = gamma.get(i, k) / mass[k];
                let mut inner = 0.0;
                for j in 0..d {
                    inner += gm[j] * (zi[j] - mu[j]);
                }
                g_gamma.set(i, k, inner / mass[k]);
                for (o, g) in g_z.row_mut(i).iter_mut().zip(gm) {
                    *o += w * g;
                }
            }
        }
        Ok(vec![needs[0].then_some(g_gamma), needs[1].then_some(g_z)])
    }
}

/// `Σ_k = Σ_i γ_ik (z_i−μ_k)(z_i−μ_k)ᵀ / Σ_i γ_ik`; inputs `(γ, z, μ)`,
/// output `K × D²` (row-major covariance per row).
///
/// An empty component gets `fill · I`.
pub struct MixtureCovarianceOp {
    pub fill: f64,
}

impl Primitive for MixtureCovarianceOp {
    fn name(&self) -> &'static str {
        "mixture_covariances"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        let (gamma, z, mu) = (inputs[0], inputs[1], inputs[2]);
        check_batch(gamma, z)?;
        let (n, kk) = gamma.shape();
        let d = z.cols();
        if mu.shape() != (kk, d) {
            return Err(Error::DimensionMismatch {
                expected: kk * d,
                actual: mu.len(),
            });
        }
        let mass = component_mass(gamma);
        let mut out = Matrix::zeros(kk, d * d);
        let mut diff = vec![0.0; d];
        for k in 0..kk {
            let row = out.row_mut(k);
            if mass[k] < DEGENERATE_MASS {
                for j in 0..d {
                    row[j * d + j] = self.fill;
                }
                continue;
            }
            let mu_k = mu.row(k);
            for i in 0..n {
                let w = gamma.get(i, k);
                for (t, (a, b)) in diff.iter_mut().zip(z.row(i).iter().zip(mu_k)) {
                    *t = a - b;
                }
                for a in 0..d {
                    let wa = w * diff[a];
                    for b in 0..d {
                        row[a * d + b] += wa * diff[b];
                    }
                }
            }
            for v in row.iter_mut() {
                *v /= mass[k];
            }
        }
        Ok(out)
    }

    fn backward(
        &self,
        inputs: &[&Matrix],
        output: &Matrix,
        grad: &Matrix,
        needs: &[bool],
    ) -> Result<Vec<Option<Matrix>>> {
        let (gamma, z, mu) = (inputs[0], inputs[1], inputs[2]);
        let (n, kk) = gamma.shape();
        let d = z.cols();
        let mass = component_mass(gamma);
        let mut g_gamma = Matrix::zeros(n, kk);
        let mut g_z = Matrix::zeros(n, d);
        let mut g_mu = Matrix::zeros(kk, d);
        let mut diff = vec![0.0; d];
        let mut gsd = vec![0.0; d];
        for k in 0..kk {
            if mass[k] < DEGENERATE_MASS {
                continue;
            }
            let g = grad.row(k);
            let sigma = output.row(k);
            let frob: f64 = g.iter().zip(sigma).map(|(a, b)| a * b).sum();
            let mu_k = mu.row(k);
            for i in 0..n {
                for (t, (a, b)) in diff.iter_mut().zip(z.row(i).iter().zip(mu_k)) {
                    *t = a - b;
                }
                // (G + Gᵀ) d and dᵀ G d
                let mut quad = 0.0;
                for a in 0..d {
                    let mut s = 0.0;
                    for b in 0..d {
                        s += (g[a * d + b] + g[b * d + a]) * diff[b];
                        quad += diff[a] * g[a * d + b] * diff[b];
                    }
                    gsd[a] = s;
                }
                let w = gamma.get(i, k) / mass[k];
                g_gamma.set(i, k, (quad - frob) / mass[k]);
                for a in 0..d {
                    g_z.row_mut(i)[a] += w * gsd[a];
                    g_mu.row_mut(k)[a] -= w * gsd[a];
                }
            }
        }
        Ok(vec![
            needs[0].then_some(g_gamma),
            needs[1].then_some(g_z),
            needs[2].then_some(g_mu),
        ])
    }
}

struct ComponentFactor {
    chol: Cholesky,
    /// `log √|2π(Σ + εI)|`
    half_log_norm: f64,
}

fn factor_components(mu: &Matrix, sigma_flat: &Matrix, eps: f64) -> Result<Vec<ComponentFactor>> {
    let d = mu.cols();
    (0..mu.rows())
        .map(|k| {
            let raw = sigma_flat.row(k);
            let sym = Matrix::from_fn(d, d, |a, b| 0.5 * (raw[a * d + b] + raw[b * d + a]));
            let chol = factor_lower(&sym, eps).map_err(|e| match e {
                Error::SingularMatrix { .. } => Error::SingularMatrix { component: Some(k) },
                other => other,
            })?;
            let half_log_norm = 0.5 * (d as f64 * (2.0 * PI).ln() + chol.log_det());
            Ok(ComponentFactor { chol, half_log_norm })
        })
        .collect()
}

/// Per-sample energy `−log Σ_k φ_k N(z; μ_k, Σ_k + εI)`; inputs
/// `(φ, μ, Σ, z)` with `Σ` flattened `K × D²`; output `N × 1`.
///
/// Covariances are symmetrized and regularized, factored by Cholesky, and
/// the mixture is summed with log-sum-exp.
pub struct EnergyOp {
    pub eps: f64,
}

impl EnergyOp {
    fn check(phi: &Matrix, mu: &Matrix, sigma: &Matrix, z: &Matrix) -> Result<()> {
        let kk = phi.cols();
        let d = mu.cols();
        if phi.rows() != 1 || mu.rows() != kk || sigma.shape() != (kk, d * d) {
            return Err(Error::InvalidGmm("inconsistent mixture parameter shapes".into()));
        }
        if z.cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: z.cols(),
            });
        }
        if phi.data().iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidGmm("mixture weights must be non-negative".into()));
        }
        if phi.data().iter().all(|&p| p == 0.0) {
            return Err(Error::InvalidGmm("all mixture weights are zero".into()));
        }
        Ok(())
    }
}

impl Primitive for EnergyOp {
    fn name(&self) -> &'static str {
        "energy"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        let (phi, mu, sigma, z) = (inputs[0], inputs[1], inputs[2], inputs[3]);
        Self::check(phi, mu, sigma, z)?;
        let factors = factor_components(mu, sigma, self.eps)?;
        let log_phi: Vec<f64> = phi.data().iter().map(|p| p.ln()).collect();
        let d = mu.cols();
        let mut a = vec![0.0; factors.len()];
        let mut diff = vec![0.0; d];
        let mut out = Vec::with_capacity(z.rows());
        for zi in z.iter_rows() {
            for (k, f) in factors.iter().enumerate() {
                for (t, (x, m)) in diff.iter_mut().zip(zi.iter().zip(mu.row(k))) {
                    *t = x - m;
                }
                a[k] = log_phi[k] - 0.5 * f.chol.quad_form(&diff) - f.half_log_norm;
            }
            out.push(-log_sum_exp(&a));
        }
        Matrix::new(z.rows(), 1, out)
    }

    fn backward(&self, inputs: &[&Matrix], _: &Matrix, grad: &Matrix, needs: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let (phi, mu, sigma, z) = (inputs[0], inputs[1], inputs[2], inputs[3]);
        let factors = factor_components(mu, sigma, self.eps)?;
        let inverses: Vec<Matrix> = factors.iter().map(|f| f.chol.inverse()).collect();
        let kk = phi.cols();
        let d = mu.cols();
        let log_phi: Vec<f64> = phi.data().iter().map(|p| p.ln()).collect();

        let mut g_phi = Matrix::zeros(1, kk);
        let mut g_mu = Matrix::zeros(kk, d);
        let mut g_sigma = Matrix::zeros(kk, d * d);
        let mut g_z = Matrix::zeros(z.rows(), d);
        let mut resp_total = vec![0.0; kk];

        let mut log_density = vec![0.0; kk];
        let mut a = vec![0.0; kk];
        let mut solved: Vec<Vec<f64>> = vec![Vec::new(); kk];
        let mut diff = vec![0.0; d];
        for (i, zi) in z.iter_rows().enumerate() {
            let g = grad.get(i, 0);
            for k in 0..kk {
                for (t, (x, m)) in diff.iter_mut().zip(zi.iter().zip(mu.row(k))) {
                    *t = x - m;
                }
                solved[k] = factors[k].chol.solve(&diff);
                let quad: f64 = solved[k].iter().zip(&diff).map(|(s, t)| s * t).sum();
                log_density[k] = -0.5 * quad - factors[k].half_log_norm;
                a[k] = log_phi[k] + log_density[k];
            }
            let lse = log_sum_exp(&a);
            for k in 0..kk {
                // ∂E/∂φ_k = −p_k / Σ_j φ_j p_j, finite even when φ_k = 0
                g_phi.row_mut(0)[k] -= g * (log_density[k] - lse).exp();
                let r = if phi.get(0, k) > 0.0 { (a[k] - lse).exp() } else { 0.0 };
                if r == 0.0 {
                    continue;
                }
                let gr = g * r;
                resp_total[k] += gr;
                let v = &solved[k];
                for j in 0..d {
                    g_z.row_mut(i)[j] += gr * v[j];
                    g_mu.row_mut(k)[j] -= gr * v[j];
                }
                let gs = g_sigma.row_mut(k);
                for p in 0..d {
                    for q in 0..d {
                        gs[p * d + q] -= 0.5 * gr * v[p] * v[q];
                    }
                }
            }
        }
        for k in 0..kk {
            let gs = g_sigma.row_mut(k);
            for (o, inv) in gs.iter_mut().zip(inverses[k].data()) {
                *o += 0.5 * resp_total[k] * inv;
            }
        }
        Ok(vec![
            needs[0].then_some(g_phi),
            needs[1].then_some(g_mu),
            needs[2].then_some(g_sigma),
            needs[3].then_some(g_z),
        ])
    }
}

/// `Σ_k Σ_j 1 / (Σ_k[j][j] + ε)`; input `Σ` flattened `K × D²`, output `1 × 1`.
pub struct CovariancePenaltyOp {
    pub dim: usize,
    pub eps: f64,
}

impl Primitive for CovariancePenaltyOp {
    fn name(&self) -> &'static str {
        "covariance_penalty"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        let sigma = inputs[0];
        let d = self.dim;
        if sigma.cols() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                actual: sigma.cols(),
            });
        }
        let mut total = 0.0;
        for (k, row) in sigma.iter_rows().enumerate() {
            for j in 0..d {
                let v = row[j * d + j] + self.eps;
                if v == 0.0 {
                    return Err(Error::Overflow(format!(
                        "zero covariance diagonal at component {k}, entry {j}"
                    )));
                }
                total += 1.0 / v;
            }
        }
        if !total.is_finite() {
            return Err(Error::Overflow("covariance penalty is not finite".into()));
        }
        Ok(Matrix::scalar(total))
    }

    fn backward(&self, inputs: &[&Matrix], _: &Matrix, grad: &Matrix, _: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let sigma = inputs[0];
        let d = self.dim;
        let g = grad.get(0, 0);
        let mut out = Matrix::zeros(sigma.rows(), sigma.cols());
        for k in 0..sigma.rows() {
            for j in 0..d {
                let v = sigma.get(k, j * d + j) + self.eps;
                out.set(k, j * d + j, -g / (v * v));
            }
        }
        Ok(vec![Some(out)])
    }
}

/// Tape handles for one batch's mixture estimate.
#[derive(Clone, Copy, Debug)]
pub struct GmmVars {
    pub phi: Var,
    pub mu: Var,
    pub sigma: Var,
}

impl GmmVars {
    pub fn estimate(tape: &mut Tape, gamma: Var, z: Var, eps: f64) -> Result<Self> {
        let phi = tape.apply(MixtureWeightOp, &[gamma])?;
        let mu = tape.apply(MixtureMeanOp, &[gamma, z])?;
        let sigma = tape.apply(MixtureCovarianceOp { fill: eps }, &[gamma, z, mu])?;
        Ok(Self { phi, mu, sigma })
    }

    pub fn energy(&self, tape: &mut Tape, z: Var, eps: f64) -> Result<Var> {
        tape.apply(EnergyOp { eps }, &[self.phi, self.mu, self.sigma, z])
    }

    pub fn penalty(&self, tape: &mut Tape, dim: usize, eps: f64) -> Result<Var> {
        tape.apply(CovariancePenaltyOp { dim, eps }, &[self.sigma])
    }

    pub fn to_params(&self, tape: &Tape) -> GmmParams {
        GmmParams::from_parts(tape.value(self.phi), tape.value(self.mu), tape.value(self.sigma))
    }
}

/// Batch mixture estimate. Empty components take the batch mean and `ε·I`.
pub fn estimate_gmm(gamma: &Matrix, z: &Matrix, eps: f64) -> Result<GmmParams> {
    check_batch(gamma, z)?;
    for (i, row) in gamma.iter_rows().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-8 || row.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "membership row {i} is not a probability vector"
            )));
        }
    }
    let phi = MixtureWeightOp.forward(&[gamma])?;
    let mu = MixtureMeanOp.forward(&[gamma, z])?;
    let sigma = MixtureCovarianceOp { fill: eps }.forward(&[gamma, z, &mu])?;
    Ok(GmmParams::from_parts(&phi, &mu, &sigma))
}

/// Energies of every row of `z`, `N` values.
pub fn energy_batch(z: &Matrix, gmm: &GmmParams, eps: f64) -> Result<Vec<f64>> {
    let phi = Matrix::row_vector(gmm.phi.clone());
    Ok(EnergyOp { eps }
        .forward(&[&phi, &gmm.mu, &gmm.sigma_flat(), z])?
        .into_data())
}

pub fn energy(z: &[f64], gmm: &GmmParams, eps: f64) -> Result<f64> {
    Ok(energy_batch(&Matrix::row_vector(z.to_vec()), gmm, eps)?[0])
}

/// Sum of reciprocal covariance diagonals.
pub fn cov_penalty(gmm: &GmmParams) -> Result<f64> {
    cov_penalty_regularized(gmm, 0.0)
}

/// Sum of reciprocal diagonals of `Σ_k + εI`.
pub fn cov_penalty_regularized(gmm: &GmmParams, eps: f64) -> Result<f64> {
    let out = CovariancePenaltyOp { dim: gmm.dim(), eps }.forward(&[&gmm.sigma_flat()])?;
    Ok(out.data()[0])
}
