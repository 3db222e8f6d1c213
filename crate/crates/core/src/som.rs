//! Kohonen self-organizing map on a rectangular grid.
//!
//! Units are indexed `(i, j)` with `i < grid_width`, `j < grid_height` and
//! stored row-major in `i`, so lexicographic `(i, j)` order is storage order.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{squared_distance, Matrix};
use crate::rng::{self, Stream};

const MAX_DEFAULT_ITERATIONS: usize = 500_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighborhood {
    /// Uniform update for every unit strictly inside the radius (Chebyshev grid distance).
    Bubble,
    /// `exp(-d²/2r²)` weighting over Euclidean grid distance, no cutoff.
    Gaussian,
}

impl fmt::Display for Neighborhood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Neighborhood::Bubble => "bubble",
            Neighborhood::Gaussian => "gaussian",
        })
    }
}

impl FromStr for Neighborhood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bubble" => Ok(Neighborhood::Bubble),
            "gaussian" => Ok(Neighborhood::Gaussian),
            other => Err(Error::Config(format!("unknown neighborhood {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SomConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    pub learning_rate: f64,
    pub neighborhood: Neighborhood,
    pub initial_radius: f64,
    /// `None` selects 10 × sample count, capped at 500,000.
    pub iterations: Option<usize>,
    pub seed: u64,
}

impl Default for SomConfig {
    fn default() -> Self {
        Self {
            grid_width: 10,
            grid_height: 10,
            learning_rate: 0.6,
            neighborhood: Neighborhood::Bubble,
            initial_radius: 5.0,
            iterations: None,
            seed: 0,
        }
    }
}

impl SomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_width < 2 || self.grid_height < 2 {
            return Err(Error::Config(format!(
                "SOM grid must be at least 2x2, got {}x{}",
                self.grid_width, self.grid_height
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "SOM learning rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.initial_radius > 0.0) || !self.initial_radius.is_finite() {
            return Err(Error::Config(format!(
                "SOM initial radius must be > 0, got {}",
                self.initial_radius
            )));
        }
        if self.iterations == Some(0) {
            return Err(Error::Config("SOM iteration budget must be positive".into()));
        }
        Ok(())
    }

    pub fn units(&self) -> usize {
        self.grid_width * self.grid_height
    }

    pub fn iteration_budget(&self, samples: usize) -> usize {
        self.iterations
            .unwrap_or_else(|| (10 * samples).min(MAX_DEFAULT_ITERATIONS))
            .max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SomModel {
    config: SomConfig,
    /// One row per unit, `grid_width * grid_height` rows.
    weights: Matrix,
}

impl SomModel {
    /// Builds a model from explicit weights (one row per unit, lexicographic order).
    pub fn from_weights(config: SomConfig, weights: Matrix) -> Result<Self> {
        config.validate()?;
        if weights.rows() != config.units() {
            return Err(Error::DimensionMismatch {
                expected: config.units(),
                actual: weights.rows(),
            });
        }
        if weights.cols() == 0 {
            return Err(Error::InvalidArgument("SOM weights need at least one dimension".into()));
        }
        if !weights.is_finite() {
            return Err(Error::InvalidArgument("SOM weights must be finite".into()));
        }
        Ok(Self { config, weights })
    }

    /// Draws every unit uniformly inside the per-feature `[min, max]` box of `data`.
    pub fn initialize(data: &Matrix, config: &SomConfig) -> Result<Self> {
        config.validate()?;
        check_data(data)?;
        let dim = data.cols();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for x in data.iter_rows() {
            for k in 0..dim {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        let mut rng = rng::stream(config.seed, Stream::SomInit);
        let weights = Matrix::from_fn(config.units(), dim, |_, k| lo[k] + (hi[k] - lo[k]) * rng.gen::<f64>());
        if !weights.is_finite() {
            return Err(Error::InvalidArgument("SOM training data must be finite".into()));
        }
        Ok(Self {
            config: config.clone(),
            weights,
        })
    }

    pub fn config(&self) -> &SomConfig {
        &self.config
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weight(&self, i: usize, j: usize) -> &[f64] {
        self.weights.row(i * self.config.grid_height + j)
    }

    fn coords(&self, unit: usize) -> (usize, usize) {
        (unit / self.config.grid_height, unit % self.config.grid_height)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn bmu_unit(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (u, w) in self.weights.iter_rows().enumerate() {
            let d = squared_distance(x, w);
            if d < best_d {
                best = u;
                best_d = d;
            }
        }
        best
    }

    /// Best matching unit; ties go to the lexicographically smallest `(i, j)`.
    pub fn bmu(&self, x: &[f64]) -> Result<(usize, usize)> {
        self.check_dim(x)?;
        Ok(self.coords(self.bmu_unit(x)))
    }

    /// Normalized BMU coordinates `(i / (w-1), j / (h-1))`.
    pub fn encode(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (i, j) = self.bmu(x)?;
        Ok(self.normalize(i, j))
    }

    pub fn normalize(&self, i: usize, j: usize) -> (f64, f64) {
        (
            i as f64 / (self.config.grid_width - 1) as f64,
            j as f64 / (self.config.grid_height - 1) as f64,
        )
    }

    /// Encodes every row into an `N × 2` matrix.
    pub fn encode_batch(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: data.cols(),
            });
        }
        let mut out = Matrix::zeros(data.rows(), 2);
        for (r, x) in data.iter_rows().enumerate() {
            let (i, j) = self.coords(self.bmu_unit(x));
            let (a, b) = self.normalize(i, j);
            out.set(r, 0, a);
            out.set(r, 1, b);
        }
        Ok(out)
    }

    /// Mean Euclidean distance from each sample to its BMU weight.
    pub fn quantization_error(&self, data: &Matrix) -> Result<f64> {
        check_data(data)?;
        if data.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: data.cols(),
            });
        }
        let total: f64 = data
            .iter_rows()
            .map(|x| squared_distance(x, self.weights.row(self.bmu_unit(x))).sqrt())
            .sum();
        Ok(total / data.rows() as f64)
    }

    fn update(&mut self, x: &[f64], bmu: usize, rate: f64, radius: f64) {
        let (bi, bj) = self.coords(bmu);
        let neighborhood = self.config.neighborhood;
        for unit in 0..self.weights.rows() {
            let (i, j) = self.coords(unit);
            let di = i.abs_diff(bi) as f64;
            let dj = j.abs_diff(bj) as f64;
            let h = match neighborhood {
                Neighborhood::Bubble => {
                    if di.max(dj) < radius {
                        1.0
                    } else {
                        continue;
                    }
                }
                Neighborhood::Gaussian => (-(di * di + dj * dj) / (2.0 * radius * radius)).exp(),
            };
            let step = rate * h;
            for (w, &v) in self.weights.row_mut(unit).iter_mut().zip(x) {
                *w += step * (v - *w);
            }
        }
    }

    /// Runs competitive learning from the current weights.
    ///
    /// Samples are visited cyclically over a seeded shuffle; learning rate
    /// decays linearly to 1% of its initial value and the radius to 1.
    pub fn fit(&mut self, data: &Matrix) -> Result<()> {
        check_data(data)?;
        if data.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: data.cols(),
            });
        }
        let budget = self.config.iteration_budget(data.rows());
        let mut order: Vec<usize> = (0..data.rows()).collect();
        order.shuffle(&mut rng::stream(self.config.seed, Stream::SomOrder));

        let rate0 = self.config.learning_rate;
        let radius0 = self.config.initial_radius;
        for t in 0..budget {
            let progress = t as f64 / budget as f64;
            let rate = rate0 + (rate0 / 100.0 - rate0) * progress;
            let radius = radius0 + (1.0 - radius0) * progress;
            let x = data.row(order[t % order.len()]);
            let bmu = self.bmu_unit(x);
            self.update(x, bmu, rate, radius);
        }
        Ok(())
    }
}

fn check_data(data: &Matrix) -> Result<()> {
    if data.rows() == 0 {
        return Err(Error::EmptyInput("SOM needs at least one sample".into()));
    }
    if data.cols() == 0 {
        return Err(Error::InvalidArgument("SOM samples need at least one feature".into()));
    }
    Ok(())
}

/// Initializes and trains a map on `data`.
pub fn train_som(data: &Matrix, config: &SomConfig) -> Result<SomModel> {
    let mut model = SomModel::initialize(data, config)?;
    model.fit(data)?;
    Ok(model)
}
