//! Versioned, line-oriented text format for a trained model.
//!
//! Sections appear in a fixed order: `[model]`, optional `[preprocessing]`,
//! optional `[som]`, `[compression]`, `[estimation]`, `[gmm]`, `[log]`,
//! `[end]`. Reals are written with 17 significant digits so a load
//! reproduces every parameter exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::compression::{CompressionNet, Dense, ReconstructionMode};
use crate::data::{PreprocessStats, RecordSchema};
use crate::error::{Error, Result};
use crate::estimation::{EstimationNet, GmmParams};
use crate::eval::ThresholdPolicy;
use crate::numeric::Matrix;
use crate::som::{SomConfig, SomModel};
use crate::trainer::{EpochLog, ObjectiveTerms, TrainedModel};

const MAGIC: &str = "somdagmm-model 1";

/// A trained model plus the evaluation threshold it was saved with.
/// `threshold: None` means "use the evaluated set's anomaly ratio".
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub model: TrainedModel,
    pub threshold: Option<ThresholdPolicy>,
}

fn real(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

fn reals(out: &mut String, values: &[f64]) {
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        real(out, v);
    }
    out.push('\n');
}

fn matrix(out: &mut String, m: &Matrix) {
    writeln!(out, "matrix {} {}", m.rows(), m.cols()).unwrap();
    for row in m.iter_rows() {
        reals(out, row);
    }
}

fn layers(out: &mut String, name: &str, ls: &[Dense]) {
    writeln!(out, "{name} {}", ls.len()).unwrap();
    for l in ls {
        matrix(out, &l.weights);
        matrix(out, &l.bias);
    }
}

impl ModelFile {
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "[model]").unwrap();
        writeln!(out, "input-dim {}", m.input_dim()).unwrap();
        writeln!(out, "latent-dim {}", m.layout().dim()).unwrap();
        writeln!(out, "reconstruction {}", m.reconstruction).unwrap();
        out.push_str("eps ");
        reals(&mut out, &[m.eps]);
        match self.threshold {
            Some(t) => writeln!(out, "threshold {t}").unwrap(),
            None => writeln!(out, "threshold test-anomaly-ratio").unwrap(),
        }
        if let Some(p) = &m.preprocessing {
            writeln!(out, "[preprocessing]").unwrap();
            writeln!(out, "schema-hash {}", p.schema.hash()).unwrap();
            let text = p.schema.to_text();
            writeln!(out, "schema-lines {}", text.lines().count()).unwrap();
            out.push_str(&text);
            writeln!(out, "continuous {}", p.min.len()).unwrap();
            reals(&mut out, &p.min);
            reals(&mut out, &p.max);
        }
        if let Some(s) = &m.som {
            let c = s.config();
            writeln!(out, "[som]").unwrap();
            writeln!(out, "grid {} {}", c.grid_width, c.grid_height).unwrap();
            out.push_str("learning-rate ");
            reals(&mut out, &[c.learning_rate]);
            writeln!(out, "neighborhood {}", c.neighborhood).unwrap();
            out.push_str("initial-radius ");
            reals(&mut out, &[c.initial_radius]);
            match c.iterations {
                Some(n) => writeln!(out, "iterations {n}").unwrap(),
                None => writeln!(out, "iterations auto").unwrap(),
            }
            writeln!(out, "seed {}", c.seed).unwrap();
            matrix(&mut out, s.weights());
        }
        writeln!(out, "[compression]").unwrap();
        layers(&mut out, "encoder", m.compression.encoder());
        layers(&mut out, "decoder", m.compression.decoder());
        writeln!(out, "[estimation]").unwrap();
        out.push_str("dropout ");
        reals(&mut out, &[m.estimation.dropout()]);
        layers(&mut out, "layers", m.estimation.layers());
        writeln!(out, "[gmm]").unwrap();
        let g = &m.final_gmm;
        writeln!(out, "components {} dim {}", g.components(), g.dim()).unwrap();
        reals(&mut out, &g.phi);
        matrix(&mut out, &g.mu);
        for s in &g.sigma {
            matrix(&mut out, s);
        }
        writeln!(out, "[log]").unwrap();
        writeln!(out, "epochs {}", m.log.len()).unwrap();
        for e in &m.log {
            let t = e.terms;
            write!(out, "{} ", e.epoch).unwrap();
            reals(&mut out, &[t.reconstruction, t.energy, t.penalty, t.total]);
        }
        writeln!(out, "[end]").unwrap();
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Parse(message) => Error::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Cursor::new(text);
        if r.line()? != MAGIC {
            return Err(Error::Parse(format!("expected '{MAGIC}' header")));
        }
        r.exact("[model]")?;
        let input_dim: usize = r.value("input-dim")?;
        let latent_dim: usize = r.value("latent-dim")?;
        let reconstruction: ReconstructionMode = r
            .keyed("reconstruction")?
            .parse()
            .map_err(|_| Error::Parse("bad reconstruction mode".into()))?;
        let eps = r.real("eps")?;
        let threshold = match r.keyed("threshold")? {
            "test-anomaly-ratio" => None,
            t => Some(t.parse().map_err(|_| Error::Parse(format!("bad threshold '{t}'")))?),
        };

        let mut preprocessing = None;
        if r.peek() == Some("[preprocessing]") {
            r.line()?;
            let hash = r.keyed("schema-hash")?.to_string();
            let n: usize = r.value("schema-lines")?;
            let mut schema_text = String::new();
            for _ in 0..n {
                schema_text.push_str(r.line()?);
                schema_text.push('\n');
            }
            let schema: RecordSchema = schema_text
                .parse()
                .map_err(|e| Error::Parse(format!("embedded schema: {e}")))?;
            if schema.hash() != hash {
                return Err(Error::Parse("embedded schema does not match its hash".into()));
            }
            let count: usize = r.value("continuous")?;
            let min = r.reals(count)?;
            let max = r.reals(count)?;
            preprocessing = Some(PreprocessStats::new(schema, min, max)?);
        }

        let mut som = None;
        if r.peek() == Some("[som]") {
            r.line()?;
            let grid = r.keyed("grid")?;
            let (w, h) = grid
                .split_once(' ')
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                .ok_or_else(|| Error::Parse(format!("bad grid '{grid}'")))?;
            let learning_rate = r.real("learning-rate")?;
            let neighborhood = r
                .keyed("neighborhood")?
                .parse()
                .map_err(|_| Error::Parse("bad neighborhood".into()))?;
            let initial_radius = r.real("initial-radius")?;
            let iterations = match r.keyed("iterations")? {
                "auto" => None,
                n => Some(n.parse().map_err(|_| Error::Parse(format!("bad iterations '{n}'")))?),
            };
            let seed = r.value("seed")?;
            let config = SomConfig {
                grid_width: w,
                grid_height: h,
                learning_rate,
                neighborhood,
                initial_radius,
                iterations,
                seed,
            };
            som = Some(SomModel::from_weights(config, r.matrix()?)?);
        }

        r.exact("[compression]")?;
        let encoder = r.layers("encoder")?;
        let decoder = r.layers("decoder")?;
        let compression = CompressionNet::from_layers(encoder, decoder)?;
        r.exact("[estimation]")?;
        let dropout = r.real("dropout")?;
        let estimation = EstimationNet::from_layers(r.layers("layers")?, dropout)?;

        r.exact("[gmm]")?;
        let header = r.keyed("components")?;
        let (k, d): (usize, usize) = match header.split_whitespace().collect::<Vec<_>>()[..] {
            [k, "dim", d] => (
                k.parse().map_err(|_| Error::Parse("bad component count".into()))?,
                d.parse().map_err(|_| Error::Parse("bad gmm dim".into()))?,
            ),
            _ => return Err(Error::Parse(format!("bad gmm header '{header}'"))),
        };
        let phi = r.reals(k)?;
        let mu = r.matrix()?;
        let sigma = (0..k).map(|_| r.matrix()).collect::<Result<Vec<_>>>()?;
        let final_gmm = GmmParams::new(phi, mu, sigma)?;
        if final_gmm.dim() != d {
            return Err(Error::Parse("gmm dimension does not match its header".into()));
        }

        r.exact("[log]")?;
        let epochs: usize = r.value("epochs")?;
        let mut log = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let line = r.line()?;
            let mut parts = line.split_whitespace();
            let epoch = parts
                .next()
                .and_then(|e| e.parse().ok())
                .ok_or_else(|| Error::Parse("bad log epoch".into()))?;
            let v = parse_reals(parts, 4)?;
            log.push(EpochLog {
                epoch,
                terms: ObjectiveTerms {
                    reconstruction: v[0],
                    energy: v[1],
                    penalty: v[2],
                    total: v[3],
                },
            });
        }
        r.exact("[end]")?;

        let model = TrainedModel {
            som,
            compression,
            estimation,
            final_gmm,
            reconstruction,
            eps,
            preprocessing,
            log,
        };
        check_consistency(&model, input_dim, latent_dim)?;
        Ok(Self { model, threshold })
    }
}

fn check_consistency(m: &TrainedModel, input_dim: usize, latent_dim: usize) -> Result<()> {
    let latent = m.layout().dim();
    let ok = m.input_dim() == input_dim
        && latent == latent_dim
        && m.estimation.latent_dim() == latent
        && m.final_gmm.dim() == latent
        && m.final_gmm.components() == m.estimation.components()
        && m.som.as_ref().is_none_or(|s| s.dim() == input_dim)
        && m.preprocessing.as_ref().is_none_or(|p| p.encoded_dim() == input_dim);
    if ok {
        Ok(())
    } else {
        Err(Error::Parse("sub-model dimensions are inconsistent".into()))
    }
}

fn parse_reals<'a>(parts: impl Iterator<Item = &'a str>, n: usize) -> Result<Vec<f64>> {
    let v = parts
        .map(|p| p.parse::<f64>().map_err(|_| Error::Parse(format!("bad real '{p}'"))))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != n {
        return Err(Error::Parse(format!("expected {n} reals, found {}", v.len())));
    }
    Ok(v)
}

struct Cursor<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().peekable(),
            at: 0,
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.lines.peek().copied()
    }

    fn line(&mut self) -> Result<&'a str> {
        self.at += 1;
        self.lines
            .next()
            .ok_or_else(|| Error::Parse(format!("unexpected end of file at line {}", self.at)))
    }

    fn exact(&mut self, want: &str) -> Result<()> {
        let got = self.line()?;
        if got != want {
            return Err(Error::Parse(format!(
                "line {}: expected '{want}', found '{got}'",
                self.at
            )));
        }
        Ok(())
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.line()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::Parse(format!("line {}: expected '{key}'", self.at)))
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key)?;
        v.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad value '{v}' for '{key}'", self.at)))
    }

    fn real(&mut self, key: &str) -> Result<f64> {
        self.value(key)
    }

    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        let line = self.line()?;
        if n == 0 && line.trim().is_empty() {
            return Ok(Vec::new());
        }
        parse_reals(line.split_whitespace(), n).map_err(|e| Error::Parse(format!("line {}: {e}", self.at)))
    }

    fn matrix(&mut self) -> Result<Matrix> {
        let header = self.keyed("matrix")?;
        let (rows, cols) = header
            .split_once(' ')
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
            .ok_or_else(|| Error::Parse(format!("line {}: bad matrix header", self.at)))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.reals(cols)?);
        }
        Matrix::new(rows, cols, data)
    }

    fn layers(&mut self, key: &str) -> Result<Vec<Dense>> {
        let n: usize = self.value(key)?;
        (0..n)
            .map(|_| {
                let w = self.matrix()?;
                let b = self.matrix()?;
                Dense::new(w, b)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::AutoencoderConfig;
    use crate::data::{fit_transform, parse_nslkdd_reader, UnseenPolicy};
    use crate::estimation::EstimationConfig;
    use crate::trainer::{train, ModelConfig, TrainConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny(d: usize, use_som: bool) -> ModelConfig {
        ModelConfig {
            use_som,
            som: SomConfig {
                grid_width: 3,
                grid_height: 2,
                initial_radius: 1.5,
                iterations: Some(200),
                ..SomConfig::default()
            },
            autoencoder: AutoencoderConfig {
                layer_sizes: vec![d, 3, 1],
                ..AutoencoderConfig::for_input(d)
            },
            estimation: EstimationConfig {
                hidden: vec![3],
                components: 2,
                ..EstimationConfig::default()
            },
            reconstruction: ReconstructionMode::Both,
        }
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-2,
            batch_size: 16,
            epochs: 2,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn data(n: usize, d: usize) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        Matrix::from_fn(n, d, |_, _| rng.gen())
    }

    #[test]
    fn round_trip_reproduces_scores_bit_for_bit() {
        let x = data(60, 4);
        let model = train(&x, &tiny(4, true), &cfg()).unwrap();
        let file = ModelFile {
            model,
            threshold: Some(ThresholdPolicy::Percentile(0.1)),
        };
        let back = ModelFile::from_text(&file.to_text()).unwrap();
        assert_eq!(back, file);
        let probe = data(1000, 4).scale(3.0);
        let a = file.model.score_batch(&probe).unwrap();
        let b = back.model.score_batch(&probe).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(back.to_text(), file.to_text());
    }

    #[test]
    fn ablation_model_has_no_som_section() {
        let x = data(40, 3);
        let model = train(&x, &tiny(3, false), &cfg()).unwrap();
        let text = ModelFile { model, threshold: None }.to_text();
        assert!(!text.contains("[som]"));
        assert!(text.contains("latent-dim 3"));
        let back = ModelFile::from_text(&text).unwrap();
        assert!(back.model.som.is_none());
        assert_eq!(back.threshold, None);
    }

    #[test]
    fn preprocessing_is_embedded() {
        let line = "0,tcp,private,S0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,123,6,1.00,1.00,0.00,0.00,0.05,0.07,0.00,255,26,0.10,0.05,0.00,0.00,1.00,1.00,0.00,0.00,neptune,21\n\
                    2,udp,other,SF,146,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,13,1,0.00,0.00,0.00,0.00,0.08,0.15,0.00,255,1,0.00,0.60,0.88,0.00,0.00,0.00,0.00,0.00,normal,15\n";
        let schema = RecordSchema::nslkdd();
        let (recs, _) = parse_nslkdd_reader(line.as_bytes(), &schema, 0.0).unwrap();
        let (ds, stats, _) = fit_transform(&recs, &schema, UnseenPolicy::WarnZeros).unwrap();
        let mut model = train(&ds.features, &tiny(122, true), &TrainConfig { batch_size: 2, ..cfg() }).unwrap();
        model.preprocessing = Some(stats);
        let file = ModelFile { model, threshold: None };
        let back = ModelFile::from_text(&file.to_text()).unwrap();
        assert_eq!(back, file);
        let raw = back.model.score_raw(&recs[0].values, UnseenPolicy::Reject).unwrap();
        assert_eq!(raw, file.model.score(ds.features.row(0)).unwrap());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let x = data(30, 3);
        let model = train(&x, &tiny(3, true), &cfg()).unwrap();
        let text = ModelFile { model, threshold: None }.to_text();
        assert!(ModelFile::from_text(&text.replace(MAGIC, "somdagmm-model 9")).is_err());
        assert!(ModelFile::from_text(&text.replace("[end]", "")).is_err());
        assert!(ModelFile::from_text(&text.replace("latent-dim 5", "latent-dim 4")).is_err());
        let truncated: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(ModelFile::from_text(&truncated).is_err());
    }
}
