//! Policy embeddings: an autoencoder trained on unevaluated samples, and a fixed random
//! projection used as the ablation baseline.
//!
//! During search only the encoder runs. The decoder exists for pretraining and
//! reconstruction diagnostics.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::net::{activations_for, mse_loss, Activation, AdamConfig, AdamState, DenseNet, Gradients, NetDocument};
use crate::problems::Bounds;
use crate::seed;

/// Per-coordinate standardization `(x - shift) / scale`, with `scale > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Self {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Fits mean and standard deviation; coordinates with (near) zero spread keep scale 1.
    pub fn fit(samples: &[Vec<f64>]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot fit normalization to no samples".into()))?;
        let dim = first.len();
        let count = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            check_dim("normalization sample", dim, s.len())?;
            mean.iter_mut().zip(s).for_each(|(m, v)| *m += v / count);
        }
        let mut var = vec![0.0; dim];
        for s in samples {
            var.iter_mut()
                .zip(s.iter().zip(&mean))
                .for_each(|(acc, (v, m))| *acc += (v - m) * (v - m) / count);
        }
        let scale = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Self { shift: mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// How pretraining vectors are generated. No fitness evaluations are spent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PretrainSampler {
    /// Pick one of `anchors` points uniform in `anchor_bounds`, add `spread * N(0, I)`.
    GaussianMixture {
        anchors: usize,
        anchor_bounds: Bounds,
        spread: f64,
    },
    /// Draw around the given search-distribution means with step size `sigma`, the way
    /// the optimizer samples its first candidates.
    Population { means: Vec<Vec<f64>>, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    pub samples: Vec<Vec<f64>>,
    pub normalization: Normalization,
}

impl EmbeddingDataset {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        let normalization = Normalization::fit(&samples)?;
        Ok(Self {
            samples,
            normalization,
        })
    }

    pub fn dim(&self) -> usize {
        self.normalization.dim()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn generate_pretraining_samples(
    count: usize,
    dim: usize,
    sampler: &PretrainSampler,
    seed: u64,
) -> Result<EmbeddingDataset> {
    if count == 0 {
        return Err(Error::InvalidArgument("pretraining sample count must be >= 1".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("pretraining dimension must be >= 1".into()));
    }
    let mut rng = seed::stream(seed, &[seed::tag::PRETRAIN_DATA]);
    let samples = match sampler {
        PretrainSampler::GaussianMixture {
            anchors,
            anchor_bounds,
            spread,
        } => {
            if *anchors == 0 || !(*spread >= 0.0) {
                return Err(Error::InvalidArgument(
                    "mixture needs at least one anchor and a non-negative spread".into(),
                ));
            }
            let centers: Vec<Vec<f64>> = (0..*anchors)
                .map(|_| {
                    (0..dim)
                        .map(|_| anchor_bounds.lower + anchor_bounds.width() * rng.random::<f64>())
                        .collect()
                })
                .collect();
            (0..count)
                .map(|_| {
                    let center = &centers[rng.random_range(0..centers.len())];
                    center
                        .iter()
                        .map(|c| {
                            let xi: f64 = StandardNormal.sample(&mut rng);
                            c + spread * xi
                        })
                        .collect()
                })
                .collect()
        }
        PretrainSampler::Population { means, sigma } => {
            if means.is_empty() || !(*sigma >= 0.0) {
                return Err(Error::InvalidArgument(
                    "population sampler needs means and a non-negative sigma".into(),
                ));
            }
            for m in means {
                check_dim("population sampler mean", dim, m.len())?;
            }
            (0..count)
                .map(|i| {
                    means[i % means.len()]
                        .iter()
                        .map(|c| {
                            let xi: f64 = StandardNormal.sample(&mut rng);
                            c + sigma * xi
                        })
                        .collect()
                })
                .collect()
        }
    };
    EmbeddingDataset::new(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    pub latent_dim: usize,
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub adam: AdamConfig,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            latent_dim: 32,
            hidden: vec![256, 64],
            hidden_activation: Activation::Tanh,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    encoder: DenseNet,
    decoder: DenseNet,
    normalization: Normalization,
    latent_scale: f64,
    adam: AdamConfig,
}

impl Autoencoder {
    /// Builds a randomly initialized autoencoder for data with the given normalization.
    pub fn new(normalization: Normalization, config: &AutoencoderConfig, seed: u64) -> Result<Self> {
        let n = normalization.dim();
        let m = config.latent_dim;
        if m == 0 || m >= n {
            return Err(Error::InvalidArgument(format!(
                "latent dimension {m} must be in 1..{n}"
            )));
        }
        let mut enc_dims = vec![n];
        enc_dims.extend(&config.hidden);
        enc_dims.push(m);
        let dec_dims: Vec<usize> = enc_dims.iter().rev().copied().collect();
        let mut rng = seed::stream(seed, &[seed::tag::AE_INIT]);
        let act = config.hidden_activation;
        let encoder = DenseNet::new(
            enc_dims.clone(),
            activations_for(&enc_dims, act, Activation::Identity),
            &mut rng,
        )?;
        let decoder = DenseNet::new(
            dec_dims.clone(),
            activations_for(&dec_dims, act, Activation::Identity),
            &mut rng,
        )?;
        Ok(Self {
            encoder,
            decoder,
            normalization,
            latent_scale: 1.0,
            adam: config.adam,
        })
    }

    pub fn for_dataset(data: &EmbeddingDataset, config: &AutoencoderConfig, seed: u64) -> Result<Self> {
        Self::new(data.normalization.clone(), config, seed)
    }

    pub fn from_parts(
        encoder: DenseNet,
        decoder: DenseNet,
        normalization: Normalization,
        latent_scale: f64,
    ) -> Result<Self> {
        let n = normalization.dim();
        check_dim("encoder input", n, encoder.input_dim())?;
        check_dim("decoder output", n, decoder.output_dim())?;
        check_dim("decoder input", encoder.output_dim(), decoder.input_dim())?;
        if encoder.output_dim() >= n {
            return Err(Error::InvalidArgument("autoencoder must compress".into()));
        }
        if !(latent_scale.is_finite() && latent_scale > 0.0) {
            return Err(Error::InvalidArgument("latent scale must be positive".into()));
        }
        Ok(Self {
            encoder,
            decoder,
            normalization,
            latent_scale,
            adam: AdamConfig::default(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encoder(&self) -> &DenseNet {
        &self.encoder
    }

    pub fn encoder_mut(&mut self) -> &mut DenseNet {
        &mut self.encoder
    }

    pub fn decoder(&self) -> &DenseNet {
        &self.decoder
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn latent_scale(&self) -> f64 {
        self.latent_scale
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("autoencoder input", self.input_dim(), x.len())?;
        let mut code = self.encoder.predict(&self.normalization.apply(x))?;
        if self.latent_scale != 1.0 {
            code.iter_mut().for_each(|v| *v *= self.latent_scale);
        }
        Ok(code)
    }

    /// Sets the output scale so that codes of `data` have unit root-mean-square norm.
    pub fn calibrate_latent_scale(&mut self, data: &EmbeddingDataset) -> Result<()> {
        self.latent_scale = 1.0;
        let codes = data
            .samples
            .iter()
            .map(|x| self.encode(x))
            .collect::<Result<Vec<_>>>()?;
        self.latent_scale = unit_rms_scale(&codes);
        Ok(())
    }

    /// Mean squared reconstruction error in the original (unnormalized) coordinates.
    pub fn reconstruction_mse(&self, data: &EmbeddingDataset) -> Result<f64> {
        let mut total = 0.0;
        for x in &data.samples {
            check_dim("autoencoder input", self.input_dim(), x.len())?;
            let code = self.encoder.predict(&self.normalization.apply(x))?;
            let recon = self.normalization.invert(&self.decoder.predict(&code)?);
            total += recon.iter().zip(x).map(|(r, v)| (r - v).powi(2)).sum::<f64>() / x.len() as f64;
        }
        Ok(total / data.len() as f64)
    }

    pub fn to_document(&self) -> AutoencoderDocument {
        AutoencoderDocument {
            format: AE_FORMAT.to_string(),
            version: AE_FORMAT_VERSION,
            encoder: self.encoder.to_document(),
            decoder: self.decoder.to_document(),
            normalization: self.normalization.clone(),
            latent_scale: self.latent_scale,
        }
    }

    pub fn from_document(doc: AutoencoderDocument) -> Result<Self> {
        if doc.format != AE_FORMAT || doc.version != AE_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported autoencoder checkpoint {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.normalization.scale.len() != doc.normalization.shift.len()
            || doc.normalization.scale.iter().any(|s| !(*s > 0.0))
        {
            return Err(Error::Checkpoint("normalization record is not invertible".into()));
        }
        let encoder = DenseNet::from_document(doc.encoder)?;
        let decoder = DenseNet::from_document(doc.decoder)?;
        Self::from_parts(encoder, decoder, doc.normalization, doc.latent_scale)
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_document())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Self::from_document(doc)
    }
}

fn unit_rms_scale(codes: &[Vec<f64>]) -> f64 {
    let mean_sq = codes
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / codes.len().max(1) as f64;
    if mean_sq > 1e-24 {
        1.0 / mean_sq.sqrt()
    } else {
        1.0
    }
}

pub const AE_FORMAT: &str = "aehnn-autoencoder";
pub const AE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderDocument {
    pub format: String,
    pub version: u32,
    pub encoder: NetDocument,
    pub decoder: NetDocument,
    pub normalization: Normalization,
    pub latent_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Minimizes the per-coordinate reconstruction MSE in normalized space with mini-batch
/// Adam. Returns the mean training loss of each epoch.
pub fn train_autoencoder(
    ae: &mut Autoencoder,
    data: &EmbeddingDataset,
    options: TrainOptions,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("autoencoder training data is empty".into()));
    }
    check_dim("training data", ae.input_dim(), data.dim())?;
    if options.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    if options.epochs == 0 {
        return Ok(Vec::new());
    }

    let normalized: Vec<Vec<f64>> = data.samples.iter().map(|x| ae.normalization.apply(x)).collect();
    let mut enc_adam = AdamState::new(ae.encoder.num_params(), ae.adam);
    let mut dec_adam = AdamState::new(ae.decoder.num_params(), ae.adam);
    let mut enc_grads = Gradients::zeros_like(&ae.encoder);
    let mut dec_grads = Gradients::zeros_like(&ae.decoder);
    let mut order: Vec<usize> = (0..normalized.len()).collect();
    let mut rng = seed::stream(options.seed, &[seed::tag::AE_TRAIN]);
    let mut history = Vec::with_capacity(options.epochs);

    for epoch in 0..options.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(options.batch_size) {
            enc_grads.reset();
            dec_grads.reset();
            for &i in batch {
                let x = &normalized[i];
                let enc = ae.encoder.forward(x)?;
                let dec = ae.decoder.forward(&enc.output)?;
                let (loss, grad) = mse_loss(&dec.output, x);
                if !loss.is_finite() {
                    return Err(Error::Divergence {
                        stage: "epoch",
                        index: epoch,
                    });
                }
                epoch_loss += loss;
                let code_grad = ae.decoder.accumulate_backward(&dec.cache, &grad, &mut dec_grads)?;
                ae.encoder.accumulate_backward(&enc.cache, &code_grad, &mut enc_grads)?;
            }
            let inv = 1.0 / batch.len() as f64;
            enc_grads.scale(inv);
            dec_grads.scale(inv);
            let step = |e: Error| match e {
                Error::NonFinite(_) => Error::Divergence {
                    stage: "epoch",
                    index: epoch,
                },
                other => other,
            };
            enc_adam.step(ae.encoder.params_mut(), &enc_grads.0).map_err(step)?;
            dec_adam.step(ae.decoder.params_mut(), &dec_grads.0).map_err(step)?;
        }
        history.push(epoch_loss / normalized.len() as f64);
    }
    Ok(history)
}

/// Fixed Gaussian projection `n -> m` applied to normalized inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomProjection {
    matrix: Vec<f64>,
    input_dim: usize,
    latent_dim: usize,
    normalization: Normalization,
    latent_scale: f64,
}

impl RandomProjection {
    pub fn new(normalization: Normalization, latent_dim: usize, seed: u64) -> Result<Self> {
        let n = normalization.dim();
        if latent_dim == 0 || latent_dim >= n {
            return Err(Error::InvalidArgument(format!(
                "latent dimension {latent_dim} must be in 1..{n}"
            )));
        }
        let mut rng = seed::stream(seed, &[seed::tag::PROJECTION]);
        let std = 1.0 / (n as f64).sqrt();
        let matrix = (0..n * latent_dim)
            .map(|_| {
                let xi: f64 = StandardNormal.sample(&mut rng);
                std * xi
            })
            .collect();
        Ok(Self {
            matrix,
            input_dim: n,
            latent_dim,
            normalization,
            latent_scale: 1.0,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("projection input", self.input_dim, x.len())?;
        let z = self.normalization.apply(x);
        Ok(self
            .matrix
            .chunks_exact(self.input_dim)
            .map(|row| self.latent_scale * row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    pub fn calibrate_latent_scale(&mut self, data: &EmbeddingDataset) -> Result<()> {
        self.latent_scale = 1.0;
        let codes = data
            .samples
            .iter()
            .map(|x| self.encode(x))
            .collect::<Result<Vec<_>>>()?;
        self.latent_scale = unit_rms_scale(&codes);
        Ok(())
    }
}

/// The encoder half used by the search. Frozen once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Embedding {
    Autoencoder(Autoencoder),
    RandomProjection(RandomProjection),
}

impl Embedding {
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Embedding::Autoencoder(ae) => ae.encode(x),
            Embedding::RandomProjection(rp) => rp.encode(x),
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Embedding::Autoencoder(ae) => ae.latent_dim(),
            Embedding::RandomProjection(rp) => rp.latent_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Embedding::Autoencoder(ae) => ae.input_dim(),
            Embedding::RandomProjection(rp) => rp.input_dim(),
        }
    }
}
