//! From a validated configuration to a finished run.

use super::config::{EmbeddingKind, RunConfig, SamplerKind};
use crate::embedding::{
    generate_pretraining_samples, train_autoencoder, Autoencoder, Embedding, EmbeddingDataset,
    PretrainSampler, RandomProjection, TrainOptions,
};
use crate::error::{check_dim, Result};
use crate::ncs::{initial_means, RunOutcome, Search, Surrogate, SurrogateKind};
use crate::problems::FitnessProblem;
use crate::surrogate::HnnModel;

pub fn pretraining_dataset(cfg: &RunConfig, problem: &FitnessProblem, seed: u64) -> Result<EmbeddingDataset> {
    let p = &cfg.embedding.pretrain;
    let bounds = cfg.search_bounds(problem);
    let sampler = match p.sampler {
        SamplerKind::Mixture => PretrainSampler::GaussianMixture {
            anchors: p.anchors,
            anchor_bounds: bounds,
            spread: p.spread,
        },
        SamplerKind::Population => PretrainSampler::Population {
            means: initial_means(cfg.search.subpopulations, problem.dim(), bounds, seed),
            sigma: cfg.search.sigma_init,
        },
    };
    generate_pretraining_samples(p.samples, problem.dim(), &sampler, seed)
}

#[derive(Debug, Clone)]
pub struct Pretrained {
    pub autoencoder: Autoencoder,
    pub losses: Vec<f64>,
    pub reconstruction_mse: f64,
}

/// Trains and calibrates a fresh autoencoder on generated samples.
pub fn pretrain_autoencoder(cfg: &RunConfig, problem: &FitnessProblem, seed: u64) -> Result<Pretrained> {
    let data = pretraining_dataset(cfg, problem, seed)?;
    let mut ae = Autoencoder::for_dataset(&data, &cfg.embedding.autoencoder(), seed)?;
    let losses = train_autoencoder(
        &mut ae,
        &data,
        TrainOptions {
            epochs: cfg.embedding.pretrain.epochs,
            batch_size: cfg.embedding.pretrain.batch_size,
            seed,
        },
    )?;
    ae.calibrate_latent_scale(&data)?;
    let reconstruction_mse = ae.reconstruction_mse(&data)?;
    Ok(Pretrained {
        autoencoder: ae,
        losses,
        reconstruction_mse,
    })
}

/// The configured embedding, or `None` when the surrogate does not read latents.
pub fn build_embedding(cfg: &RunConfig, problem: &FitnessProblem, seed: u64) -> Result<Option<Embedding>> {
    if !cfg.uses_embedding() {
        return Ok(None);
    }
    build_embedding_of_kind(cfg, cfg.embedding.kind, problem, seed).map(Some)
}

pub fn build_embedding_of_kind(
    cfg: &RunConfig,
    kind: EmbeddingKind,
    problem: &FitnessProblem,
    seed: u64,
) -> Result<Embedding> {
    match kind {
        EmbeddingKind::Ae => {
            let ae = match &cfg.embedding.checkpoint {
                Some(path) => Autoencoder::load(path)?,
                None => pretrain_autoencoder(cfg, problem, seed)?.autoencoder,
            };
            check_dim("autoencoder input", problem.dim(), ae.input_dim())?;
            Ok(Embedding::Autoencoder(ae))
        }
        EmbeddingKind::RandomProjection => {
            let data = pretraining_dataset(cfg, problem, seed)?;
            let mut rp = RandomProjection::new(data.normalization.clone(), cfg.embedding.latent_dim, seed)?;
            rp.calibrate_latent_scale(&data)?;
            Ok(Embedding::RandomProjection(rp))
        }
    }
}

pub fn build_surrogate(cfg: &RunConfig, embedding: Option<&Embedding>, seed: u64) -> Result<Surrogate> {
    Ok(match cfg.surrogate.kind {
        SurrogateKind::Hnn | SurrogateKind::Euclidean => {
            let hnn = cfg.surrogate.effective_hnn();
            let latent_dim = embedding.map_or(cfg.embedding.latent_dim, Embedding::latent_dim);
            let model = HnnModel::new(latent_dim, &hnn, seed)?;
            Surrogate::model(
                model,
                hnn.buffer_generations * cfg.search.subpopulations,
                hnn.epochs_per_generation,
                hnn.label_scope,
            )
        }
        SurrogateKind::None => Surrogate::Constant,
        SurrogateKind::Random => Surrogate::Random,
        SurrogateKind::Oracle => Surrogate::Oracle(cfg.build_problem()?.detached()),
    })
}

/// One repetition with an already built embedding.
pub fn execute(cfg: &RunConfig, seed: u64, embedding: Option<Embedding>) -> Result<RunOutcome> {
    let problem = cfg.build_problem()?;
    let surrogate = build_surrogate(cfg, embedding.as_ref(), seed)?;
    Search::new(cfg.search_config(), &problem, embedding, surrogate, seed)?.run()
}

/// One repetition, pretraining the embedding first when needed.
pub fn run_once(cfg: &RunConfig, seed: u64) -> Result<RunOutcome> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let embedding = build_embedding(cfg, &problem, seed)?;
    execute(cfg, seed, embedding)
}
