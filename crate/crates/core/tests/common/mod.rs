//! Fixtures shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use aehnn::embedding::{
    train_autoencoder, Autoencoder, AutoencoderConfig, EmbeddingDataset, Normalization, TrainOptions,
};
use aehnn::net::{activations_for, mse_loss, Activation, AdamConfig, DenseNet, Gradients};
use aehnn::seed;
use aehnn::surrogate::{HnnConfig, HnnModel, Label, LabeledSample};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
pub const FD_PROBES: usize = 100;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// A uniformly random direction scaled to a norm drawn uniformly from `[0, max_norm]`.
pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, max_norm: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
    let r = rng.random_range(0.0..=max_norm) / norm(&dir);
    dir.into_iter().map(|v| v * r).collect()
}

// ---- finite differences -------------------------------------------------------------

fn central<F: Fn(&DenseNet) -> f64>(net: &mut DenseNet, i: usize, loss: &F) -> f64 {
    let orig = net.params()[i];
    net.params_mut()[i] = orig + FD_STEP;
    let up = loss(net);
    net.params_mut()[i] = orig - FD_STEP;
    let down = loss(net);
    net.params_mut()[i] = orig;
    (up - down) / (2.0 * FD_STEP)
}

/// Worst relative error of `analytic` against central differences on random parameters.
pub fn probe_params<F: Fn(&DenseNet) -> f64>(
    net: &mut DenseNet,
    analytic: &[f64],
    loss: F,
    rng: &mut ChaCha8Rng,
) -> f64 {
    (0..FD_PROBES)
        .map(|_| {
            let i = rng.random_range(0..net.num_params());
            rel_err(analytic[i], central(net, i, &loss))
        })
        .fold(0.0, f64::max)
}

fn mse_of(net: &DenseNet, x: &[f64], target: &[f64]) -> f64 {
    mse_loss(&net.predict(x).unwrap(), target).0
}

pub fn dense_net_worst(act: Activation, seed: u64) -> f64 {
    let mut rng = seed::stream(seed, &[]);
    let dims = vec![6, 9, 7, 4];
    let mut net = DenseNet::new(dims.clone(), activations_for(&dims, act, Activation::Identity), &mut rng).unwrap();
    let x = uniform(&mut rng, 6, 1.0);
    let target = uniform(&mut rng, 4, 1.0);
    let pass = net.forward(&x).unwrap();
    let (_, g) = mse_loss(&pass.output, &target);
    let back = net.backward(&pass.cache, &g).unwrap();
    probe_params(&mut net, &back.params.0, |n| mse_of(n, &x, &target), &mut rng)
}

pub fn dense_net_input_worst(seed: u64) -> f64 {
    let mut rng = seed::stream(seed, &[]);
    let dims = vec![5, 8, 3];
    let net = DenseNet::new(dims.clone(), activations_for(&dims, Activation::Tanh, Activation::Tanh), &mut rng).unwrap();
    let x = uniform(&mut rng, 5, 1.0);
    let target = uniform(&mut rng, 3, 0.5);
    let pass = net.forward(&x).unwrap();
    let (_, g) = mse_loss(&pass.output, &target);
    let back = net.backward(&pass.cache, &g).unwrap();
    (0..5)
        .map(|i| {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[i] += FD_STEP;
            down[i] -= FD_STEP;
            let fd = (mse_of(&net, &up, &target) - mse_of(&net, &down, &target)) / (2.0 * FD_STEP);
            rel_err(back.input[i], fd)
        })
        .fold(0.0, f64::max)
}

/// Worst errors of the encoder and decoder gradients through the reconstruction loss.
pub fn autoencoder_worst(seed: u64) -> (f64, f64) {
    let mut rng = seed::stream(seed, &[]);
    let config = AutoencoderConfig {
        latent_dim: 3,
        hidden: vec![8],
        ..AutoencoderConfig::default()
    };
    let ae = Autoencoder::new(Normalization::identity(10), &config, 5).unwrap();
    let x = uniform(&mut rng, 10, 1.0);
    let (mut enc, mut dec) = (ae.encoder().clone(), ae.decoder().clone());

    let e = enc.forward(&x).unwrap();
    let d = dec.forward(&e.output).unwrap();
    let (_, g) = mse_loss(&d.output, &x);
    let mut dec_grads = Gradients::zeros_like(&dec);
    let mut enc_grads = Gradients::zeros_like(&enc);
    let code_grad = dec.accumulate_backward(&d.cache, &g, &mut dec_grads).unwrap();
    enc.accumulate_backward(&e.cache, &code_grad, &mut enc_grads).unwrap();

    let dec_fixed = dec.clone();
    let worst_enc = probe_params(
        &mut enc,
        &enc_grads.0,
        |n| mse_of(&dec_fixed, &n.predict(&x).unwrap(), &x),
        &mut rng,
    );
    let code = enc.predict(&x).unwrap();
    let worst_dec = probe_params(&mut dec, &dec_grads.0, |n| mse_of(n, &code, &x), &mut rng);
    (worst_enc, worst_dec)
}

pub fn classifier_worst(curvature: f64, seed: u64) -> f64 {
    let mut rng = seed::stream(seed, &[]);
    let samples: Vec<LabeledSample> = (0..12)
        .map(|i| LabeledSample {
            latent: uniform(&mut rng, 6, 1.5),
            fitness: i as f64,
            label: if i % 3 == 0 { Label::Promising } else { Label::Unpromising },
        })
        .collect();
    let refs: Vec<&LabeledSample> = samples.iter().collect();
    let config = HnnConfig {
        curvature,
        ..HnnConfig::default()
    };
    let mut model = HnnModel::new(6, &config, 3).unwrap();
    let (_, grads) = model.loss_and_gradient(&refs).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..FD_PROBES {
        let i = rng.random_range(0..model.core().num_params());
        let orig = model.core().params()[i];
        model.core_mut().params_mut()[i] = orig + FD_STEP;
        let up = model.loss_and_gradient(&refs).unwrap().0;
        model.core_mut().params_mut()[i] = orig - FD_STEP;
        let down = model.loss_and_gradient(&refs).unwrap().0;
        model.core_mut().params_mut()[i] = orig;
        worst = worst.max(rel_err(grads.0[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

// ---- planted subspace ---------------------------------------------------------------

pub const AMBIENT: usize = 512;
pub const SUBSPACE: usize = 8;
pub const SUBSPACE_SAMPLES: usize = 1000;
pub const SUBSPACE_BATCH: usize = 50;
pub const SUBSPACE_EPOCHS: usize = 100;

/// `x = W z` with a Gaussian `AMBIENT x SUBSPACE` matrix and Gaussian codes.
pub fn planted_subspace() -> Vec<Vec<f64>> {
    let mut rng = seed::stream(21, &[]);
    let w: Vec<f64> = (0..AMBIENT * SUBSPACE).map(|_| gaussian(&mut rng)).collect();
    (0..SUBSPACE_SAMPLES)
        .map(|_| {
            let z: Vec<f64> = (0..SUBSPACE).map(|_| gaussian(&mut rng)).collect();
            w.chunks_exact(SUBSPACE)
                .map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect()
}

pub fn mean_coordinate_variance(xs: &[Vec<f64>]) -> f64 {
    let n = xs.len() as f64;
    (0..xs[0].len())
        .map(|j| {
            let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n;
            xs.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n
        })
        .sum::<f64>()
        / xs[0].len() as f64
}

/// A linear autoencoder trained on the planted subspace, with its per-epoch losses.
pub fn subspace_autoencoder() -> (Autoencoder, EmbeddingDataset, Vec<f64>) {
    let data = EmbeddingDataset::new(planted_subspace()).unwrap();
    let config = AutoencoderConfig {
        latent_dim: SUBSPACE,
        hidden: vec![],
        hidden_activation: Activation::Identity,
        adam: AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        },
    };
    let mut ae = Autoencoder::for_dataset(&data, &config, 3).unwrap();
    let losses = train_autoencoder(
        &mut ae,
        &data,
        TrainOptions {
            epochs: SUBSPACE_EPOCHS,
            batch_size: SUBSPACE_BATCH,
            seed: 4,
        },
    )
    .unwrap();
    (ae, data, losses)
}

// ---- latent clusters ----------------------------------------------------------------

pub const CLUSTER_DIM: usize = 8;
pub const CLUSTER_SIGMA: f64 = 0.15;

/// Two isotropic Gaussian clusters of `per_class` samples whose means are 6 sigma apart.
pub fn clusters(per_class: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = seed::stream(seed, &[]);
    let mut dir: Vec<f64> = (0..CLUSTER_DIM).map(|_| gaussian(&mut rng)).collect();
    let n = norm(&dir);
    dir.iter_mut().for_each(|v| *v /= n);
    (0..2 * per_class)
        .map(|i| {
            let (sign, label) = if i % 2 == 0 { (1.0, Label::Promising) } else { (-1.0, Label::Unpromising) };
            let latent = dir
                .iter()
                .map(|d| sign * 3.0 * CLUSTER_SIGMA * d + CLUSTER_SIGMA * gaussian(&mut rng))
                .collect();
            LabeledSample {
                latent,
                fitness: sign,
                label,
            }
        })
        .collect()
}
