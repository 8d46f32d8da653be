//! Classification surrogate for pre-selection.
//!
//! Evaluated candidates are labeled promising when their fitness reaches the batch mean.
//! The classifier maps a latent code into the Poincare ball at the origin, pulls it back
//! to the tangent space, and runs a Euclidean MLP with a softmax head:
//!
//! ```text
//! u = log_0(proj(exp_0(z)))      p = softmax(F(u))
//! ```
//!
//! The output-side `exp_0`/`log_0` pair of the wrapped layer cancels exactly at the
//! origin, so it is not evaluated. With `c = 0` the model is a plain MLP classifier.

use std::collections::VecDeque;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hyperbolic::{exp_map_zero, log_map_zero, norm_sq, project_to_ball, BallPoint, Curvature, TangentVector};
use crate::net::{activations_for, softmax, softmax_cross_entropy, Activation, DenseNet, Gradients, NetDocument};
use crate::seed;

pub const UNPROMISING: usize = 0;
pub const PROMISING: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Promising,
    Unpromising,
}

impl Label {
    pub fn class(self) -> usize {
        match self {
            Label::Promising => PROMISING,
            Label::Unpromising => UNPROMISING,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Promising => Label::Unpromising,
            Label::Unpromising => Label::Promising,
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Promising => 1,
            Label::Unpromising => -1,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Label::Promising),
            -1 => Ok(Label::Unpromising),
            other => Err(format!("label must be +1 or -1, got {other}")),
        }
    }
}

/// `+1` where the fitness is at least the batch mean, `-1` otherwise.
pub fn label_batch(fitnesses: &[f64]) -> Result<Vec<Label>> {
    if fitnesses.is_empty() {
        return Err(Error::InvalidArgument("cannot label an empty batch".into()));
    }
    if let Some(bad) = fitnesses.iter().find(|f| !f.is_finite()) {
        return Err(Error::NonFinite(format!("fitness {bad}")));
    }
    let mean = fitnesses.iter().sum::<f64>() / fitnesses.len() as f64;
    // The batch maximum must stay promising even if rounding nudges the mean above it.
    let max = fitnesses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = mean.min(max);
    Ok(fitnesses
        .iter()
        .map(|&f| if f >= threshold { Label::Promising } else { Label::Unpromising })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub latent: Vec<f64>,
    pub fitness: f64,
    pub label: Label,
}

/// Labels a batch of evaluated latents against the batch's own mean fitness.
pub fn label_samples(latents: Vec<Vec<f64>>, fitnesses: &[f64]) -> Result<Vec<LabeledSample>> {
    check_dim("labeled batch", latents.len(), fitnesses.len())?;
    let labels = label_batch(fitnesses)?;
    Ok(latents
        .into_iter()
        .zip(fitnesses)
        .zip(labels)
        .map(|((latent, &fitness), label)| LabeledSample {
            latent,
            fitness,
            label,
        })
        .collect())
}

/// Which fitness mean a sample is labeled against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScope {
    /// The children evaluated in the same generation.
    Generation,
    /// Everything currently in the training buffer, relabeled before each training round.
    Buffer,
    /// Buffered samples of the same subpopulation, relabeled before each training round.
    Subpopulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HnnConfig {
    pub curvature: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs_per_generation: usize,
    /// Number of generations of labeled samples retained for incremental training.
    pub buffer_generations: usize,
    pub label_scope: LabelScope,
}

impl Default for HnnConfig {
    fn default() -> Self {
        Self {
            curvature: 1.0,
            hidden: vec![64, 32],
            activation: Activation::Tanh,
            learning_rate: 1e-2,
            batch_size: 16,
            epochs_per_generation: 20,
            buffer_generations: 10,
            label_scope: LabelScope::Generation,
        }
    }
}

/// Riemannian SGD on the Poincare ball.
///
/// Euclidean parameters take a plain gradient step. Ball-resident parameters rescale the
/// Euclidean gradient by the inverse metric `(1 - c |p|^2)^2 / 4` and are projected back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rsgd {
    pub learning_rate: f64,
}

/// Inverse metric factor `(1 - c |p|^2)^2 / 4`.
pub fn riemannian_scale(point: &BallPoint) -> f64 {
    let t = 1.0 - point.curvature().value() * norm_sq(point.coords());
    t * t / 4.0
}

impl Rsgd {
    pub fn step_euclidean(&self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_dim("sgd gradients", params.len(), grads.len())?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient {i}")));
        }
        params
            .iter_mut()
            .zip(grads)
            .for_each(|(p, g)| *p -= self.learning_rate * g);
        Ok(())
    }

    pub fn step_on_ball(&self, point: &BallPoint, euclidean_grad: &[f64]) -> Result<BallPoint> {
        check_dim("ball gradient", point.dim(), euclidean_grad.len())?;
        if euclidean_grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("ball parameter gradient".into()));
        }
        let scale = self.learning_rate * riemannian_scale(point);
        let moved = point
            .coords()
            .iter()
            .zip(euclidean_grad)
            .map(|(p, g)| p - scale * g)
            .collect();
        Ok(project_to_ball(moved, point.curvature()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnnModel {
    curvature: Curvature,
    core: DenseNet,
    optimizer: Rsgd,
    batch_size: usize,
}

impl HnnModel {
    pub fn new(latent_dim: usize, config: &HnnConfig, seed: u64) -> Result<Self> {
        let curvature = Curvature::new(config.curvature)?;
        if latent_dim == 0 {
            return Err(Error::InvalidArgument("latent dimension must be >= 1".into()));
        }
        if config.batch_size == 0 || !(config.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "batch size and learning rate must be positive".into(),
            ));
        }
        let mut dims = vec![latent_dim];
        dims.extend(&config.hidden);
        dims.push(2);
        let mut rng = seed::stream(seed, &[seed::tag::HNN_INIT]);
        let core = DenseNet::new(
            dims.clone(),
            activations_for(&dims, config.activation, Activation::Identity),
            &mut rng,
        )?;
        Ok(Self {
            curvature,
            core,
            optimizer: Rsgd {
                learning_rate: config.learning_rate,
            },
            batch_size: config.batch_size,
        })
    }

    pub fn from_core(core: DenseNet, curvature: Curvature, optimizer: Rsgd, batch_size: usize) -> Result<Self> {
        check_dim("classifier output", 2, core.output_dim())?;
        Ok(Self {
            curvature,
            core,
            optimizer,
            batch_size: batch_size.max(1),
        })
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn latent_dim(&self) -> usize {
        self.core.input_dim()
    }

    pub fn core(&self) -> &DenseNet {
        &self.core
    }

    pub fn core_mut(&mut self) -> &mut DenseNet {
        &mut self.core
    }

    /// Tangent-space features fed to the Euclidean core.
    pub fn ball_features(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim("surrogate input", self.latent_dim(), z.len())?;
        if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("latent coordinate {bad}")));
        }
        if self.curvature.is_euclidean() {
            return Ok(z.to_vec());
        }
        let on_ball = exp_map_zero(&TangentVector(z.to_vec()), self.curvature);
        let projected = project_to_ball(on_ball.into_coords(), self.curvature);
        Ok(log_map_zero(&projected).into_coords())
    }

    pub fn logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.core.predict(&self.ball_features(z)?)
    }

    /// Class probabilities `[unpromising, promising]`.
    pub fn forward(&self, z: &[f64]) -> Result<[f64; 2]> {
        let p = softmax(&self.logits(z)?);
        Ok([p[UNPROMISING], p[PROMISING]])
    }

    pub fn promising_probability(&self, z: &[f64]) -> Result<f64> {
        Ok(self.forward(z)?[PROMISING])
    }

    pub fn predict_label(&self, z: &[f64]) -> Result<Label> {
        Ok(if self.promising_probability(z)? > 0.5 {
            Label::Promising
        } else {
            Label::Unpromising
        })
    }

    /// Mean cross-entropy over `samples` and its gradient on the core parameters.
    pub fn loss_and_gradient(&self, samples: &[&LabeledSample]) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(&self.core);
        let mut total = 0.0;
        for s in samples {
            let pass = self.core.forward(&self.ball_features(&s.latent)?)?;
            let (loss, g) = softmax_cross_entropy(&pass.output, s.label.class());
            total += loss;
            self.core.accumulate_backward(&pass.cache, &g, &mut grads)?;
        }
        let n = samples.len().max(1) as f64;
        grads.scale(1.0 / n);
        Ok((total / n, grads))
    }

    pub fn to_document(&self) -> HnnDocument {
        HnnDocument {
            format: HNN_FORMAT.to_string(),
            version: HNN_FORMAT_VERSION,
            curvature: self.curvature.value(),
            learning_rate: self.optimizer.learning_rate,
            batch_size: self.batch_size,
            core: self.core.to_document(),
        }
    }

    pub fn from_document(doc: HnnDocument) -> Result<Self> {
        if doc.format != HNN_FORMAT || doc.version != HNN_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported classifier checkpoint {} v{}",
                doc.format, doc.version
            )));
        }
        let curvature = Curvature::new(doc.curvature).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let core = DenseNet::from_document(doc.core)?;
        Self::from_core(
            core,
            curvature,
            Rsgd {
                learning_rate: doc.learning_rate,
            },
            doc.batch_size,
        )
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

pub const HNN_FORMAT: &str = "aehnn-classifier";
pub const HNN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnnDocument {
    pub format: String,
    pub version: u32,
    pub curvature: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub core: NetDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub train_accuracy: Option<f64>,
    pub validation_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    /// Mean training loss of the last epoch, if any epoch ran.
    pub final_loss: Option<f64>,
    pub steps: usize,
}

/// Shuffled 6:2:2 split into train, validation and test indices. Train keeps at least one
/// sample.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::stream(seed, &[seed::tag::HNN_TRAIN, 0]);
    order.shuffle(&mut rng);
    let n_train = ((n as f64 * 0.6).round() as usize).clamp(n.min(1), n);
    let n_val = ((n as f64 * 0.2).round() as usize).min(n - n_train);
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    (order, val, test)
}

pub fn accuracy<'a>(model: &HnnModel, samples: impl IntoIterator<Item = &'a LabeledSample>) -> Result<Option<f64>> {
    let (mut hits, mut total) = (0usize, 0usize);
    for s in samples {
        total += 1;
        if model.predict_label(&s.latent)? == s.label {
            hits += 1;
        }
    }
    Ok((total > 0).then(|| hits as f64 / total as f64))
}

/// Continues training from the model's current parameters on a 6:2:2 split of
/// `samples`, minimizing two-class cross-entropy with mini-batch RSGD.
pub fn train_incremental(
    model: &mut HnnModel,
    samples: &[LabeledSample],
    epochs: usize,
    seed: u64,
) -> Result<TrainMetrics> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no labeled samples to train on".into()));
    }
    for s in samples {
        check_dim("labeled sample", model.latent_dim(), s.latent.len())?;
    }
    let (mut train, val, test) = split_indices(samples.len(), seed);
    let mut rng = seed::stream(seed, &[seed::tag::HNN_TRAIN, 1]);
    let mut steps = 0;
    let mut final_loss = None;
    for _ in 0..epochs {
        train.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train.chunks(model.batch_size) {
            let refs: Vec<&LabeledSample> = batch.iter().map(|&i| &samples[i]).collect();
            let (loss, grads) = model.loss_and_gradient(&refs)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    stage: "step",
                    index: steps,
                });
            }
            let optimizer = model.optimizer;
            optimizer
                .step_euclidean(model.core.params_mut(), &grads.0)
                .map_err(|_| Error::Divergence {
                    stage: "step",
                    index: steps,
                })?;
            epoch_loss += loss * batch.len() as f64;
            steps += 1;
        }
        final_loss = Some(epoch_loss / train.len() as f64);
    }
    Ok(TrainMetrics {
        train_accuracy: accuracy(model, train.iter().map(|&i| &samples[i]))?,
        validation_accuracy: accuracy(model, val.iter().map(|&i| &samples[i]))?,
        test_accuracy: accuracy(model, test.iter().map(|&i| &samples[i]))?,
        final_loss,
        steps,
    })
}

/// Most recent labeled samples, bounded by `capacity`.
#[derive(Debug, Clone, Default)]
pub struct TrainingBuffer {
    capacity: usize,
    samples: VecDeque<LabeledSample>,
    groups: VecDeque<usize>,
}

impl TrainingBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            samples: VecDeque::with_capacity(capacity),
            groups: VecDeque::with_capacity(capacity),
        }
    }

    pub fn extend(&mut self, batch: impl IntoIterator<Item = LabeledSample>) {
        self.extend_grouped(batch.into_iter().map(|s| (0, s)));
    }

    /// Adds samples tagged with the group (subpopulation) they came from.
    pub fn extend_grouped(&mut self, batch: impl IntoIterator<Item = (usize, LabeledSample)>) {
        for (g, s) in batch {
            if self.samples.len() == self.capacity {
                self.samples.pop_front();
                self.groups.pop_front();
            }
            self.samples.push_back(s);
            self.groups.push_back(g);
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Relabels every retained sample against the mean fitness of the whole buffer.
    pub fn relabel(&mut self) -> Result<()> {
        if self.samples.is_empty() {
            return Ok(());
        }
        let fitness: Vec<f64> = self.samples.iter().map(|s| s.fitness).collect();
        for (s, label) in self.samples.iter_mut().zip(label_batch(&fitness)?) {
            s.label = label;
        }
        Ok(())
    }

    /// Relabels every retained sample against the mean fitness of its own group.
    pub fn relabel_by_group(&mut self) -> Result<()> {
        let mut ids: Vec<usize> = self.groups.iter().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        for g in ids {
            let idx: Vec<usize> = (0..self.samples.len()).filter(|&i| self.groups[i] == g).collect();
            let fitness: Vec<f64> = idx.iter().map(|&i| self.samples[i].fitness).collect();
            for (&i, label) in idx.iter().zip(label_batch(&fitness)?) {
                self.samples[i].label = label;
            }
        }
        Ok(())
    }

    pub fn as_slice(&mut self) -> &[LabeledSample] {
        self.samples.make_contiguous()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateScore {
    pub candidate_index: usize,
    pub promising_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preselection {
    pub selected: usize,
    pub scores: Vec<SurrogateScore>,
}

/// Index of the largest probability; the lowest index wins ties.
pub fn select_best(probabilities: &[f64]) -> Result<usize> {
    if probabilities.is_empty() {
        return Err(Error::InvalidArgument("no candidates to pre-select from".into()));
    }
    let mut best = 0;
    for (i, &p) in probabilities.iter().enumerate().skip(1) {
        if p > probabilities[best] {
            best = i;
        }
    }
    Ok(best)
}

pub fn preselect_from_probabilities(probabilities: Vec<f64>) -> Result<Preselection> {
    let selected = select_best(&probabilities)?;
    Ok(Preselection {
        selected,
        scores: probabilities
            .into_iter()
            .enumerate()
            .map(|(candidate_index, promising_probability)| SurrogateScore {
                candidate_index,
                promising_probability,
            })
            .collect(),
    })
}

pub fn preselect(model: &HnnModel, candidates: &[Vec<f64>]) -> Result<Preselection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to pre-select from".into()));
    }
    let probs = candidates
        .iter()
        .map(|z| model.promising_probability(z))
        .collect::<Result<Vec<_>>>()?;
    preselect_from_probabilities(probs)
}
