//! Dense feed-forward network with exact reverse-mode gradients and an Adam optimizer.
//!
//! Parameters of all layers live in a single flat buffer. Layer `l` maps
//! `dims[l] -> dims[l + 1]` and stores a row-major `dims[l + 1] x dims[l]` weight
//! matrix followed by its bias vector. Gradients use the same layout, which lets
//! optimizers work on plain slices.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    inputs: usize,
    outputs: usize,
    weight_offset: usize,
    bias_offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
    revision: u64,
}

fn layout(dims: &[usize]) -> (Vec<LayerSpan>, usize) {
    let mut spans = Vec::with_capacity(dims.len().saturating_sub(1));
    let mut offset = 0;
    for pair in dims.windows(2) {
        let (inputs, outputs) = (pair[0], pair[1]);
        let weight_offset = offset;
        let bias_offset = offset + inputs * outputs;
        offset = bias_offset + outputs;
        spans.push(LayerSpan {
            inputs,
            outputs,
            weight_offset,
            bias_offset,
        });
    }
    (spans, offset)
}

fn validate_shape(dims: &[usize], activations: &[Activation]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidArgument(
            "a network needs at least an input and an output layer".into(),
        ));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument("layer widths must be positive".into()));
    }
    check_dim("activation count", dims.len() - 1, activations.len())
}

/// Per-layer activations for a network with `hidden` activation everywhere except the
/// last layer, which uses `output`.
pub fn activations_for(layer_dims: &[usize], hidden: Activation, output: Activation) -> Vec<Activation> {
    let layers = layer_dims.len().saturating_sub(1);
    (0..layers)
        .map(|l| if l + 1 == layers { output } else { hidden })
        .collect()
}

impl DenseNet {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(
        dims: Vec<usize>,
        activations: Vec<Activation>,
        rng: &mut R,
    ) -> Result<Self> {
        validate_shape(&dims, &activations)?;
        let (spans, total) = layout(&dims);
        let mut params = vec![0.0; total];
        for span in &spans {
            let limit = (6.0 / (span.inputs + span.outputs) as f64).sqrt();
            for w in &mut params[span.weight_offset..span.bias_offset] {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(Self {
            dims,
            activations,
            params,
            revision: 0,
        })
    }

    pub fn zeros(dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        validate_shape(&dims, &activations)?;
        let (_, total) = layout(&dims);
        Ok(Self {
            dims,
            activations,
            params: vec![0.0; total],
            revision: 0,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("validated non-empty")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the flat parameter buffer. Invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.revision = self.revision.wrapping_add(1);
        &mut self.params
    }

    /// Weight matrix of `layer` (row-major, `outputs x inputs`).
    pub fn weights(&self, layer: usize) -> &[f64] {
        let span = layout(&self.dims).0[layer];
        &self.params[span.weight_offset..span.bias_offset]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        let span = layout(&self.dims).0[layer];
        &self.params[span.bias_offset..span.bias_offset + span.outputs]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let span = layout(&self.dims).0[layer];
        let params = self.params_mut();
        &mut params[span.weight_offset..span.bias_offset]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        let span = layout(&self.dims).0[layer];
        let params = self.params_mut();
        &mut params[span.bias_offset..span.bias_offset + span.outputs]
    }

    /// Forward pass returning only the output.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_dim("network input", self.input_dim(), input.len())?;
        let (spans, _) = layout(&self.dims);
        let mut current = input.to_vec();
        for (span, act) in spans.iter().zip(&self.activations) {
            current = self.affine(span, &current).into_iter().map(|z| act.apply(z)).collect();
        }
        Ok(current)
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardPass> {
        check_dim("network input", self.input_dim(), input.len())?;
        let (spans, _) = layout(&self.dims);
        let mut layer_inputs = Vec::with_capacity(spans.len() + 1);
        let mut pre_activations = Vec::with_capacity(spans.len());
        layer_inputs.push(input.to_vec());
        for (span, act) in spans.iter().zip(&self.activations) {
            let z = self.affine(span, layer_inputs.last().expect("seeded with input"));
            let a = z.iter().map(|&v| act.apply(v)).collect();
            pre_activations.push(z);
            layer_inputs.push(a);
        }
        let output = layer_inputs.pop().expect("at least one layer");
        Ok(ForwardPass {
            output,
            cache: ForwardCache {
                dims: self.dims.clone(),
                revision: self.revision,
                layer_inputs,
                pre_activations,
            },
        })
    }

    fn affine(&self, span: &LayerSpan, input: &[f64]) -> Vec<f64> {
        let w = &self.params[span.weight_offset..span.bias_offset];
        let b = &self.params[span.bias_offset..span.bias_offset + span.outputs];
        w.chunks_exact(span.inputs)
            .zip(b)
            .map(|(row, bias)| row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>() + bias)
            .collect()
    }

    pub fn backward(&self, cache: &ForwardCache, output_gradient: &[f64]) -> Result<Backward> {
        let mut params = Gradients::zeros_like(self);
        let input = self.accumulate_backward(cache, output_gradient, &mut params)?;
        Ok(Backward { params, input })
    }

    /// Adds the parameter gradients for one sample into `grads` and returns the gradient
    /// with respect to the network input.
    pub fn accumulate_backward(
        &self,
        cache: &ForwardCache,
        output_gradient: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        if cache.dims != self.dims {
            return Err(Error::StaleCache(format!(
                "cache built for layers {:?}, network has {:?}",
                cache.dims, self.dims
            )));
        }
        if cache.revision != self.revision {
            return Err(Error::StaleCache(
                "network parameters changed since the forward pass".into(),
            ));
        }
        check_dim("output gradient", self.output_dim(), output_gradient.len())?;
        check_dim("gradient buffer", self.params.len(), grads.0.len())?;

        let (spans, _) = layout(&self.dims);
        let mut upstream = output_gradient.to_vec();
        for (l, span) in spans.iter().enumerate().rev() {
            let act = self.activations[l];
            let z = &cache.pre_activations[l];
            let a_out: &[f64] = if l + 1 < spans.len() {
                &cache.layer_inputs[l + 1]
            } else {
                &[]
            };
            let delta: Vec<f64> = upstream
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    let a = if a_out.is_empty() { act.apply(z[k]) } else { a_out[k] };
                    g * act.derivative(z[k], a)
                })
                .collect();
            let x = &cache.layer_inputs[l];
            let gw = &mut grads.0[span.weight_offset..span.bias_offset];
            for (row, d) in gw.chunks_exact_mut(span.inputs).zip(&delta) {
                if *d != 0.0 {
                    for (g, xi) in row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            for (g, d) in grads.0[span.bias_offset..span.bias_offset + span.outputs]
                .iter_mut()
                .zip(&delta)
            {
                *g += d;
            }
            let w = &self.params[span.weight_offset..span.bias_offset];
            let mut next = vec![0.0; span.inputs];
            for (row, d) in w.chunks_exact(span.inputs).zip(&delta) {
                if *d != 0.0 {
                    for (n, wi) in next.iter_mut().zip(row) {
                        *n += d * wi;
                    }
                }
            }
            upstream = next;
        }
        Ok(upstream)
    }

    pub fn to_document(&self) -> NetDocument {
        let (spans, _) = layout(&self.dims);
        NetDocument {
            format: NET_FORMAT.to_string(),
            version: NET_FORMAT_VERSION,
            layer_dims: self.dims.clone(),
            activations: self.activations.clone(),
            layers: spans
                .iter()
                .map(|s| LayerDocument {
                    weights: self.params[s.weight_offset..s.bias_offset].to_vec(),
                    biases: self.params[s.bias_offset..s.bias_offset + s.outputs].to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: NetDocument) -> Result<Self> {
        if doc.format != NET_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format tag `{}`", doc.format)));
        }
        if doc.version != NET_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported network format version {}",
                doc.version
            )));
        }
        validate_shape(&doc.layer_dims, &doc.activations)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let (spans, total) = layout(&doc.layer_dims);
        if doc.layers.len() != spans.len() {
            return Err(Error::Checkpoint(format!(
                "{} layer records for {} layers",
                doc.layers.len(),
                spans.len()
            )));
        }
        let mut params = Vec::with_capacity(total);
        for (i, (layer, span)) in doc.layers.iter().zip(&spans).enumerate() {
            if layer.weights.len() != span.inputs * span.outputs {
                return Err(Error::Checkpoint(format!(
                    "layer {i}: {} weights, expected {}x{}",
                    layer.weights.len(),
                    span.outputs,
                    span.inputs
                )));
            }
            if layer.biases.len() != span.outputs {
                return Err(Error::Checkpoint(format!(
                    "layer {i}: {} biases, expected {}",
                    layer.biases.len(),
                    span.outputs
                )));
            }
            params.extend_from_slice(&layer.weights);
            params.extend_from_slice(&layer.biases);
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(Self {
            dims: doc.layer_dims,
            activations: doc.activations,
            params,
            revision: 0,
        })
    }

    /// Loads a checkpoint and rejects it unless its layer widths equal `expected_dims`.
    pub fn from_document_expecting(doc: NetDocument, expected_dims: &[usize]) -> Result<Self> {
        if doc.layer_dims != expected_dims {
            return Err(Error::Checkpoint(format!(
                "layer widths {:?} do not match expected {:?}",
                doc.layer_dims, expected_dims
            )));
        }
        Self::from_document(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_document())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: NetDocument =
            serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Self::from_document(doc)
    }
}

pub const NET_FORMAT: &str = "aehnn-densenet";
pub const NET_FORMAT_VERSION: u32 = 1;

/// Serialized form of a [`DenseNet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetDocument {
    pub format: String,
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub layers: Vec<LayerDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    /// Row-major, one row per output unit.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    dims: Vec<usize>,
    revision: u64,
    layer_inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub output: Vec<f64>,
    pub cache: ForwardCache,
}

/// Parameter gradients in the network's flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients(vec![0.0; net.num_params()])
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn reset(&mut self) {
        self.0.iter_mut().for_each(|g| *g = 0.0);
    }
}

#[derive(Debug, Clone)]
pub struct Backward {
    pub params: Gradients,
    pub input: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One bias-corrected Adam update. Parameters are left untouched when any gradient
    /// is non-finite.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_dim("adam parameters", self.first_moment.len(), params.len())?;
        check_dim("adam gradients", self.first_moment.len(), grads.len())?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient {i} at adam step {}",
                self.step_count + 1
            )));
        }
        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Mean squared error over coordinates and its gradient with respect to `prediction`.
pub fn mse_loss(prediction: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = prediction.len() as f64;
    let mut loss = 0.0;
    let grad = prediction
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    (loss / n, grad)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against class `target`, with gradient on the logits.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let probs = softmax(logits);
    let loss = -probs[target].max(f64::MIN_POSITIVE).ln();
    let grad = probs
        .iter()
        .enumerate()
        .map(|(k, p)| if k == target { p - 1.0 } else { *p })
        .collect();
    (loss, grad)
}
