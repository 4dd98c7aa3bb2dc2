//! The four badge-VAD architectures: construction, inference, training
//! plumbing and serialization.
//!
//! Every architecture consumes `60×F` windows and emits one speech
//! probability. A dense(1) + sigmoid head closes each network since a scalar
//! probability is required.
//!
//! # Model file format (`.bvm`)
//!
//! ```text
//! bytes 0..4   magic "BVM1"
//! bytes 4..8   header length, u32 little-endian
//! ...          header JSON (format_version, spec, training metadata,
//!              batchnorm update counters, tensor manifest with names/shapes)
//! ...          for each manifest entry, in order: little-endian f64 values
//! ```
//!
//! The header is readable text so two model files can be diffed; the payload
//! round-trips bit-exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSetId, WINDOW_FRAMES};
use crate::nn::layers::{self, BnCache, LstmCache};
use crate::nn::{DetRng, Parameter, Tensor};

const CNN_FILTERS: usize = 254;
const CNN_KERNEL: usize = 3;
const CNN_BLOCKS: usize = 4;
const FRONT_FILTERS: usize = 64;
const FRONT_KERNEL: usize = 4;
const LSTM_UNITS: usize = 100;
const POOL: usize = 2;

/// Architecture selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    /// 4×[conv(254,k3) → batchnorm → relu] → global average pool → head.
    Cnn,
    /// lstm(100, sequences) → lstm(100) → head.
    Lstm2,
    /// conv(64,k4) → relu → maxpool(2) → lstm(100) → head.
    CnnLstm,
    /// conv(64,k4) → relu → maxpool(2) → lstm(100, sequences) → lstm(100) → head.
    CnnLstm2,
}

impl Arch {
    /// Canonical report name.
    pub fn name(&self) -> &'static str {
        match self {
            Arch::Cnn => "CNN",
            Arch::Lstm2 => "LSTM+LSTM",
            Arch::CnnLstm => "CNN+LSTM",
            Arch::CnnLstm2 => "CNN+LSTM+LSTM",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_uppercase().replace('_', "-").as_str() {
            "CNN" => Ok(Arch::Cnn),
            "LSTM+LSTM" | "LSTM2" | "LSTM-LSTM" => Ok(Arch::Lstm2),
            "CNN+LSTM" | "CNN-LSTM" => Ok(Arch::CnnLstm),
            "CNN+LSTM+LSTM" | "CNN-LSTM2" | "CNN-LSTM-LSTM" => Ok(Arch::CnnLstm2),
            other => Err(Error::InvalidInput(format!(
                "unknown architecture `{other}` (valid: CNN, LSTM+LSTM, CNN+LSTM, CNN+LSTM+LSTM)"
            ))),
        }
    }

    /// All architectures in report order.
    pub const ALL: [Arch; 4] = [Arch::Cnn, Arch::CnnLstm, Arch::CnnLstm2, Arch::Lstm2];
}

/// Full model configuration: architecture, features, preprocessing, seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchSpec {
    pub arch: Arch,
    pub feature_set: FeatureSetId,
    pub normalized: bool,
    pub seed: u64,
}

impl ArchSpec {
    pub fn input_features(&self) -> usize {
        self.feature_set.feature_count()
    }
}

/// Training metadata carried with a model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainingMeta {
    pub epochs_run: u32,
    pub final_train_accuracy: f64,
}

enum LayerNode {
    Conv { w: Parameter, b: Parameter },
    BatchNorm {
        gamma: Parameter,
        beta: Parameter,
        running_mean: Tensor,
        running_var: Tensor,
        updates: u64,
    },
    Relu,
    MaxPool { pool: usize },
    GlobalAvgPool,
    Lstm { wx: Parameter, wh: Parameter, b: Parameter, return_sequences: bool },
    Dense { w: Parameter, b: Parameter },
    Sigmoid,
}

enum LayerCache {
    Conv { inputs: Vec<Tensor> },
    BatchNorm { cache: BnCache },
    Relu { inputs: Vec<Tensor> },
    MaxPool { argmaxes: Vec<Vec<usize>>, t_in: usize },
    GlobalAvgPool { t_in: usize },
    Lstm { caches: Vec<LstmCache> },
    Dense { inputs: Vec<Tensor> },
    Sigmoid { outputs: Vec<Tensor> },
}

/// Per-layer activations retained for one training step.
pub struct TrainCaches {
    items: Vec<LayerCache>,
}

/// A built (possibly untrained) model: spec, layers and training metadata.
pub struct TrainedModel {
    pub spec: ArchSpec,
    pub meta: TrainingMeta,
    layers: Vec<LayerNode>,
}

impl std::fmt::Debug for TrainedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainedModel")
            .field("spec", &self.spec)
            .field("meta", &self.meta)
            .field("parameter_count", &self.parameter_count())
            .finish()
    }
}

fn glorot(rng: &mut DetRng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.uniform_symmetric(limit)).collect()).unwrap()
}

fn conv_layer(rng: &mut DetRng, idx: usize, k: usize, cin: usize, cout: usize) -> LayerNode {
    let w = glorot(rng, &[k, cin, cout], k * cin, k * cout);
    LayerNode::Conv {
        w: Parameter::new(format!("conv{idx}.weight"), w),
        b: Parameter::new(format!("conv{idx}.bias"), Tensor::zeros(&[cout])),
    }
}

fn batchnorm_layer(idx: usize, channels: usize) -> LayerNode {
    let mut ones = Tensor::zeros(&[channels]);
    ones.fill(1.0);
    LayerNode::BatchNorm {
        gamma: Parameter::new(format!("bn{idx}.gamma"), ones.clone()),
        beta: Parameter::new(format!("bn{idx}.beta"), Tensor::zeros(&[channels])),
        running_mean: Tensor::zeros(&[channels]),
        running_var: ones,
        updates: 0,
    }
}

fn lstm_layer(rng: &mut DetRng, idx: usize, cin: usize, h: usize, return_sequences: bool) -> LayerNode {
    let wx = glorot(rng, &[cin, 4 * h], cin, 4 * h);
    let wh = glorot(rng, &[h, 4 * h], h, 4 * h);
    // forget-gate bias starts at 1, everything else at 0
    let mut bias = Tensor::zeros(&[4 * h]);
    for j in h..2 * h {
        bias.data_mut()[j] = 1.0;
    }
    LayerNode::Lstm {
        wx: Parameter::new(format!("lstm{idx}.input_weights"), wx),
        wh: Parameter::new(format!("lstm{idx}.recurrent_weights"), wh),
        b: Parameter::new(format!("lstm{idx}.bias"), bias),
        return_sequences,
    }
}

fn dense_head(rng: &mut DetRng, cin: usize) -> LayerNode {
    let w = glorot(rng, &[cin, 1], cin, 1);
    LayerNode::Dense {
        w: Parameter::new("head.weight", w),
        b: Parameter::new("head.bias", Tensor::zeros(&[1])),
    }
}

/// Builds an untrained model with weights drawn deterministically from
/// `spec.seed`. Identical specs produce bit-identical parameters.
pub fn build_model(spec: ArchSpec) -> TrainedModel {
    let mut rng = DetRng::derive(spec.seed, &[]);
    let f = spec.input_features();
    let mut nodes = Vec::new();
    match spec.arch {
        Arch::Cnn => {
            let mut cin = f;
            for block in 1..=CNN_BLOCKS {
                nodes.push(conv_layer(&mut rng, block, CNN_KERNEL, cin, CNN_FILTERS));
                nodes.push(batchnorm_layer(block, CNN_FILTERS));
                nodes.push(LayerNode::Relu);
                cin = CNN_FILTERS;
            }
            nodes.push(LayerNode::GlobalAvgPool);
            nodes.push(dense_head(&mut rng, CNN_FILTERS));
        }
        Arch::Lstm2 => {
            nodes.push(lstm_layer(&mut rng, 1, f, LSTM_UNITS, true));
            nodes.push(lstm_layer(&mut rng, 2, LSTM_UNITS, LSTM_UNITS, false));
            nodes.push(dense_head(&mut rng, LSTM_UNITS));
        }
        Arch::CnnLstm => {
            nodes.push(conv_layer(&mut rng, 1, FRONT_KERNEL, f, FRONT_FILTERS));
            nodes.push(LayerNode::Relu);
            nodes.push(LayerNode::MaxPool { pool: POOL });
            nodes.push(lstm_layer(&mut rng, 1, FRONT_FILTERS, LSTM_UNITS, false));
            nodes.push(dense_head(&mut rng, LSTM_UNITS));
        }
        Arch::CnnLstm2 => {
            nodes.push(conv_layer(&mut rng, 1, FRONT_KERNEL, f, FRONT_FILTERS));
            nodes.push(LayerNode::Relu);
            nodes.push(LayerNode::MaxPool { pool: POOL });
            nodes.push(lstm_layer(&mut rng, 1, FRONT_FILTERS, LSTM_UNITS, true));
            nodes.push(lstm_layer(&mut rng, 2, LSTM_UNITS, LSTM_UNITS, false));
            nodes.push(dense_head(&mut rng, LSTM_UNITS));
        }
    }
    nodes.push(LayerNode::Sigmoid);
    TrainedModel { spec, meta: TrainingMeta::default(), layers: nodes }
}

fn stack(samples: &[Tensor]) -> Tensor {
    let (t, c) = (samples[0].shape()[0], samples[0].shape()[1]);
    let mut out = Tensor::zeros(&[samples.len(), t, c]);
    let stride = t * c;
    for (i, s) in samples.iter().enumerate() {
        out.data_mut()[i * stride..(i + 1) * stride].copy_from_slice(s.data());
    }
    out
}

fn unstack(batch: &Tensor) -> Vec<Tensor> {
    let (n, t, c) = (batch.shape()[0], batch.shape()[1], batch.shape()[2]);
    let stride = t * c;
    (0..n)
        .map(|i| {
            Tensor::from_vec(&[t, c], batch.data()[i * stride..(i + 1) * stride].to_vec()).unwrap()
        })
        .collect()
}

impl TrainedModel {
    /// Number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.value.len()).sum()
    }

    /// Trainable parameters in canonical order.
    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerNode::Conv { w, b } | LayerNode::Dense { w, b } => {
                    out.push(w);
                    out.push(b);
                }
                LayerNode::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma);
                    out.push(beta);
                }
                LayerNode::Lstm { wx, wh, b, .. } => {
                    out.push(wx);
                    out.push(wh);
                    out.push(b);
                }
                _ => {}
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                LayerNode::Conv { w, b } | LayerNode::Dense { w, b } => {
                    out.push(w);
                    out.push(b);
                }
                LayerNode::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma);
                    out.push(beta);
                }
                LayerNode::Lstm { wx, wh, b, .. } => {
                    out.push(wx);
                    out.push(wh);
                    out.push(b);
                }
                _ => {}
            }
        }
        out
    }

    fn expect_batch(&self, samples: &[f64]) -> Result<usize> {
        let stride = WINDOW_FRAMES * self.spec.input_features();
        if !samples.len().is_multiple_of(stride) {
            return Err(Error::ShapeMismatch(format!(
                "batch of {} values is not a multiple of {stride} (60 frames × {} features)",
                samples.len(),
                self.spec.input_features()
            )));
        }
        Ok(samples.len() / stride)
    }

    /// Inference over a batch of `N×60×F` windows (row-major).
    ///
    /// Outputs are strictly inside (0, 1) and independent of batch
    /// composition: running statistics, never batch statistics, are used.
    pub fn forward(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let n = self.expect_batch(samples)?;
        let f = self.spec.input_features();
        let stride = WINDOW_FRAMES * f;
        let mut probs = Vec::with_capacity(n);
        for i in 0..n {
            let sample =
                Tensor::from_vec(&[WINDOW_FRAMES, f], samples[i * stride..(i + 1) * stride].to_vec())?;
            probs.push(self.infer_single(sample)?);
        }
        Ok(probs)
    }

    /// Inference of one `60×F` window.
    pub fn infer_single(&self, mut x: Tensor) -> Result<f64> {
        for layer in &self.layers {
            x = match layer {
                LayerNode::Conv { w, b } => layers::conv1d_same(&x, &w.value, &b.value)?,
                LayerNode::BatchNorm { gamma, beta, running_mean, running_var, updates } => {
                    if *updates == 0 {
                        return Err(Error::InvalidInput(
                            "uninitialized running statistics: train before inference".into(),
                        ));
                    }
                    layers::batchnorm_forward_infer(&x, &gamma.value, &beta.value, running_mean, running_var)?
                }
                LayerNode::Relu => layers::relu(&x),
                LayerNode::MaxPool { pool } => layers::maxpool1d(&x, *pool)?.0,
                LayerNode::GlobalAvgPool => layers::global_avg_pool(&x),
                LayerNode::Lstm { wx, wh, b, return_sequences } => {
                    layers::lstm_forward(&x, &wx.value, &wh.value, &b.value, *return_sequences)?.0
                }
                LayerNode::Dense { w, b } => layers::dense(&x, &w.value, &b.value)?,
                LayerNode::Sigmoid => layers::sigmoid(&x),
            };
        }
        Ok(x.data()[0])
    }

    /// Training-mode forward pass over a batch, retaining activations.
    ///
    /// Batch normalization uses batch statistics and updates its running
    /// estimates, so this requires `&mut self`.
    pub fn forward_train(&mut self, samples: &[f64]) -> Result<(Vec<f64>, TrainCaches)> {
        let n = self.expect_batch(samples)?;
        let f = self.spec.input_features();
        let stride = WINDOW_FRAMES * f;
        let mut flow: Vec<Tensor> = (0..n)
            .map(|i| {
                Tensor::from_vec(&[WINDOW_FRAMES, f], samples[i * stride..(i + 1) * stride].to_vec())
                    .unwrap()
            })
            .collect();
        let mut caches = Vec::with_capacity(self.layers.len());

        for layer in &mut self.layers {
            match layer {
                LayerNode::Conv { w, b } => {
                    let mut out = Vec::with_capacity(n);
                    for x in &flow {
                        out.push(layers::conv1d_same(x, &w.value, &b.value)?);
                    }
                    caches.push(LayerCache::Conv { inputs: std::mem::take(&mut flow) });
                    flow = out;
                }
                LayerNode::BatchNorm { gamma, beta, running_mean, running_var, updates } => {
                    let stacked = stack(&flow);
                    let (y, cache) = layers::batchnorm_forward_train(
                        &stacked,
                        &gamma.value,
                        &beta.value,
                        running_mean,
                        running_var,
                    )?;
                    *updates += 1;
                    caches.push(LayerCache::BatchNorm { cache });
                    flow = unstack(&y);
                }
                LayerNode::Relu => {
                    let out = flow.iter().map(layers::relu).collect();
                    caches.push(LayerCache::Relu { inputs: std::mem::take(&mut flow) });
                    flow = out;
                }
                LayerNode::MaxPool { pool } => {
                    let t_in = flow[0].shape()[0];
                    let mut out = Vec::with_capacity(n);
                    let mut argmaxes = Vec::with_capacity(n);
                    for x in &flow {
                        let (y, argmax) = layers::maxpool1d(x, *pool)?;
                        out.push(y);
                        argmaxes.push(argmax);
                    }
                    caches.push(LayerCache::MaxPool { argmaxes, t_in });
                    flow = out;
                }
                LayerNode::GlobalAvgPool => {
                    let t_in = flow[0].shape()[0];
                    let out = flow.iter().map(layers::global_avg_pool).collect();
                    caches.push(LayerCache::GlobalAvgPool { t_in });
                    flow = out;
                }
                LayerNode::Lstm { wx, wh, b, return_sequences } => {
                    let mut out = Vec::with_capacity(n);
                    let mut lstm_caches = Vec::with_capacity(n);
                    for x in &flow {
                        let (y, cache) =
                            layers::lstm_forward(x, &wx.value, &wh.value, &b.value, *return_sequences)?;
                        out.push(y);
                        lstm_caches.push(cache);
                    }
                    caches.push(LayerCache::Lstm { caches: lstm_caches });
                    flow = out;
                }
                LayerNode::Dense { w, b } => {
                    let mut out = Vec::with_capacity(n);
                    for x in &flow {
                        out.push(layers::dense(x, &w.value, &b.value)?);
                    }
                    caches.push(LayerCache::Dense { inputs: std::mem::take(&mut flow) });
                    flow = out;
                }
                LayerNode::Sigmoid => {
                    let out: Vec<Tensor> = flow.iter().map(layers::sigmoid).collect();
                    caches.push(LayerCache::Sigmoid { outputs: out.clone() });
                    flow = out;
                }
            }
        }

        let probs = flow.iter().map(|t| t.data()[0]).collect();
        Ok((probs, TrainCaches { items: caches }))
    }

    /// Backpropagates `dprobs` (gradient of the loss w.r.t. each output
    /// probability) through the cached activations, accumulating parameter
    /// gradients.
    pub fn backward_train(&mut self, caches: TrainCaches, dprobs: &[f64]) -> Result<()> {
        let mut grads: Vec<Tensor> = dprobs
            .iter()
            .map(|&d| Tensor::from_vec(&[1], vec![d]).unwrap())
            .collect();

        for (layer, cache) in self.layers.iter_mut().rev().zip(caches.items.into_iter().rev()) {
            match (layer, cache) {
                (LayerNode::Conv { w, b }, LayerCache::Conv { inputs }) => {
                    let mut out = Vec::with_capacity(grads.len());
                    for (x, dy) in inputs.iter().zip(&grads) {
                        let (dx, dw, db) = layers::conv1d_same_backward(x, &w.value, dy);
                        w.accumulate_grad(&dw);
                        b.accumulate_grad(&db);
                        out.push(dx);
                    }
                    grads = out;
                }
                (LayerNode::BatchNorm { gamma, beta, .. }, LayerCache::BatchNorm { cache }) => {
                    let stacked_dy = stack(&grads);
                    let (dx, dgamma, dbeta) = layers::batchnorm_backward(&cache, &gamma.value, &stacked_dy);
                    gamma.accumulate_grad(&dgamma);
                    beta.accumulate_grad(&dbeta);
                    grads = unstack(&dx);
                }
                (LayerNode::Relu, LayerCache::Relu { inputs }) => {
                    grads = inputs
                        .iter()
                        .zip(&grads)
                        .map(|(x, dy)| layers::relu_backward(x, dy))
                        .collect();
                }
                (LayerNode::MaxPool { .. }, LayerCache::MaxPool { argmaxes, t_in }) => {
                    grads = argmaxes
                        .iter()
                        .zip(&grads)
                        .map(|(argmax, dy)| layers::maxpool1d_backward(argmax, t_in, dy))
                        .collect();
                }
                (LayerNode::GlobalAvgPool, LayerCache::GlobalAvgPool { t_in }) => {
                    grads = grads
                        .iter()
                        .map(|dy| layers::global_avg_pool_backward(t_in, dy))
                        .collect();
                }
                (LayerNode::Lstm { wx, wh, b, .. }, LayerCache::Lstm { caches }) => {
                    let mut out = Vec::with_capacity(grads.len());
                    for (cache, dy) in caches.iter().zip(&grads) {
                        let (dx, dwx, dwh, db) = layers::lstm_backward(cache, &wx.value, &wh.value, dy);
                        wx.accumulate_grad(&dwx);
                        wh.accumulate_grad(&dwh);
                        b.accumulate_grad(&db);
                        out.push(dx);
                    }
                    grads = out;
                }
                (LayerNode::Dense { w, b }, LayerCache::Dense { inputs }) => {
                    let mut out = Vec::with_capacity(grads.len());
                    for (x, dy) in inputs.iter().zip(&grads) {
                        let (dx, dw, db) = layers::dense_backward(x, &w.value, dy);
                        w.accumulate_grad(&dw);
                        b.accumulate_grad(&db);
                        out.push(dx);
                    }
                    grads = out;
                }
                (LayerNode::Sigmoid, LayerCache::Sigmoid { outputs }) => {
                    grads = outputs
                        .iter()
                        .zip(&grads)
                        .map(|(y, dy)| layers::sigmoid_backward(y, dy))
                        .collect();
                }
                _ => return Err(Error::InvalidInput("cache does not match layer stack".into())),
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &[u8; 4] = b"BVM1";
const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format_version: u32,
    arch: String,
    feature_set: String,
    normalized: bool,
    seed: u64,
    epochs_run: u32,
    final_train_accuracy: f64,
    bn_updates: Vec<u64>,
    tensors: Vec<TensorInfo>,
}

impl TrainedModel {
    /// All serialized tensors (parameters plus running statistics), in
    /// manifest order.
    fn tensor_manifest(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerNode::Conv { w, b } | LayerNode::Dense { w, b } => {
                    out.push((w.name.clone(), &w.value));
                    out.push((b.name.clone(), &b.value));
                }
                LayerNode::BatchNorm { gamma, beta, running_mean, running_var, .. } => {
                    out.push((gamma.name.clone(), &gamma.value));
                    out.push((beta.name.clone(), &beta.value));
                    let base = gamma.name.trim_end_matches(".gamma").to_string();
                    out.push((format!("{base}.running_mean"), running_mean));
                    out.push((format!("{base}.running_var"), running_var));
                }
                LayerNode::Lstm { wx, wh, b, .. } => {
                    out.push((wx.name.clone(), &wx.value));
                    out.push((wh.name.clone(), &wh.value));
                    out.push((b.name.clone(), &b.value));
                }
                _ => {}
            }
        }
        out
    }

    fn bn_updates(&self) -> Vec<u64> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerNode::BatchNorm { updates, .. } => Some(*updates),
                _ => None,
            })
            .collect()
    }

    /// Serializes the model; see the module docs for the byte layout.
    pub fn save<W: Write>(&self, mut writer: W) -> Result<()> {
        let manifest = self.tensor_manifest();
        let header = ModelHeader {
            format_version: MODEL_FORMAT_VERSION,
            arch: self.spec.arch.name().to_string(),
            feature_set: self.spec.feature_set.name().to_string(),
            normalized: self.spec.normalized,
            seed: self.spec.seed,
            epochs_run: self.meta.epochs_run,
            final_train_accuracy: self.meta.final_train_accuracy,
            bn_updates: self.bn_updates(),
            tensors: manifest
                .iter()
                .map(|(name, t)| TensorInfo { name: name.clone(), shape: t.shape().to_vec() })
                .collect(),
        };
        let header_bytes = serde_json::to_vec(&header)?;
        writer.write_all(MODEL_MAGIC)?;
        writer.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
        writer.write_all(&header_bytes)?;
        for (_, tensor) in &manifest {
            for v in tensor.data() {
                writer.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Deserializes a model written by [`TrainedModel::save`].
    ///
    /// The spec is rebuilt from the header and the tensor manifest must match
    /// it exactly; mismatched shapes are reported as a parameter-count
    /// mismatch rather than silently misloaded.
    pub fn load<R: Read>(mut reader: R) -> Result<TrainedModel> {
        let mut magic = [0u8; 4];
        reader
            .read_exact(&mut magic)
            .map_err(|_| Error::ModelFormat("truncated payload: magic".into()))?;
        if &magic != MODEL_MAGIC {
            return Err(Error::ModelFormat("magic mismatch: not a model file".into()));
        }
        let mut lenbuf = [0u8; 4];
        reader
            .read_exact(&mut lenbuf)
            .map_err(|_| Error::ModelFormat("truncated payload: header length".into()))?;
        let header_len = u32::from_le_bytes(lenbuf) as usize;
        let mut header_bytes = vec![0u8; header_len];
        reader
            .read_exact(&mut header_bytes)
            .map_err(|_| Error::ModelFormat("truncated payload: header".into()))?;
        let header: ModelHeader = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::ModelFormat(format!("unreadable header: {e}")))?;
        if header.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }

        let spec = ArchSpec {
            arch: Arch::parse(&header.arch)?,
            feature_set: FeatureSetId::parse(&header.feature_set)?,
            normalized: header.normalized,
            seed: header.seed,
        };
        let mut model = build_model(spec);
        model.meta =
            TrainingMeta { epochs_run: header.epochs_run, final_train_accuracy: header.final_train_accuracy };

        // the manifest must match what the spec implies
        {
            let expected = model.tensor_manifest();
            if expected.len() != header.tensors.len()
                || expected.iter().zip(&header.tensors).any(|((name, t), info)| {
                    *name != info.name || t.shape() != info.shape.as_slice()
                })
            {
                return Err(Error::ModelFormat(format!(
                    "parameter-count mismatch: manifest does not match architecture {}",
                    header.arch
                )));
            }
        }

        let shapes: Vec<Vec<usize>> = header.tensors.iter().map(|t| t.shape.clone()).collect();
        let mut payload = Vec::with_capacity(shapes.len());
        let mut buf = [0u8; 8];
        for info in &shapes {
            let len: usize = info.iter().product();
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                reader
                    .read_exact(&mut buf)
                    .map_err(|_| Error::ModelFormat("truncated payload: tensor data".into()))?;
                data.push(f64::from_le_bytes(buf));
            }
            payload.push(data);
        }
        if reader.read(&mut buf).map_err(Error::Io)? != 0 {
            return Err(Error::ModelFormat("trailing bytes after tensor data".into()));
        }

        let mut idx = 0;
        let mut bn_idx = 0;
        for layer in &mut model.layers {
            match layer {
                LayerNode::Conv { w, b } | LayerNode::Dense { w, b } => {
                    w.value = Tensor::from_vec(w.value.shape().to_vec().as_slice(), payload[idx].clone())?;
                    b.value = Tensor::from_vec(b.value.shape().to_vec().as_slice(), payload[idx + 1].clone())?;
                    idx += 2;
                }
                LayerNode::BatchNorm { gamma, beta, running_mean, running_var, updates } => {
                    gamma.value =
                        Tensor::from_vec(gamma.value.shape().to_vec().as_slice(), payload[idx].clone())?;
                    beta.value =
                        Tensor::from_vec(beta.value.shape().to_vec().as_slice(), payload[idx + 1].clone())?;
                    *running_mean =
                        Tensor::from_vec(running_mean.shape().to_vec().as_slice(), payload[idx + 2].clone())?;
                    *running_var =
                        Tensor::from_vec(running_var.shape().to_vec().as_slice(), payload[idx + 3].clone())?;
                    *updates = *header.bn_updates.get(bn_idx).ok_or_else(|| {
                        Error::ModelFormat("missing batchnorm update counters".into())
                    })?;
                    bn_idx += 1;
                    idx += 4;
                }
                LayerNode::Lstm { wx, wh, b, .. } => {
                    wx.value = Tensor::from_vec(wx.value.shape().to_vec().as_slice(), payload[idx].clone())?;
                    wh.value =
                        Tensor::from_vec(wh.value.shape().to_vec().as_slice(), payload[idx + 1].clone())?;
                    b.value = Tensor::from_vec(b.value.shape().to_vec().as_slice(), payload[idx + 2].clone())?;
                    idx += 3;
                }
                _ => {}
            }
        }
        Ok(model)
    }
}
