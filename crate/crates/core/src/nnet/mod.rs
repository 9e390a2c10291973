//! A small trainable illuminant estimator with dropout.
//!
//! Networks are a flat list of layers over an `H x W x C` activation,
//! ending in a head that emits a strictly positive unit vector. Dropout
//! masks are drawn from a stream keyed by `(base_seed, pass_index,
//! layer_index)`, so a forward pass is a pure function of its inputs.

mod io;
mod train;

pub use io::{load_network, save_network, ModelCard, NETWORK_FORMAT_VERSION};
pub use train::{train, TrainConfig, TrainOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::colorcore::{Illuminant, Scene};
use crate::error::{CoreError, Result};
use crate::seed;

/// Largest spread between head logits before the exponential; keeps every
/// output component representable and strictly positive.
const HEAD_LOGIT_SPREAD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// 3x3 convolution with zero padding (output keeps the spatial size).
    Conv3x3 {
        in_ch: usize,
        out_ch: usize,
    },
    /// Per-pixel affine map across channels.
    Pointwise {
        in_ch: usize,
        out_ch: usize,
    },
    Relu,
    /// Global spatial average per channel.
    MeanPool,
    /// Global spatial maximum per channel.
    MaxPool,
    Dropout {
        rate: f64,
    },
    /// Fully connected layer; only valid after a global pool.
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// `exp` followed by L2 normalization over exactly three inputs.
    PositiveHead,
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv3x3 { in_ch, out_ch } => out_ch * in_ch * 9 + out_ch,
            LayerSpec::Pointwise { in_ch, out_ch } => out_ch * in_ch + out_ch,
            LayerSpec::Dense { inputs, outputs } => outputs * inputs + outputs,
            _ => 0,
        }
    }

    fn fans(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv3x3 { in_ch, out_ch } => (in_ch * 9, out_ch * 9),
            LayerSpec::Pointwise { in_ch, out_ch } => (in_ch, out_ch),
            LayerSpec::Dense { inputs, outputs } => (inputs, outputs),
            _ => (0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardMode {
    /// Dropout active, activations recorded for backpropagation.
    Train,
    /// Dropout active at inference (MC dropout).
    Mc,
    /// Dropout disabled.
    Deterministic,
}

/// Identifies one stochastic pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassSeed {
    pub base_seed: u64,
    pub pass_index: u64,
}

impl PassSeed {
    pub fn new(base_seed: u64, pass_index: u64) -> Self {
        Self {
            base_seed,
            pass_index,
        }
    }

    fn layer_stream(&self, layer_index: usize) -> ChaCha8Rng {
        let key = seed::derive(
            seed::derive(self.base_seed, self.pass_index),
            layer_index as u64,
        );
        ChaCha8Rng::seed_from_u64(key)
    }
}

/// Dense activation laid out as `(y, x, channel)`, channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    fn zeros_like(&self) -> Self {
        Tensor::new(
            self.height,
            self.width,
            self.channels,
            vec![0.0; self.data.len()],
        )
    }

    /// Network input for a scene: pixels divided by their mean value, so
    /// the estimate does not depend on exposure.
    pub fn from_scene(scene: &Scene) -> Self {
        Self::from_pixels(scene.height(), scene.width(), scene.pixels())
    }

    pub fn from_pixels(height: usize, width: usize, pixels: &[f32]) -> Self {
        let mean = pixels.iter().map(|p| *p as f64).sum::<f64>() / pixels.len() as f64;
        let scale = if mean > 0.0 { 1.0 / mean } else { 1.0 };
        let data = pixels.iter().map(|p| *p as f64 * scale).collect();
        Tensor::new(height, width, 3, data)
    }
}

/// Per-layer parameter buffers, laid out like [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_for(net: &Network) -> Self {
        Gradients(net.params.iter().map(|p| vec![0.0; p.len()]).collect())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.0.iter_mut().flatten().for_each(|g| *g *= k);
    }
}

/// A layer stack and its weights.
///
/// Convolution weights are stored `[out][in][ky][kx]` followed by the
/// biases; dense and pointwise weights `[out][in]` followed by the biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    params: Vec<Vec<f64>>,
}

/// What one layer needs to push gradients back.
enum Saved {
    Input(Tensor),
    Mask(Vec<f64>),
    ArgMax {
        input_len: usize,
        shape: (usize, usize, usize),
        index: Vec<usize>,
    },
    Pool {
        shape: (usize, usize, usize),
    },
    Output(Vec<f64>),
    Nothing,
}

struct Trace {
    saved: Vec<Saved>,
}

impl Network {
    /// Builds a network with seeded Glorot-uniform weights and zero biases.
    pub fn init(layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        validate(&layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_str(seed, "init"));
        let params = layers
            .iter()
            .map(|l| {
                let n = l.param_count();
                let (fan_in, fan_out) = l.fans();
                let n_bias = match *l {
                    LayerSpec::Conv3x3 { out_ch, .. } | LayerSpec::Pointwise { out_ch, .. } => {
                        out_ch
                    }
                    LayerSpec::Dense { outputs, .. } => outputs,
                    _ => 0,
                };
                let bound = if n > 0 {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                } else {
                    0.0
                };
                let mut p: Vec<f64> = (0..n - n_bias)
                    .map(|_| rng.gen_range(-bound..=bound))
                    .collect();
                p.resize(n, 0.0);
                p
            })
            .collect();
        Ok(Self { layers, params })
    }

    /// Wraps explicit weights; each buffer must match its layer's size.
    pub fn from_parts(layers: Vec<LayerSpec>, params: Vec<Vec<f64>>) -> Result<Self> {
        validate(&layers)?;
        if params.len() != layers.len() {
            return Err(CoreError::Domain(format!(
                "{} parameter buffers for {} layers",
                params.len(),
                layers.len()
            )));
        }
        for (i, (l, p)) in layers.iter().zip(&params).enumerate() {
            if p.len() != l.param_count() {
                return Err(CoreError::Domain(format!(
                    "layer {i} expects {} parameters, got {}",
                    l.param_count(),
                    p.len()
                )));
            }
        }
        Ok(Self { layers, params })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.params
    }

    pub fn has_dropout(&self) -> bool {
        self.layers
            .iter()
            .any(|l| matches!(l, LayerSpec::Dropout { rate } if *rate > 0.0))
    }

    /// Estimates the illuminant of a scene.
    pub fn forward(&self, scene: &Scene, mode: ForwardMode, seed: PassSeed) -> Result<Illuminant> {
        self.forward_tensor(Tensor::from_scene(scene), mode, seed)
    }

    pub fn forward_tensor(
        &self,
        input: Tensor,
        mode: ForwardMode,
        seed: PassSeed,
    ) -> Result<Illuminant> {
        let out = self.run(input, mode, seed, None)?;
        output_illuminant(out, self.layers.len() - 1)
    }

    /// Loss and weight gradients for one training example, with dropout
    /// masks taken from `seed`.
    pub fn backward(
        &self,
        scene: &Scene,
        gt: &Illuminant,
        seed: PassSeed,
    ) -> Result<(f64, Gradients)> {
        self.backward_tensor(Tensor::from_scene(scene), gt, seed)
    }

    pub fn backward_tensor(
        &self,
        input: Tensor,
        gt: &Illuminant,
        seed: PassSeed,
    ) -> Result<(f64, Gradients)> {
        let mut trace = Trace {
            saved: Vec::with_capacity(self.layers.len()),
        };
        let out = self.run(input, ForwardMode::Train, seed, Some(&mut trace))?;
        let pred = output_illuminant(out, self.layers.len() - 1)?;
        let value = loss(&pred, gt);

        let mut grads = Gradients::zeros_for(self);
        // dL/dpred for L = 1 - <pred, gt>
        let mut grad = Tensor::new(1, 1, 3, gt.to_array().iter().map(|g| -g).collect());
        for (idx, (layer, saved)) in self.layers.iter().zip(&trace.saved).enumerate().rev() {
            grad = self.layer_backward(idx, layer, saved, grad, &mut grads.0[idx]);
            if grad.data.iter().any(|g| !g.is_finite()) {
                return Err(CoreError::Numeric {
                    layer: idx,
                    what: "gradient".into(),
                });
            }
        }
        if grads.0.iter().flatten().any(|g| !g.is_finite()) {
            return Err(CoreError::Numeric {
                layer: self.layers.len() - 1,
                what: "weight gradient".into(),
            });
        }
        Ok((value, grads))
    }

    fn run(
        &self,
        input: Tensor,
        mode: ForwardMode,
        seed: PassSeed,
        mut trace: Option<&mut Trace>,
    ) -> Result<Vec<f64>> {
        if input.data.is_empty() || input.data.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Domain(
                "input must be finite and non-empty".into(),
            ));
        }
        let mut x = input;
        for (idx, layer) in self.layers.iter().enumerate() {
            let w = &self.params[idx];
            let (next, saved) = match *layer {
                LayerSpec::Conv3x3 { in_ch, out_ch } => {
                    check_channels(idx, &x, in_ch)?;
                    (conv3x3(&x, w, in_ch, out_ch), Saved::Input(x))
                }
                LayerSpec::Pointwise { in_ch, out_ch } => {
                    check_channels(idx, &x, in_ch)?;
                    (pointwise(&x, w, in_ch, out_ch), Saved::Input(x))
                }
                LayerSpec::Relu => {
                    let y = Tensor::new(
                        x.height,
                        x.width,
                        x.channels,
                        x.data.iter().map(|v| v.max(0.0)).collect(),
                    );
                    (y, Saved::Input(x))
                }
                LayerSpec::MeanPool => {
                    let shape = (x.height, x.width, x.channels);
                    let n = (x.height * x.width) as f64;
                    let mut out = vec![0.0; x.channels];
                    for px in x.data.chunks_exact(x.channels) {
                        for (o, v) in out.iter_mut().zip(px) {
                            *o += v;
                        }
                    }
                    out.iter_mut().for_each(|o| *o /= n);
                    (Tensor::new(1, 1, x.channels, out), Saved::Pool { shape })
                }
                LayerSpec::MaxPool => {
                    let shape = (x.height, x.width, x.channels);
                    let c = x.channels;
                    let mut index: Vec<usize> = (0..c).collect();
                    for (p, px) in x.data.chunks_exact(c).enumerate().skip(1) {
                        for ch in 0..c {
                            if px[ch] > x.data[index[ch]] {
                                index[ch] = p * c + ch;
                            }
                        }
                    }
                    let out = index.iter().map(|i| x.data[*i]).collect();
                    (
                        Tensor::new(1, 1, c, out),
                        Saved::ArgMax {
                            input_len: x.data.len(),
                            shape,
                            index,
                        },
                    )
                }
                LayerSpec::Dropout { rate } => {
                    if mode == ForwardMode::Deterministic || rate == 0.0 {
                        (x, Saved::Nothing)
                    } else {
                        let mask = dropout_mask(seed, idx, rate, x.data.len());
                        let data = x.data.iter().zip(&mask).map(|(v, m)| v * m).collect();
                        (
                            Tensor::new(x.height, x.width, x.channels, data),
                            Saved::Mask(mask),
                        )
                    }
                }
                LayerSpec::Dense { inputs, outputs } => {
                    if x.data.len() != inputs {
                        return Err(CoreError::Domain(format!(
                            "layer {idx}: dense layer expects {inputs} inputs, got {}",
                            x.data.len()
                        )));
                    }
                    let out = (0..outputs)
                        .map(|o| {
                            let row = &w[o * inputs..(o + 1) * inputs];
                            w[outputs * inputs + o]
                                + row.iter().zip(&x.data).map(|(a, b)| a * b).sum::<f64>()
                        })
                        .collect();
                    (Tensor::new(1, 1, outputs, out), Saved::Input(x))
                }
                LayerSpec::PositiveHead => {
                    let y = positive_head(&x.data);
                    (Tensor::new(1, 1, 3, y.clone()), Saved::Output(y))
                }
            };
            if next.data.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::Numeric {
                    layer: idx,
                    what: "activation".into(),
                });
            }
            if let Some(t) = trace.as_deref_mut() {
                t.saved.push(saved);
            }
            x = next;
        }
        Ok(x.data)
    }

    fn layer_backward(
        &self,
        idx: usize,
        layer: &LayerSpec,
        saved: &Saved,
        grad: Tensor,
        dw: &mut [f64],
    ) -> Tensor {
        let w = &self.params[idx];
        match (*layer, saved) {
            (LayerSpec::Conv3x3 { in_ch, out_ch }, Saved::Input(x)) => {
                conv3x3_backward(x, w, in_ch, out_ch, &grad, dw)
            }
            (LayerSpec::Pointwise { in_ch, out_ch }, Saved::Input(x)) => {
                let mut dx = x.zeros_like();
                let bias = out_ch * in_ch;
                for (p, g_px) in grad.data.chunks_exact(out_ch).enumerate() {
                    let x_px = &x.data[p * in_ch..(p + 1) * in_ch];
                    let dx_px = &mut dx.data[p * in_ch..(p + 1) * in_ch];
                    for (o, g) in g_px.iter().enumerate() {
                        dw[bias + o] += g;
                        for i in 0..in_ch {
                            dw[o * in_ch + i] += g * x_px[i];
                            dx_px[i] += g * w[o * in_ch + i];
                        }
                    }
                }
                dx
            }
            (LayerSpec::Relu, Saved::Input(x)) => {
                let data = x
                    .data
                    .iter()
                    .zip(&grad.data)
                    .map(|(v, g)| if *v > 0.0 { *g } else { 0.0 })
                    .collect();
                Tensor::new(x.height, x.width, x.channels, data)
            }
            (LayerSpec::MeanPool, Saved::Pool { shape: (h, w, c) }) => {
                let n = (h * w) as f64;
                let data = (0..h * w)
                    .flat_map(|_| grad.data.iter().map(|g| g / n))
                    .collect();
                Tensor::new(*h, *w, *c, data)
            }
            (
                LayerSpec::MaxPool,
                Saved::ArgMax {
                    input_len,
                    shape: (h, w, c),
                    index,
                },
            ) => {
                let mut data = vec![0.0; *input_len];
                for (i, g) in index.iter().zip(&grad.data) {
                    data[*i] += g;
                }
                Tensor::new(*h, *w, *c, data)
            }
            (LayerSpec::Dropout { .. }, Saved::Mask(mask)) => {
                let data = grad.data.iter().zip(mask).map(|(g, m)| g * m).collect();
                Tensor::new(grad.height, grad.width, grad.channels, data)
            }
            (LayerSpec::Dropout { .. }, Saved::Nothing) => grad,
            (LayerSpec::Dense { inputs, outputs }, Saved::Input(x)) => {
                let mut dx = x.zeros_like();
                for (o, g) in grad.data.iter().enumerate() {
                    dw[outputs * inputs + o] += g;
                    for i in 0..inputs {
                        dw[o * inputs + i] += g * x.data[i];
                        dx.data[i] += g * w[o * inputs + i];
                    }
                }
                dx
            }
            (LayerSpec::PositiveHead, Saved::Output(y)) => {
                // y = e / |e| with e = exp(z): dz_j = y_j (g_j - y_j <g, y>)
                let gy: f64 = grad.data.iter().zip(y).map(|(g, v)| g * v).sum();
                let data = y
                    .iter()
                    .zip(&grad.data)
                    .map(|(v, g)| v * (g - v * gy))
                    .collect();
                Tensor::new(1, 1, 3, data)
            }
            _ => unreachable!("saved state does not match layer {idx}"),
        }
    }
}

/// Training loss: one minus the cosine between prediction and target.
pub fn loss(pred: &Illuminant, gt: &Illuminant) -> f64 {
    1.0 - pred.dot(gt)
}

fn validate(layers: &[LayerSpec]) -> Result<()> {
    let bad = |i: usize, msg: &str| Err(CoreError::Domain(format!("layer {i}: {msg}")));
    let mut channels = 3usize;
    let mut spatial = true;
    for (i, l) in layers.iter().enumerate() {
        match *l {
            LayerSpec::Conv3x3 { in_ch, out_ch } | LayerSpec::Pointwise { in_ch, out_ch } => {
                if !spatial {
                    return bad(i, "spatial layer after global pooling");
                }
                if in_ch != channels || out_ch == 0 {
                    return bad(i, "channel mismatch");
                }
                channels = out_ch;
            }
            LayerSpec::Relu => {}
            LayerSpec::MeanPool | LayerSpec::MaxPool => {
                if !spatial {
                    return bad(i, "pooling applied twice");
                }
                spatial = false;
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return bad(i, "dropout rate must lie in [0, 1)");
                }
            }
            LayerSpec::Dense { inputs, outputs } => {
                if spatial {
                    return bad(i, "dense layer requires a pooled input");
                }
                if inputs != channels || outputs == 0 {
                    return bad(i, "dense size mismatch");
                }
                channels = outputs;
            }
            LayerSpec::PositiveHead => {
                if i + 1 != layers.len() {
                    return bad(i, "positive head must be the last layer");
                }
                if spatial || channels != 3 {
                    return bad(i, "positive head needs three pooled inputs");
                }
            }
        }
    }
    if layers.last() != Some(&LayerSpec::PositiveHead) {
        return Err(CoreError::Domain(
            "network must end with a positive head".into(),
        ));
    }
    Ok(())
}

fn check_channels(idx: usize, x: &Tensor, expected: usize) -> Result<()> {
    if x.channels == expected {
        Ok(())
    } else {
        Err(CoreError::Domain(format!(
            "layer {idx}: expected {expected} channels, got {}",
            x.channels
        )))
    }
}

fn output_illuminant(out: Vec<f64>, layer: usize) -> Result<Illuminant> {
    Illuminant::from_unit(out[0], out[1], out[2]).map_err(|e| CoreError::Numeric {
        layer,
        what: e.to_string(),
    })
}

/// Inverted dropout mask: kept units are scaled by `1 / (1 - rate)`.
fn dropout_mask(seed: PassSeed, layer_index: usize, rate: f64, len: usize) -> Vec<f64> {
    let mut rng = seed.layer_stream(layer_index);
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

fn positive_head(z: &[f64]) -> Vec<f64> {
    let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z
        .iter()
        .map(|v| (v - top).max(-HEAD_LOGIT_SPREAD).exp())
        .collect();
    let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    e.into_iter().map(|v| v / norm).collect()
}

fn pointwise(x: &Tensor, w: &[f64], in_ch: usize, out_ch: usize) -> Tensor {
    let bias = out_ch * in_ch;
    let data = x
        .data
        .chunks_exact(in_ch)
        .flat_map(|px| {
            (0..out_ch).map(move |o| {
                let row = &w[o * in_ch..(o + 1) * in_ch];
                w[bias + o] + row.iter().zip(px).map(|(a, b)| a * b).sum::<f64>()
            })
        })
        .collect();
    Tensor::new(x.height, x.width, out_ch, data)
}

fn conv3x3(x: &Tensor, w: &[f64], in_ch: usize, out_ch: usize) -> Tensor {
    let (h, wd) = (x.height, x.width);
    let bias = out_ch * in_ch * 9;
    let mut out = vec![0.0; h * wd * out_ch];
    for y in 0..h {
        for xx in 0..wd {
            let o_px = &mut out[(y * wd + xx) * out_ch..(y * wd + xx + 1) * out_ch];
            o_px.copy_from_slice(&w[bias..bias + out_ch]);
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let sx = xx as isize + kx as isize - 1;
                    if sx < 0 || sx >= wd as isize {
                        continue;
                    }
                    let base = (sy as usize * wd + sx as usize) * in_ch;
                    let src = &x.data[base..base + in_ch];
                    for (o, acc) in o_px.iter_mut().enumerate() {
                        let wo = &w[o * in_ch * 9..];
                        for (i, v) in src.iter().enumerate() {
                            *acc += wo[i * 9 + ky * 3 + kx] * v;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(h, wd, out_ch, out)
}

fn conv3x3_backward(
    x: &Tensor,
    w: &[f64],
    in_ch: usize,
    out_ch: usize,
    grad: &Tensor,
    dw: &mut [f64],
) -> Tensor {
    let (h, wd) = (x.height, x.width);
    let bias = out_ch * in_ch * 9;
    let mut dx = x.zeros_like();
    for y in 0..h {
        for xx in 0..wd {
            let g_px = &grad.data[(y * wd + xx) * out_ch..(y * wd + xx + 1) * out_ch];
            for (o, g) in g_px.iter().enumerate() {
                dw[bias + o] += g;
            }
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let sx = xx as isize + kx as isize - 1;
                    if sx < 0 || sx >= wd as isize {
                        continue;
                    }
                    let base = (sy as usize * wd + sx as usize) * in_ch;
                    for (o, g) in g_px.iter().enumerate() {
                        if *g == 0.0 {
                            continue;
                        }
                        let off = o * in_ch * 9 + ky * 3 + kx;
                        for i in 0..in_ch {
                            dw[off + i * 9] += g * x.data[base + i];
                            dx.data[base + i] += g * w[off + i * 9];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Sizes for the two stock architectures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub channels: usize,
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            channels: 8,
            hidden: 16,
            dropout: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    /// Convolution, rectifier, dropout over the feature map, mean pooling,
    /// dense head.
    GNet,
    /// Convolution, rectifier, max pooling, dropout over pooled features,
    /// dense head.
    MNet,
}

impl Arch {
    pub fn name(&self) -> &'static str {
        match self {
            Arch::GNet => "g-net",
            Arch::MNet => "m-net",
        }
    }

    pub fn layers(&self, cfg: &ArchConfig) -> Vec<LayerSpec> {
        let ArchConfig {
            channels,
            hidden,
            dropout,
        } = *cfg;
        let mut layers = vec![
            LayerSpec::Conv3x3 {
                in_ch: 3,
                out_ch: channels,
            },
            LayerSpec::Relu,
        ];
        match self {
            Arch::GNet => {
                layers.extend([LayerSpec::Dropout { rate: dropout }, LayerSpec::MeanPool])
            }
            Arch::MNet => layers.extend([LayerSpec::MaxPool, LayerSpec::Dropout { rate: dropout }]),
        }
        layers.extend([
            LayerSpec::Dense {
                inputs: channels,
                outputs: hidden,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                inputs: hidden,
                outputs: 3,
            },
            LayerSpec::PositiveHead,
        ]);
        layers
    }

    pub fn build(&self, cfg: &ArchConfig, seed: u64) -> Result<Network> {
        Network::init(self.layers(cfg), seed)
    }
}

impl std::str::FromStr for Arch {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g-net" => Ok(Arch::GNet),
            "m-net" => Ok(Arch::MNet),
            other => Err(CoreError::Domain(format!("unknown architecture `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests;
