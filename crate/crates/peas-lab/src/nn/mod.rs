//! Minimal dense-tensor neural-network engine.
//!
//! Networks are ordered lists of layers (convolution, dense, relu, max-pool,
//! global-average-pool, flatten) with exact forward passes and analytic
//! gradients with respect to both parameters (training) and inputs
//! (gradient-based attacks). Everything is plain `f32` on CPU, accumulated in
//! a fixed order, so repeated calls with identical arguments return identical
//! outputs. A `Network` is immutable once built or loaded and safe to share
//! across threads.

mod train;

pub use train::{train_epoch, TrainConfig};

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;
use serde::{Deserialize, Serialize};

/// A layer of the network. Parameters live inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Layer {
    /// 2-D convolution, stride 1, zero padding. Weight layout is
    /// `[out_c][in_c][ky][kx]`, bias `[out_c]`.
    Conv2d {
        weight: Vec<f32>,
        bias: Vec<f32>,
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        padding: usize,
    },
    /// Fully connected layer over a flat input. Weight layout `[out][in]`.
    Dense {
        weight: Vec<f32>,
        bias: Vec<f32>,
        out_dim: usize,
        in_dim: usize,
    },
    Relu,
    /// 2x2 max pooling with stride 2; trailing odd rows/cols are dropped.
    MaxPool2,
    /// Mean over the spatial dimensions, per channel.
    GlobalAvgPool,
    /// Reshape (C, H, W) -> (C*H*W, 1, 1). No-op on the data buffer.
    Flatten,
}

impl Layer {
    /// Output shape for the given input shape, or a descriptive error when
    /// the shapes are incompatible.
    fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let (c, h, w) = input;
        match self {
            Layer::Conv2d {
                out_channels,
                in_channels,
                kernel,
                padding,
                ..
            } => {
                if c != *in_channels {
                    return Err(Error::shape(
                        "conv2d",
                        format!("{in_channels} input channels"),
                        format!("{c}"),
                    ));
                }
                let oh = (h + 2 * padding).checked_sub(*kernel - 1).filter(|&v| v > 0);
                let ow = (w + 2 * padding).checked_sub(*kernel - 1).filter(|&v| v > 0);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok((*out_channels, oh, ow)),
                    _ => Err(Error::shape(
                        "conv2d",
                        format!("spatial extent >= kernel {kernel}"),
                        format!("{h}x{w} with padding {padding}"),
                    )),
                }
            }
            Layer::Dense { out_dim, in_dim, .. } => {
                if (c, h, w) != (*in_dim, 1, 1) {
                    return Err(Error::shape(
                        "dense",
                        format!("flat input of {in_dim}"),
                        format!("{c}x{h}x{w}"),
                    ));
                }
                Ok((*out_dim, 1, 1))
            }
            Layer::Relu => Ok((c, h, w)),
            Layer::MaxPool2 => {
                if h < 2 || w < 2 {
                    return Err(Error::shape("maxpool2", "spatial extent >= 2", format!("{h}x{w}")));
                }
                Ok((c, h / 2, w / 2))
            }
            Layer::GlobalAvgPool => Ok((c, 1, 1)),
            Layer::Flatten => Ok((c * h * w, 1, 1)),
        }
    }
}

/// Per-layer parameter gradients, aligned with `Network::layers`.
#[derive(Debug, Clone)]
pub enum LayerGrad {
    Params { weight: Vec<f32>, bias: Vec<f32> },
    None,
}

/// Loss plus the exact gradient of the loss with respect to the input image.
#[derive(Debug, Clone)]
pub struct GradientResult {
    pub loss: f32,
    pub input_grad: ImageTensor,
}

/// A feed-forward classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    arch_id: String,
    input_shape: (usize, usize, usize),
    num_classes: usize,
    layers: Vec<Layer>,
}

/// Internal activation buffer; dense layers see (len, 1, 1).
#[derive(Debug, Clone)]
struct Volume {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Volume {
    fn zeros(c: usize, h: usize, w: usize) -> Self {
        Volume {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    #[inline]
    fn row(&self, c: usize, y: usize) -> &[f32] {
        let start = (c * self.h + y) * self.w;
        &self.data[start..start + self.w]
    }

    #[inline]
    fn row_mut(&mut self, c: usize, y: usize) -> &mut [f32] {
        let start = (c * self.h + y) * self.w;
        &mut self.data[start..start + self.w]
    }
}

impl Network {
    /// Build a network, validating that consecutive layer shapes are
    /// compatible and that the output is a flat vector of class logits.
    pub fn new(
        arch_id: impl Into<String>,
        input_shape: (usize, usize, usize),
        layers: Vec<Layer>,
    ) -> Result<Self> {
        let arch_id = arch_id.into();
        let mut shape = input_shape;
        for (i, layer) in layers.iter().enumerate() {
            shape = layer.output_shape(shape).map_err(|e| match e {
                Error::ShapeMismatch {
                    context,
                    expected,
                    actual,
                } => Error::ShapeMismatch {
                    context: format!("{arch_id} layer {i} ({context})"),
                    expected,
                    actual,
                },
                other => other,
            })?;
        }
        if shape.1 != 1 || shape.2 != 1 {
            return Err(Error::shape(
                format!("{arch_id} output"),
                "flat logits (K, 1, 1)",
                format!("{:?}", shape),
            ));
        }
        Ok(Network {
            arch_id,
            input_shape,
            num_classes: shape.0,
            layers,
        })
    }

    pub fn arch_id(&self) -> &str {
        &self.arch_id
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Named parameter tensors in layer order, e.g. `("layer0.weight", &[...])`.
    pub fn parameters(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv2d {
                    weight,
                    bias,
                    out_channels,
                    in_channels,
                    kernel,
                    ..
                } => {
                    out.push((
                        format!("layer{i}.weight"),
                        vec![*out_channels, *in_channels, *kernel, *kernel],
                        weight.as_slice(),
                    ));
                    out.push((format!("layer{i}.bias"), vec![*out_channels], bias.as_slice()));
                }
                Layer::Dense {
                    weight,
                    bias,
                    out_dim,
                    in_dim,
                } => {
                    out.push((
                        format!("layer{i}.weight"),
                        vec![*out_dim, *in_dim],
                        weight.as_slice(),
                    ));
                    out.push((format!("layer{i}.bias"), vec![*out_dim], bias.as_slice()));
                }
                _ => {}
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, _, v)| v.len()).sum()
    }

    pub fn parameters_finite(&self) -> bool {
        self.parameters()
            .iter()
            .all(|(_, _, v)| v.iter().all(|x| x.is_finite()))
    }

    fn check_input(&self, x: &ImageTensor) -> Result<()> {
        if x.shape() != self.input_shape {
            return Err(Error::shape(
                format!("{} forward", self.arch_id),
                format!("{:?}", self.input_shape),
                format!("{:?}", x.shape()),
            ));
        }
        Ok(())
    }

    /// Raw logits (pre-softmax). Deterministic for fixed `(self, x)`.
    pub fn forward(&self, x: &ImageTensor) -> Result<Vec<f32>> {
        self.check_input(x)?;
        let mut cur = Volume {
            c: x.channels(),
            h: x.height(),
            w: x.width(),
            data: x.data().to_vec(),
        };
        for layer in &self.layers {
            cur = forward_layer(layer, &cur);
        }
        Ok(cur.data)
    }

    /// Class prediction: argmax of the logits, lowest index on ties.
    pub fn predict(&self, x: &ImageTensor) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Exact analytic gradient of `cross_entropy_loss(forward(x), y)` w.r.t. `x`.
    pub fn input_gradient(&self, x: &ImageTensor, y: usize) -> Result<GradientResult> {
        let (loss, din, _) = self.backward(x, y, false)?;
        Ok(GradientResult {
            loss,
            input_grad: ImageTensor::new(x.shape(), din)?,
        })
    }

    /// Loss and parameter gradients for one sample (training path).
    pub fn parameter_gradients(&self, x: &ImageTensor, y: usize) -> Result<(f32, Vec<LayerGrad>)> {
        let (loss, _, grads) = self.backward(x, y, true)?;
        Ok((loss, grads))
    }

    /// Shared backward pass. Always computes the input gradient; parameter
    /// gradients only when `want_params` is set.
    fn backward(&self, x: &ImageTensor, y: usize, want_params: bool) -> Result<(f32, Vec<f32>, Vec<LayerGrad>)> {
        self.check_input(x)?;
        if y >= self.num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                classes: self.num_classes,
            });
        }

        // Forward, caching every layer input.
        let mut inputs: Vec<Volume> = Vec::with_capacity(self.layers.len());
        let mut cur = Volume {
            c: x.channels(),
            h: x.height(),
            w: x.width(),
            data: x.data().to_vec(),
        };
        for layer in &self.layers {
            let next = forward_layer(layer, &cur);
            inputs.push(cur);
            cur = next;
        }
        let logits = cur.data;

        let loss = cross_entropy_loss(&logits, y)?;
        let probs = softmax(&logits)?;
        let mut dout = Volume {
            c: logits.len(),
            h: 1,
            w: 1,
            data: probs,
        };
        dout.data[y] -= 1.0;

        let mut grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());
        for (layer, input) in self.layers.iter().zip(inputs.iter()).rev() {
            let (din, grad) = backward_layer(layer, input, &dout, want_params);
            if want_params {
                grads.push(grad);
            }
            dout = din;
        }
        grads.reverse();
        Ok((loss, dout.data, grads))
    }
}

/// Numerically stable softmax (max subtraction). Errors on non-finite input.
pub fn softmax(logits: &[f32]) -> Result<Vec<f32>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input".to_string()));
    }
    Ok(softmax_unchecked(logits))
}

fn softmax_unchecked(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = logits.iter().map(|&v| ((v - max) as f64).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| (e / sum) as f32).collect()
}

/// Cross-entropy of the true class under `softmax(logits)`, via log-sum-exp;
/// equals `-ln(softmax(logits)[y])` and is shift invariant.
pub fn cross_entropy_loss(logits: &[f32], y: usize) -> Result<f32> {
    if y >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label: y,
            classes: logits.len(),
        });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cross_entropy_loss input".to_string()));
    }
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let sum: f64 = logits.iter().map(|&v| ((v - max) as f64).exp()).sum();
    let lse = max as f64 + sum.ln();
    Ok((lse - logits[y] as f64) as f32)
}

/// Softmax probability of class `y`, the ranking signal for transferability.
pub fn class_probability(logits: &[f32], y: usize) -> Result<f32> {
    let p = softmax(logits)?;
    p.get(y).copied().ok_or(Error::LabelOutOfRange {
        label: y,
        classes: p.len(),
    })
}

pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn forward_layer(layer: &Layer, input: &Volume) -> Volume {
    match layer {
        Layer::Conv2d {
            weight,
            bias,
            out_channels,
            in_channels,
            kernel,
            padding,
        } => conv_forward(input, weight, bias, *out_channels, *in_channels, *kernel, *padding),
        Layer::Dense {
            weight,
            bias,
            out_dim,
            in_dim,
        } => {
            let mut out = Volume::zeros(*out_dim, 1, 1);
            for j in 0..*out_dim {
                let row = &weight[j * in_dim..(j + 1) * in_dim];
                let mut acc = bias[j];
                for (w, v) in row.iter().zip(&input.data) {
                    acc += w * v;
                }
                out.data[j] = acc;
            }
            out
        }
        Layer::Relu => Volume {
            c: input.c,
            h: input.h,
            w: input.w,
            data: input.data.iter().map(|&v| v.max(0.0)).collect(),
        },
        Layer::MaxPool2 => {
            let (oh, ow) = (input.h / 2, input.w / 2);
            let mut out = Volume::zeros(input.c, oh, ow);
            for c in 0..input.c {
                for y in 0..oh {
                    let top = input.row(c, 2 * y);
                    let bot = input.row(c, 2 * y + 1);
                    let dst = out.row_mut(c, y);
                    for x in 0..ow {
                        let m = top[2 * x]
                            .max(top[2 * x + 1])
                            .max(bot[2 * x])
                            .max(bot[2 * x + 1]);
                        dst[x] = m;
                    }
                }
            }
            out
        }
        Layer::GlobalAvgPool => {
            let hw = (input.h * input.w) as f32;
            let mut out = Volume::zeros(input.c, 1, 1);
            for c in 0..input.c {
                let start = c * input.h * input.w;
                let sum: f32 = input.data[start..start + input.h * input.w].iter().sum();
                out.data[c] = sum / hw;
            }
            out
        }
        Layer::Flatten => Volume {
            c: input.c * input.h * input.w,
            h: 1,
            w: 1,
            data: input.data.clone(),
        },
    }
}

fn conv_forward(
    input: &Volume,
    weight: &[f32],
    bias: &[f32],
    oc: usize,
    ic: usize,
    k: usize,
    pad: usize,
) -> Volume {
    let (h, w) = (input.h, input.w);
    let oh = h + 2 * pad - (k - 1);
    let ow = w + 2 * pad - (k - 1);
    let mut out = Volume::zeros(oc, oh, ow);
    for o in 0..oc {
        let b = bias[o];
        let start = o * oh * ow;
        for v in &mut out.data[start..start + oh * ow] {
            *v = b;
        }
        for i in 0..ic {
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weight[((o * ic + i) * k + ky) * k + kx];
                    // Output x range for which the input column index is valid.
                    let x0 = pad.saturating_sub(kx);
                    let x1 = ow.min(w + pad - kx);
                    if x0 >= x1 {
                        continue;
                    }
                    let dx = kx + x0 - pad; // input column for output x0
                    for y in 0..oh {
                        let iy = y + ky;
                        if iy < pad || iy >= h + pad {
                            continue;
                        }
                        let src = &input.row(i, iy - pad)[dx..dx + (x1 - x0)];
                        let dst = &mut out.row_mut(o, y)[x0..x1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Backward through one layer: gradient w.r.t. the layer input plus, when
/// requested, w.r.t. its parameters.
fn backward_layer(layer: &Layer, input: &Volume, dout: &Volume, want_params: bool) -> (Volume, LayerGrad) {
    match layer {
        Layer::Conv2d {
            weight,
            out_channels,
            in_channels,
            kernel,
            padding,
            ..
        } => {
            let (oc, ic, k, pad) = (*out_channels, *in_channels, *kernel, *padding);
            let (h, w) = (input.h, input.w);
            let (oh, ow) = (dout.h, dout.w);
            let mut din = Volume::zeros(ic, h, w);
            for o in 0..oc {
                for i in 0..ic {
                    for ky in 0..k {
                        for kx in 0..k {
                            let wv = weight[((o * ic + i) * k + ky) * k + kx];
                            let x0 = pad.saturating_sub(kx);
                            let x1 = ow.min(w + pad - kx);
                            if x0 >= x1 {
                                continue;
                            }
                            let dx = kx + x0 - pad;
                            for y in 0..oh {
                                let iy = y + ky;
                                if iy < pad || iy >= h + pad {
                                    continue;
                                }
                                let src = &dout.row(o, y)[x0..x1];
                                let dst = &mut din.row_mut(i, iy - pad)[dx..dx + (x1 - x0)];
                                for (d, s) in dst.iter_mut().zip(src) {
                                    *d += wv * s;
                                }
                            }
                        }
                    }
                }
            }
            let grad = if want_params {
                let mut dw = vec![0.0f32; weight.len()];
                let mut db = vec![0.0f32; oc];
                for o in 0..oc {
                    let start = o * oh * ow;
                    db[o] = dout.data[start..start + oh * ow].iter().sum();
                    for i in 0..ic {
                        for ky in 0..k {
                            for kx in 0..k {
                                let x0 = pad.saturating_sub(kx);
                                let x1 = ow.min(w + pad - kx);
                                if x0 >= x1 {
                                    continue;
                                }
                                let dx = kx + x0 - pad;
                                let mut acc = 0.0f32;
                                for y in 0..oh {
                                    let iy = y + ky;
                                    if iy < pad || iy >= h + pad {
                                        continue;
                                    }
                                    let g = &dout.row(o, y)[x0..x1];
                                    let v = &input.row(i, iy - pad)[dx..dx + (x1 - x0)];
                                    for (gv, vv) in g.iter().zip(v) {
                                        acc += gv * vv;
                                    }
                                }
                                dw[((o * ic + i) * k + ky) * k + kx] = acc;
                            }
                        }
                    }
                }
                LayerGrad::Params { weight: dw, bias: db }
            } else {
                LayerGrad::None
            };
            (din, grad)
        }
        Layer::Dense {
            weight,
            out_dim,
            in_dim,
            ..
        } => {
            let mut din = Volume::zeros(input.c, input.h, input.w);
            for j in 0..*out_dim {
                let g = dout.data[j];
                let row = &weight[j * in_dim..(j + 1) * in_dim];
                for (d, w) in din.data.iter_mut().zip(row) {
                    *d += g * w;
                }
            }
            let grad = if want_params {
                let mut dw = vec![0.0f32; weight.len()];
                for j in 0..*out_dim {
                    let g = dout.data[j];
                    let dst = &mut dw[j * in_dim..(j + 1) * in_dim];
                    for (d, v) in dst.iter_mut().zip(&input.data) {
                        *d = g * v;
                    }
                }
                LayerGrad::Params {
                    weight: dw,
                    bias: dout.data.clone(),
                }
            } else {
                LayerGrad::None
            };
            (din, grad)
        }
        Layer::Relu => {
            let data = input
                .data
                .iter()
                .zip(&dout.data)
                .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
                .collect();
            (
                Volume {
                    c: input.c,
                    h: input.h,
                    w: input.w,
                    data,
                },
                LayerGrad::None,
            )
        }
        Layer::MaxPool2 => {
            let (oh, ow) = (dout.h, dout.w);
            let mut din = Volume::zeros(input.c, input.h, input.w);
            for c in 0..input.c {
                for y in 0..oh {
                    for x in 0..ow {
                        // First maximum in scan order (0,0),(0,1),(1,0),(1,1)
                        // receives the whole gradient, matching forward.
                        let mut best = (2 * y, 2 * x);
                        let mut bv = input.row(c, 2 * y)[2 * x];
                        for (dy, dxx) in [(0, 1), (1, 0), (1, 1)] {
                            let v = input.row(c, 2 * y + dy)[2 * x + dxx];
                            if v > bv {
                                bv = v;
                                best = (2 * y + dy, 2 * x + dxx);
                            }
                        }
                        din.row_mut(c, best.0)[best.1] += dout.row(c, y)[x];
                    }
                }
            }
            (din, LayerGrad::None)
        }
        Layer::GlobalAvgPool => {
            let hw = (input.h * input.w) as f32;
            let mut din = Volume::zeros(input.c, input.h, input.w);
            for c in 0..input.c {
                let g = dout.data[c] / hw;
                let start = c * input.h * input.w;
                for v in &mut din.data[start..start + input.h * input.w] {
                    *v = g;
                }
            }
            (din, LayerGrad::None)
        }
        Layer::Flatten => (
            Volume {
                c: input.c,
                h: input.h,
                w: input.w,
                data: dout.data.clone(),
            },
            LayerGrad::None,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_net(weight: Vec<f32>, bias: Vec<f32>, out_dim: usize, in_dim: usize) -> Network {
        Network::new(
            "test-dense",
            (in_dim, 1, 1),
            vec![Layer::Dense {
                weight,
                bias,
                out_dim,
                in_dim,
            }],
        )
        .unwrap()
    }

    #[test]
    fn zero_weight_dense_gives_zero_logits() {
        let net = dense_net(vec![0.0; 6], vec![0.0; 2], 2, 3);
        let x = ImageTensor::new((3, 1, 1), vec![0.3, 0.9, 0.1]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_dense_passes_value_through() {
        let net = dense_net(vec![1.0], vec![0.0], 1, 1);
        let x = ImageTensor::new((1, 1, 1), vec![0.7]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), vec![0.7]);
    }

    #[test]
    fn forward_rejects_shape_mismatch() {
        let net = dense_net(vec![0.0; 6], vec![0.0; 2], 2, 3);
        let x = ImageTensor::zeros((2, 1, 1));
        let err = net.forward(&x).unwrap_err();
        assert!(err.to_string().contains("shape mismatch"), "{err}");
    }

    #[test]
    fn forward_is_pure() {
        let net = dense_net(vec![0.2, -0.4, 0.6, 0.1, 0.0, -0.9], vec![0.05, -0.02], 2, 3);
        let x = ImageTensor::new((3, 1, 1), vec![0.4, 0.5, 0.6]).unwrap();
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn softmax_symmetry_and_shift_invariance() {
        let p = softmax(&[0.0, 0.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-7 && (p[1] - 0.5).abs() < 1e-7);

        let q = softmax(&[3.25, 3.25, 3.25, 3.25]).unwrap();
        for v in q {
            assert!((v - 0.25).abs() < 1e-7);
        }
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        let e: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).collect();
        let s: f64 = e.iter().sum();
        for (got, want) in p.iter().zip(e.iter().map(|v| v / s)) {
            assert!((*got as f64 - want).abs() < 1e-6);
        }
        let total: f32 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(softmax(&[f32::NAN, 0.0]).is_err());
        assert!(softmax(&[f32::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn cross_entropy_hand_cases() {
        // Confident correct prediction drives the loss to zero.
        let confident = cross_entropy_loss(&[30.0, 0.0], 0).unwrap();
        assert!(confident < 1e-6, "{confident}");

        let ln2 = cross_entropy_loss(&[0.0, 0.0], 0).unwrap();
        assert!((ln2 - std::f32::consts::LN_2).abs() < 1e-6);

        assert!(cross_entropy_loss(&[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn cross_entropy_shift_invariant() {
        let logits = [0.3f32, -1.2, 2.0];
        let base = cross_entropy_loss(&logits, 1).unwrap();
        for c in [-5.0f32, 0.5, 100.0] {
            let shifted: Vec<f32> = logits.iter().map(|v| v + c).collect();
            let l = cross_entropy_loss(&shifted, 1).unwrap();
            assert!((l - base).abs() < 1e-4, "shift {c}: {l} vs {base}");
        }
    }

    #[test]
    fn zero_network_has_zero_input_gradient() {
        let net = Network::new(
            "zero",
            (1, 4, 4),
            vec![
                Layer::Conv2d {
                    weight: vec![0.0; 2 * 1 * 3 * 3],
                    bias: vec![0.0; 2],
                    out_channels: 2,
                    in_channels: 1,
                    kernel: 3,
                    padding: 1,
                },
                Layer::Flatten,
                Layer::Dense {
                    weight: vec![0.0; 3 * 32],
                    bias: vec![0.0; 3],
                    out_dim: 3,
                    in_dim: 32,
                },
            ],
        )
        .unwrap();
        let x = ImageTensor::constant((1, 4, 4), 0.5);
        let g = net.input_gradient(&x, 1).unwrap();
        assert!(g.input_grad.data().iter().all(|&v| v == 0.0));
        assert!((g.loss - (3.0f32).ln()).abs() < 1e-6);
    }

    #[test]
    fn linear_model_gradient_matches_closed_form() {
        // logits = W x; dL/dx = W^T (softmax - onehot(y)) on a 3-pixel input.
        let w = vec![0.5, -0.2, 0.1, -0.3, 0.8, 0.4];
        let net = dense_net(w.clone(), vec![0.0; 2], 2, 3);
        let xv = [0.2f32, 0.7, 0.4];
        let x = ImageTensor::new((3, 1, 1), xv.to_vec()).unwrap();
        let y = 0;

        let logits: Vec<f32> = (0..2)
            .map(|j| (0..3).map(|i| w[j * 3 + i] * xv[i]).sum())
            .collect();
        let p = softmax(&logits).unwrap();
        let delta = [p[0] - 1.0, p[1]];
        let want: Vec<f32> = (0..3).map(|i| w[i] * delta[0] + w[3 + i] * delta[1]).collect();

        let got = net.input_gradient(&x, y).unwrap();
        for (g, e) in got.input_grad.data().iter().zip(&want) {
            assert!((g - e).abs() < 1e-6, "{g} vs {e}");
        }
    }

    #[test]
    fn maxpool_drops_trailing_odd_column() {
        let net_shape = Layer::MaxPool2.output_shape((1, 5, 5)).unwrap();
        assert_eq!(net_shape, (1, 2, 2));
    }

    #[test]
    fn network_rejects_incompatible_stack() {
        let err = Network::new(
            "bad",
            (1, 4, 4),
            vec![Layer::Dense {
                weight: vec![0.0; 4],
                bias: vec![0.0; 1],
                out_dim: 1,
                in_dim: 4,
            }],
        )
        .unwrap_err();
        assert!(err.to_string().contains("dense"), "{err}");
    }
}
