use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::gemm::{gemm, View};
use super::params::Parameterized;
use super::Tensor3;
use crate::error::{Error, Result};
use crate::rng::{gaussian_vec, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Pad by `(k-1)/2` on every side, replicating edge samples.
    #[default]
    SameReplicate,
    /// No padding; each side shrinks by `(k-1)/2`.
    Valid,
}

/// Per-side replicate padding, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct Pads {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Pads {
    pub fn uniform(r: usize) -> Self {
        Self {
            top: r,
            bottom: r,
            left: r,
            right: r,
        }
    }

    fn is_zero(&self) -> bool {
        *self == Pads::default()
    }
}

impl Padding {
    fn pads(self, kernel_size: usize) -> Pads {
        match self {
            Padding::SameReplicate => Pads::uniform((kernel_size - 1) / 2),
            Padding::Valid => Pads::default(),
        }
    }
}

/// Square-kernel 2-D convolution layer. Weights are laid out
/// `out x in x k x k`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl ConvLayer {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidModel(format!(
                "kernel size {kernel_size} is not odd"
            )));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidModel(
                "conv layer needs at least one channel".into(),
            ));
        }
        if weights.len() != out_channels * in_channels * kernel_size * kernel_size
            || biases.len() != out_channels
        {
            return Err(Error::InvalidModel(format!(
                "{} weights / {} biases for a {in_channels}->{out_channels} {kernel_size}x{kernel_size} layer",
                weights.len(),
                biases.len()
            )));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel_size,
            weights,
            biases,
        })
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize) -> Result<Self> {
        let n = out_channels * in_channels * kernel_size * kernel_size;
        Self::new(
            in_channels,
            out_channels,
            kernel_size,
            vec![0.0; n],
            vec![0.0; out_channels],
        )
    }

    /// Gaussian weights with standard deviation `1/sqrt(fan_in)`, zero biases.
    pub fn random(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let fan_in = in_channels * kernel_size * kernel_size;
        let weights = gaussian_vec(rng, out_channels * fan_in, 1.0 / (fan_in as f64).sqrt());
        Self::new(
            in_channels,
            out_channels,
            kernel_size,
            weights,
            vec![0.0; out_channels],
        )
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn radius(&self) -> usize {
        (self.kernel_size - 1) / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    #[inline]
    pub fn weight(&self, o: usize, c: usize, ky: usize, kx: usize) -> f64 {
        let k = self.kernel_size;
        self.weights[((o * self.in_channels + c) * k + ky) * k + kx]
    }

    fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_size * self.kernel_size
    }
}

impl Parameterized for ConvLayer {
    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.biases);
    }

    fn read_params(&mut self, src: &[f64]) {
        let (nw, nb) = (self.weights.len(), self.biases.len());
        self.weights.copy_from_slice(&src[..nw]);
        self.biases.copy_from_slice(&src[nw..nw + nb]);
    }
}

fn pad_replicate(input: &Tensor3, pads: Pads) -> Tensor3 {
    let (c, h, w) = input.shape();
    let (ph, pw) = (h + pads.top + pads.bottom, w + pads.left + pads.right);
    let mut out = Vec::with_capacity(c * ph * pw);
    for ch in 0..c {
        let plane = input.channel(ch);
        for y in 0..ph {
            let sy = y.saturating_sub(pads.top).min(h - 1);
            let row = &plane[sy * w..(sy + 1) * w];
            out.extend(std::iter::repeat_n(row[0], pads.left));
            out.extend_from_slice(row);
            out.extend(std::iter::repeat_n(row[w - 1], pads.right));
        }
    }
    Tensor3::from_parts(c, ph, pw, out)
}

/// Unrolls `k x k` windows into a `(c*k*k) x (oh*ow)` row-major matrix.
fn im2col(padded: &Tensor3, k: usize, oh: usize, ow: usize) -> Cow<'_, [f64]> {
    if k == 1 {
        return Cow::Borrowed(padded.values());
    }
    let (c, ph, pw) = padded.shape();
    let n = oh * ow;
    let mut cols = vec![0.0; c * k * k * n];
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ch * k + ky) * k + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for y in 0..oh {
                    let src = (ch * ph + y + ky) * pw + kx;
                    dst[y * ow..(y + 1) * ow].copy_from_slice(&padded.values()[src..src + ow]);
                }
            }
        }
    }
    Cow::Owned(cols)
}

/// Adds each column of `cols` back onto the window positions it came from.
fn col2im(cols: &[f64], c: usize, k: usize, ph: usize, pw: usize, oh: usize, ow: usize) -> Tensor3 {
    let n = oh * ow;
    let mut out = vec![0.0; c * ph * pw];
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ch * k + ky) * k + kx;
                let src = &cols[row * n..(row + 1) * n];
                for y in 0..oh {
                    let dst = (ch * ph + y + ky) * pw + kx;
                    for (d, s) in out[dst..dst + ow]
                        .iter_mut()
                        .zip(&src[y * ow..(y + 1) * ow])
                    {
                        *d += s;
                    }
                }
            }
        }
    }
    Tensor3::from_parts(c, ph, pw, out)
}

/// Sums gradients of replicated border samples back onto their sources.
fn unpad_grad(grad: &Tensor3, pads: Pads, h: usize, w: usize) -> Tensor3 {
    if pads.is_zero() {
        return grad.clone();
    }
    let (c, ph, pw) = grad.shape();
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..ph {
            let sy = y.saturating_sub(pads.top).min(h - 1);
            for x in 0..pw {
                let sx = x.saturating_sub(pads.left).min(w - 1);
                out[(ch * h + sy) * w + sx] += grad.get(ch, y, x);
            }
        }
    }
    Tensor3::from_parts(c, h, w, out)
}

fn output_dims(input: &Tensor3, layer: &ConvLayer, pads: Pads) -> Result<(usize, usize)> {
    if input.channels() != layer.in_channels {
        return Err(Error::DimensionMismatch(format!(
            "input has {} channels, layer expects {}",
            input.channels(),
            layer.in_channels
        )));
    }
    let k = layer.kernel_size;
    let ph = input.height() + pads.top + pads.bottom;
    let pw = input.width() + pads.left + pads.right;
    if ph < k || pw < k || input.height() == 0 || input.width() == 0 {
        return Err(Error::TooSmall(format!(
            "{}x{} input (padded {ph}x{pw}) is smaller than the {k}x{k} kernel",
            input.height(),
            input.width()
        )));
    }
    Ok((ph - k + 1, pw - k + 1))
}

pub(crate) fn conv_forward_pads(input: &Tensor3, layer: &ConvLayer, pads: Pads) -> Result<Tensor3> {
    let (oh, ow) = output_dims(input, layer, pads)?;
    let padded = if pads.is_zero() {
        Cow::Borrowed(input)
    } else {
        Cow::Owned(pad_replicate(input, pads))
    };
    let cols = im2col(&padded, layer.kernel_size, oh, ow);
    let n = oh * ow;
    let mut out = Vec::with_capacity(layer.out_channels * n);
    for &b in &layer.biases {
        out.extend(std::iter::repeat_n(b, n));
    }
    gemm(
        View::row_major(&layer.weights, layer.out_channels, layer.fan_in()),
        View::row_major(&cols, layer.fan_in(), n),
        1.0,
        &mut out,
    );
    Ok(Tensor3::from_parts(layer.out_channels, oh, ow, out))
}

pub fn conv2d_forward(input: &Tensor3, layer: &ConvLayer, padding: Padding) -> Result<Tensor3> {
    conv_forward_pads(input, layer, padding.pads(layer.kernel_size))
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor3,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Returns `(input grad if requested, weight grad, bias grad)`.
pub(crate) fn conv_backward_pads(
    input: &Tensor3,
    layer: &ConvLayer,
    upstream: &Tensor3,
    pads: Pads,
    need_input_grad: bool,
) -> Result<(Option<Tensor3>, Vec<f64>, Vec<f64>)> {
    let (oh, ow) = output_dims(input, layer, pads)?;
    if upstream.shape() != (layer.out_channels, oh, ow) {
        return Err(Error::DimensionMismatch(format!(
            "upstream gradient is {:?}, forward output is {:?}",
            upstream.shape(),
            (layer.out_channels, oh, ow)
        )));
    }
    let k = layer.kernel_size;
    let n = oh * ow;
    let fan_in = layer.fan_in();
    let padded = if pads.is_zero() {
        Cow::Borrowed(input)
    } else {
        Cow::Owned(pad_replicate(input, pads))
    };
    let cols = im2col(&padded, k, oh, ow);
    let g = View::row_major(upstream.values(), layer.out_channels, n);

    let biases = (0..layer.out_channels)
        .map(|o| upstream.channel(o).iter().sum())
        .collect();

    let mut weights = vec![0.0; layer.out_channels * fan_in];
    gemm(g, View::row_major(&cols, fan_in, n).t(), 0.0, &mut weights);

    let input_grad = if need_input_grad {
        let mut dcols = vec![0.0; fan_in * n];
        gemm(
            View::row_major(&layer.weights, layer.out_channels, fan_in).t(),
            g,
            0.0,
            &mut dcols,
        );
        let (_, ph, pw) = padded.shape();
        let dpadded = col2im(&dcols, layer.in_channels, k, ph, pw, oh, ow);
        Some(unpad_grad(&dpadded, pads, input.height(), input.width()))
    } else {
        None
    };
    Ok((input_grad, weights, biases))
}

pub fn conv2d_backward(
    input: &Tensor3,
    layer: &ConvLayer,
    upstream: &Tensor3,
    padding: Padding,
) -> Result<ConvGrads> {
    let (input_grad, weights, biases) = conv_backward_pads(
        input,
        layer,
        upstream,
        padding.pads(layer.kernel_size),
        true,
    )?;
    Ok(ConvGrads {
        input: input_grad.expect("input gradient requested"),
        weights,
        biases,
    })
}
