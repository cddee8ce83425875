//! Small neural-network substrate: tensors, convolution and dense layers,
//! activations, losses and hand-derived backpropagation, all in `f64`.
//!
//! Convolution is cross-correlation (no kernel flip).

mod conv;
mod dense;
mod gemm;
mod loss;
mod params;
pub mod serialize;

pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvLayer, Padding};
pub(crate) use conv::{conv_backward_pads, conv_forward_pads, Pads};
pub use dense::{
    dense_backward, dense_backward_batch, dense_forward, dense_forward_batch, Activation,
    DenseGrads, DenseLayer,
};
pub use loss::{mse_loss, softmax, softmax_cross_entropy};
pub use params::{pack_params, unpack_params, ParamVector, Parameterized};

use crate::error::{Error, Result};

/// Channel-major 3-D tensor (`channels x height x width`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Tensor3 {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != channels * height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {channels}x{height}x{width} tensor",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor value {bad}")));
        }
        Ok(Self::from_parts(channels, height, width, values))
    }

    pub(crate) fn from_parts(
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            values,
        }
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::from_parts(
            channels,
            height,
            width,
            vec![0.0; channels * height * width],
        )
    }

    pub fn from_raster(raster: &crate::raster::BandRaster) -> Self {
        Self::from_parts(
            1,
            raster.height(),
            raster.width(),
            raster.samples().to_vec(),
        )
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    /// Copies rows `y0..y0+h` and columns `x0..x0+w` of every channel.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Tensor3 {
        assert!(
            y0 + h <= self.height && x0 + w <= self.width,
            "crop out of bounds"
        );
        let mut out = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            for y in y0..y0 + h {
                let start = (c * self.height + y) * self.width + x0;
                out.extend_from_slice(&self.values[start..start + w]);
            }
        }
        Tensor3::from_parts(self.channels, h, w, out)
    }
}
