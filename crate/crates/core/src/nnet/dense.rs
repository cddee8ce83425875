use serde::{Deserialize, Serialize};

use super::gemm::{gemm, View};
use super::params::Parameterized;
use crate::error::{Error, Result};
use crate::rng::{gaussian_vec, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Fully connected layer; weights are `out x in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dim * out_dim || biases.len() != out_dim {
            return Err(Error::InvalidModel(format!(
                "{} weights / {} biases for a {in_dim}->{out_dim} dense layer",
                weights.len(),
                biases.len()
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            biases,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self::new(
            in_dim,
            out_dim,
            vec![0.0; in_dim * out_dim],
            vec![0.0; out_dim],
        )
        .expect("sizes agree")
    }

    pub fn identity(dim: usize) -> Self {
        let mut l = Self::zeros(dim, dim);
        for i in 0..dim {
            l.weights[i * dim + i] = 1.0;
        }
        l
    }

    /// Gaussian weights with standard deviation `1/sqrt(in_dim)`, zero biases.
    pub fn random(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let std = 1.0 / (in_dim.max(1) as f64).sqrt();
        Self::new(
            in_dim,
            out_dim,
            gaussian_vec(rng, in_dim * out_dim, std),
            vec![0.0; out_dim],
        )
        .expect("sizes agree")
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
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
}

impl Parameterized for DenseLayer {
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

pub fn dense_forward(
    input: &[f64],
    layer: &DenseLayer,
    activation: Activation,
) -> Result<Vec<f64>> {
    if input.len() != layer.in_dim {
        return Err(Error::DimensionMismatch(format!(
            "input of length {} for a layer with in_dim {}",
            input.len(),
            layer.in_dim
        )));
    }
    Ok(layer
        .weights
        .chunks_exact(layer.in_dim.max(1))
        .take(layer.out_dim)
        .zip(&layer.biases)
        .map(|(row, b)| {
            let z = if layer.in_dim == 0 {
                *b
            } else {
                b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
            };
            activation.apply(z)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Vec<f64>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Backpropagates `upstream` (gradient w.r.t. the activated `output`).
pub fn dense_backward(
    input: &[f64],
    layer: &DenseLayer,
    activation: Activation,
    output: &[f64],
    upstream: &[f64],
) -> Result<DenseGrads> {
    if input.len() != layer.in_dim
        || output.len() != layer.out_dim
        || upstream.len() != layer.out_dim
    {
        return Err(Error::DimensionMismatch(
            "dense backward shapes disagree".into(),
        ));
    }
    let delta: Vec<f64> = output
        .iter()
        .zip(upstream)
        .map(|(&y, &g)| g * activation.derivative_from_output(y))
        .collect();
    let mut weights = vec![0.0; layer.out_dim * layer.in_dim];
    let mut input_grad = vec![0.0; layer.in_dim];
    for (o, &d) in delta.iter().enumerate() {
        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
        for i in 0..layer.in_dim {
            weights[o * layer.in_dim + i] = d * input[i];
            input_grad[i] += d * row[i];
        }
    }
    Ok(DenseGrads {
        input: input_grad,
        weights,
        biases: delta,
    })
}

/// Forward pass over `n` row-major inputs; returns `n x out_dim` outputs.
pub fn dense_forward_batch(
    inputs: &[f64],
    n: usize,
    layer: &DenseLayer,
    activation: Activation,
) -> Result<Vec<f64>> {
    if inputs.len() != n * layer.in_dim {
        return Err(Error::DimensionMismatch(format!(
            "{} inputs values for {n} rows of dimension {}",
            inputs.len(),
            layer.in_dim
        )));
    }
    let mut out = Vec::with_capacity(n * layer.out_dim);
    for _ in 0..n {
        out.extend_from_slice(&layer.biases);
    }
    gemm(
        View::row_major(inputs, n, layer.in_dim),
        View::row_major(&layer.weights, layer.out_dim, layer.in_dim).t(),
        1.0,
        &mut out,
    );
    if activation != Activation::Linear {
        for v in &mut out {
            *v = activation.apply(*v);
        }
    }
    Ok(out)
}

/// Batched backward pass. Parameter gradients are summed over the batch;
/// the input gradient is returned per row.
pub fn dense_backward_batch(
    inputs: &[f64],
    n: usize,
    layer: &DenseLayer,
    activation: Activation,
    outputs: &[f64],
    upstream: &[f64],
    need_input_grad: bool,
) -> Result<DenseGrads> {
    let (din, dout) = (layer.in_dim, layer.out_dim);
    if inputs.len() != n * din || outputs.len() != n * dout || upstream.len() != n * dout {
        return Err(Error::DimensionMismatch(
            "dense batch backward shapes disagree".into(),
        ));
    }
    let delta: Vec<f64> = outputs
        .iter()
        .zip(upstream)
        .map(|(&y, &g)| g * activation.derivative_from_output(y))
        .collect();
    let dv = View::row_major(&delta, n, dout);
    let mut weights = vec![0.0; dout * din];
    gemm(dv.t(), View::row_major(inputs, n, din), 0.0, &mut weights);
    let mut biases = vec![0.0; dout];
    for row in delta.chunks_exact(dout.max(1)) {
        for (b, d) in biases.iter_mut().zip(row) {
            *b += d;
        }
    }
    let input = if need_input_grad {
        let mut g = vec![0.0; n * din];
        gemm(dv, View::row_major(&layer.weights, dout, din), 0.0, &mut g);
        g
    } else {
        Vec::new()
    };
    Ok(DenseGrads {
        input,
        weights,
        biases,
    })
}
