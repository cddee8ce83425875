use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Anything with a fixed set of trainable scalars. The flat layout is
/// weights (row-major) followed by biases.
pub trait Parameterized {
    fn param_count(&self) -> usize;
    fn write_params(&self, out: &mut Vec<f64>);
    /// Overwrites parameters from `src[..param_count()]`.
    fn read_params(&mut self, src: &[f64]);
}

/// All trainable scalars of a model, concatenated in layer order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(pub Vec<f64>);

impl Deref for ParamVector {
    type Target = Vec<f64>;

    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

pub fn pack_params<L: Parameterized>(layers: &[L]) -> ParamVector {
    let mut out = Vec::with_capacity(layers.iter().map(L::param_count).sum());
    for layer in layers {
        layer.write_params(&mut out);
    }
    ParamVector(out)
}

/// Rebuilds layers shaped like `template` from a flat vector.
pub fn unpack_params<L: Parameterized + Clone>(template: &[L], params: &[f64]) -> Result<Vec<L>> {
    let total: usize = template.iter().map(L::param_count).sum();
    if params.len() != total {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has {} entries, model needs {total}",
            params.len()
        )));
    }
    let mut offset = 0;
    Ok(template
        .iter()
        .map(|layer| {
            let mut layer = layer.clone();
            let n = layer.param_count();
            layer.read_params(&params[offset..offset + n]);
            offset += n;
            layer
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{ConvLayer, DenseLayer};
    use crate::rng;

    #[test]
    fn empty_model_packs_to_empty_vector() {
        let layers: Vec<DenseLayer> = Vec::new();
        assert!(pack_params(&layers).is_empty());
        assert!(unpack_params(&layers, &[]).unwrap().is_empty());
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let mut r = rng::seeded(3);
        let convs = vec![
            ConvLayer::random(1, 4, 3, &mut r).unwrap(),
            ConvLayer::random(4, 2, 1, &mut r).unwrap(),
        ];
        let packed = pack_params(&convs);
        assert_eq!(packed.len(), 4 * 9 + 4 + 2 * 4 + 2);
        assert_eq!(unpack_params(&convs, &packed).unwrap(), convs);

        let dense = vec![
            DenseLayer::random(3, 5, &mut r),
            DenseLayer::random(5, 2, &mut r),
        ];
        let packed = pack_params(&dense);
        // first layer weights come first, then its biases
        assert_eq!(&packed[..15], dense[0].weights());
        assert_eq!(unpack_params(&dense, &packed).unwrap(), dense);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let layers = vec![DenseLayer::zeros(2, 2)];
        assert!(unpack_params(&layers, &[0.0; 5]).is_err());
        assert!(unpack_params(&layers, &[0.0; 7]).is_err());
    }
}
