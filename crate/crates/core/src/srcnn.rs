//! Three-layer super-resolution network operating on bicubic-upscaled bands.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::upscale_bicubic;
use crate::metrics::downsample_block_mean;
use crate::nnet::{
    conv_backward_pads, conv_forward_pads, mse_loss, pack_params, serialize, unpack_params,
    Activation, ConvLayer, Padding, Pads, ParamVector, Parameterized, Tensor3,
};
use crate::optim::{scg_minimize, sgd_train, ScgSettings, SgdConfig};
use crate::raster::BandRaster;
use crate::rng;

pub const MODEL_KIND: &str = "srcnn";

/// Output tile edge used by whole-raster inference.
const TILE: usize = 64;

/// Layer shapes and nonlinearities of an [`SrcnnModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrcnnGeometry {
    pub kernel_sizes: [usize; 3],
    /// Output channels of the first two layers.
    pub features: [usize; 2],
    pub activations: [Activation; 3],
    pub padding: Padding,
}

impl Default for SrcnnGeometry {
    fn default() -> Self {
        Self {
            kernel_sizes: [9, 3, 1],
            features: [64, 32],
            activations: [Activation::Relu, Activation::Relu, Activation::Linear],
            padding: Padding::SameReplicate,
        }
    }
}

impl SrcnnGeometry {
    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.kernel_sizes.iter().find(|&&k| k % 2 == 0) {
            return Err(Error::InvalidModel(format!("kernel size {k} is not odd")));
        }
        if self.features.contains(&0) {
            return Err(Error::InvalidModel("feature count must be positive".into()));
        }
        Ok(())
    }

    fn channels(&self) -> [(usize, usize); 3] {
        [
            (1, self.features[0]),
            (self.features[0], self.features[1]),
            (self.features[1], 1),
        ]
    }

    /// Total context radius of the three layers.
    pub fn radius(&self) -> usize {
        self.kernel_sizes.iter().map(|k| (k - 1) / 2).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrcnnModel {
    geometry: SrcnnGeometry,
    layers: Vec<ConvLayer>,
}

impl SrcnnModel {
    /// Checks that `layers` match `geometry` and chain `1 -> f1 -> f2 -> 1`.
    pub fn new(geometry: SrcnnGeometry, layers: Vec<ConvLayer>) -> Result<Self> {
        geometry.validate()?;
        if layers.len() != 3 {
            return Err(Error::InvalidModel(format!(
                "expected 3 layers, got {}",
                layers.len()
            )));
        }
        for (i, (layer, (cin, cout))) in layers.iter().zip(geometry.channels()).enumerate() {
            if layer.in_channels() != cin
                || layer.out_channels() != cout
                || layer.kernel_size() != geometry.kernel_sizes[i]
            {
                return Err(Error::InvalidModel(format!(
                    "layer {} is {}->{} with k={}, geometry needs {cin}->{cout} with k={}",
                    i + 1,
                    layer.in_channels(),
                    layer.out_channels(),
                    layer.kernel_size(),
                    geometry.kernel_sizes[i]
                )));
            }
        }
        Ok(Self { geometry, layers })
    }

    pub fn random(geometry: SrcnnGeometry, seed: u64) -> Result<Self> {
        geometry.validate()?;
        let mut r = rng::seeded(seed);
        let layers = geometry
            .channels()
            .iter()
            .zip(geometry.kernel_sizes)
            .map(|(&(cin, cout), k)| ConvLayer::random(cin, cout, k, &mut r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(geometry, layers)
    }

    pub fn geometry(&self) -> &SrcnnGeometry {
        &self.geometry
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    pub fn params(&self) -> ParamVector {
        pack_params(&self.layers)
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        Ok(Self {
            geometry: self.geometry,
            layers: unpack_params(&self.layers, params)?,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Parameterized::param_count).sum()
    }

    pub fn to_json(&self) -> String {
        serialize::to_json(MODEL_KIND, &self.geometry, &self.params())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let (geometry, params): (SrcnnGeometry, _) = serialize::from_json(MODEL_KIND, text)?;
        Self::random(geometry, 0)?.with_params(&params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        serialize::save(path, MODEL_KIND, &self.geometry, &self.params())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (geometry, params): (SrcnnGeometry, _) = serialize::load(path, MODEL_KIND)?;
        Self::random(geometry, 0)?.with_params(&params)
    }

    fn layer_pads(&self, layer: usize) -> Pads {
        match self.geometry.padding {
            Padding::SameReplicate => Pads::uniform(self.layers[layer].radius()),
            Padding::Valid => Pads::default(),
        }
    }

    fn activate(&self, layer: usize, mut t: Tensor3) -> Tensor3 {
        let act = self.geometry.activations[layer];
        if act != Activation::Linear {
            t.values_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        }
        t
    }

    /// Forward pass on a single-channel tensor; returns the activated output
    /// of every layer. No clamping is applied.
    pub fn forward_tensor(&self, input: &Tensor3) -> Result<Vec<Tensor3>> {
        if input.channels() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "network input has {} channels, expected 1",
                input.channels()
            )));
        }
        let mut outputs: Vec<Tensor3> = Vec::with_capacity(3);
        for i in 0..3 {
            let x = if i == 0 { input } else { &outputs[i - 1] };
            let z = conv_forward_pads(x, &self.layers[i], self.layer_pads(i))?;
            outputs.push(self.activate(i, z));
        }
        Ok(outputs)
    }

    /// Mean squared error of the unclamped prediction against `target`
    /// (center-cropped under valid padding) and its gradient in
    /// [`ParamVector`] layout.
    pub fn loss_and_gradient(&self, input: &Tensor3, target: &Tensor3) -> Result<(f64, Vec<f64>)> {
        let outputs = self.forward_tensor(input)?;
        let (_, oh, ow) = outputs[2].shape();
        let target = if target.height() == oh && target.width() == ow {
            std::borrow::Cow::Borrowed(target)
        } else {
            let (dy, dx) = (
                target.height().checked_sub(oh).unwrap_or(1),
                target.width().checked_sub(ow).unwrap_or(1),
            );
            if dy % 2 != 0 || dx % 2 != 0 {
                return Err(Error::DimensionMismatch(format!(
                    "target is {}x{}, network output is {ow}x{oh}",
                    target.width(),
                    target.height()
                )));
            }
            std::borrow::Cow::Owned(target.crop(dy / 2, dx / 2, oh, ow))
        };
        let (loss, mut upstream) = mse_loss(&outputs[2], &target)?;

        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(3);
        for i in (0..3).rev() {
            let act = self.geometry.activations[i];
            if act != Activation::Linear {
                for (g, &y) in upstream.values_mut().iter_mut().zip(outputs[i].values()) {
                    *g *= act.derivative_from_output(y);
                }
            }
            let x = if i == 0 { input } else { &outputs[i - 1] };
            let (dx, dw, db) =
                conv_backward_pads(x, &self.layers[i], &upstream, self.layer_pads(i), i > 0)?;
            grads.push((dw, db));
            if let Some(dx) = dx {
                upstream = dx;
            }
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (dw, db) in grads.into_iter().rev() {
            flat.extend(dw);
            flat.extend(db);
        }
        Ok((loss, flat))
    }
}

/// Applies the network to an already-upscaled band. Output is clamped to
/// `[0, 1]`; under valid padding it is smaller by the receptive radius on
/// each side.
///
/// The raster is processed in tiles with enough context that the result
/// equals a whole-image pass.
pub fn srcnn_forward(model: &SrcnnModel, upscaled_input: &BandRaster) -> Result<BandRaster> {
    let (w, h) = (upscaled_input.width(), upscaled_input.height());
    let halo = model.geometry.radius();
    let replicate = model.geometry.padding == Padding::SameReplicate;
    let (ow, oh) = if replicate {
        (w, h)
    } else if w > 2 * halo && h > 2 * halo {
        (w - 2 * halo, h - 2 * halo)
    } else {
        return Err(Error::TooSmall(format!(
            "{w}x{h} input is smaller than the {0}x{0} receptive field",
            2 * halo + 1
        )));
    };
    let input = Tensor3::from_raster(upscaled_input);
    let mut out = vec![0.0; ow * oh];
    for ty in (0..oh).step_by(TILE) {
        let th = TILE.min(oh - ty);
        for tx in (0..ow).step_by(TILE) {
            let tw = TILE.min(ow - tx);
            let tile = if replicate {
                forward_tile_replicate(model, &input, ty, tx, th, tw)?
            } else {
                let window = input.crop(ty, tx, th + 2 * halo, tw + 2 * halo);
                model.forward_tensor(&window)?.pop().expect("three layers")
            };
            for (y, row) in tile.values().chunks_exact(tw).enumerate() {
                out[(ty + y) * ow + tx..(ty + y) * ow + tx + tw].copy_from_slice(row);
            }
        }
    }
    BandRaster::from_clamped(upscaled_input.band_id(), ow, oh, out)
}

/// Computes output rows `ty..ty+th`, columns `tx..tx+tw` of a same-size pass.
/// Each layer replicates only across sides lying on the image border and
/// consumes real context elsewhere.
fn forward_tile_replicate(
    model: &SrcnnModel,
    input: &Tensor3,
    ty: usize,
    tx: usize,
    th: usize,
    tw: usize,
) -> Result<Tensor3> {
    let (h, w) = (input.height(), input.width());
    let halo = model.geometry.radius();
    // Current window in image coordinates, half-open.
    let (mut y0, mut y1) = (ty.saturating_sub(halo), (ty + th + halo).min(h));
    let (mut x0, mut x1) = (tx.saturating_sub(halo), (tx + tw + halo).min(w));
    let mut cur = input.crop(y0, x0, y1 - y0, x1 - x0);
    for (i, layer) in model.layers.iter().enumerate() {
        let r = layer.radius();
        let pads = Pads {
            top: if y0 == 0 { r } else { 0 },
            bottom: if y1 == h { r } else { 0 },
            left: if x0 == 0 { r } else { 0 },
            right: if x1 == w { r } else { 0 },
        };
        cur = model.activate(i, conv_forward_pads(&cur, layer, pads)?);
        if y0 != 0 {
            y0 += r;
        }
        if y1 != h {
            y1 -= r;
        }
        if x0 != 0 {
            x0 += r;
        }
        if x1 != w {
            x1 -= r;
        }
    }
    Ok(cur.crop(ty - y0, tx - x0, th, tw))
}

/// Bicubic enlargement by `factor` followed by the network, keeping the
/// exact `factor x` size. Under valid padding the refined interior is pasted
/// into the bicubic image.
pub fn upscale_srcnn(model: &SrcnnModel, raster: &BandRaster, factor: usize) -> Result<BandRaster> {
    let bicubic = upscale_bicubic(raster, factor)?;
    let refined = srcnn_forward(model, &bicubic)?;
    if model.geometry.padding == Padding::SameReplicate {
        return Ok(refined);
    }
    let r = model.geometry.radius();
    let (w, rw) = (bicubic.width(), refined.width());
    let mut samples = bicubic.into_samples();
    for (y, row) in refined.samples().chunks_exact(rw).enumerate() {
        samples[(y + r) * w + r..(y + r) * w + r + rw].copy_from_slice(row);
    }
    BandRaster::from_clamped(raster.band_id(), w, samples.len() / w, samples)
}

/// Co-located `(degraded, target)` training patches.
#[derive(Debug, Clone, PartialEq)]
pub struct SrPairSet {
    pairs: Vec<(Tensor3, Tensor3)>,
    patch_size: usize,
}

impl SrPairSet {
    pub fn new(pairs: Vec<(Tensor3, Tensor3)>, patch_size: usize) -> Result<Self> {
        for (d, t) in &pairs {
            if d.shape() != (1, patch_size, patch_size) || t.shape() != (1, patch_size, patch_size)
            {
                return Err(Error::DimensionMismatch(format!(
                    "pair shapes {:?}/{:?} differ from 1x{patch_size}x{patch_size}",
                    d.shape(),
                    t.shape()
                )));
            }
            if d.values()
                .iter()
                .chain(t.values())
                .any(|v| !(0.0..=1.0).contains(v))
            {
                return Err(Error::InvalidArgument(
                    "pair values must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(Self { pairs, patch_size })
    }

    pub fn pairs(&self) -> &[(Tensor3, Tensor3)] {
        &self.pairs
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Joins sets of equal patch size, shuffling the union with `seed`.
    pub fn merge(sets: Vec<SrPairSet>, seed: u64) -> Result<Self> {
        let patch_size = sets.first().map_or(0, |s| s.patch_size);
        if sets.iter().any(|s| s.patch_size != patch_size) {
            return Err(Error::DimensionMismatch(
                "pair sets have different patch sizes".into(),
            ));
        }
        let mut pairs: Vec<_> = sets.into_iter().flat_map(|s| s.pairs).collect();
        pairs.shuffle(&mut rng::seeded(seed));
        Ok(Self { pairs, patch_size })
    }
}

/// The low-resolution stand-in for `raster`: block-mean downsample by
/// `factor`, then bicubic upscale back. Trailing rows/columns that do not
/// fill a block are dropped from both outputs.
pub fn degrade(raster: &BandRaster, factor: usize) -> Result<(BandRaster, BandRaster)> {
    let low = downsample_block_mean(raster, factor)?;
    let degraded = upscale_bicubic(&low, factor)?;
    let target = raster.crop(0, 0, degraded.width(), degraded.height())?;
    Ok((degraded, target))
}

/// Patches of the degraded band and the original on a `stride` grid, in an
/// order shuffled by `seed`.
pub fn make_training_pairs(
    raster: &BandRaster,
    factor: usize,
    patch_size: usize,
    stride: usize,
    seed: u64,
) -> Result<SrPairSet> {
    if patch_size == 0 || stride == 0 {
        return Err(Error::InvalidArgument(
            "patch size and stride must be positive".into(),
        ));
    }
    let usable = |n: usize| n.checked_div(factor).map_or(0, |q| q * factor);
    if usable(raster.width()) < patch_size || usable(raster.height()) < patch_size {
        return Err(Error::TooSmall(format!(
            "{}x{} raster yields no {patch_size}x{patch_size} patch at factor {factor}",
            raster.width(),
            raster.height()
        )));
    }
    let (degraded, target) = degrade(raster, factor)?;
    let (d, t) = (
        Tensor3::from_raster(&degraded),
        Tensor3::from_raster(&target),
    );
    let mut pairs = Vec::new();
    for y in (0..=d.height() - patch_size).step_by(stride) {
        for x in (0..=d.width() - patch_size).step_by(stride) {
            pairs.push((
                d.crop(y, x, patch_size, patch_size),
                t.crop(y, x, patch_size, patch_size),
            ));
        }
    }
    pairs.shuffle(&mut rng::seeded(seed));
    SrPairSet::new(pairs, patch_size)
}

/// Mean loss and gradient over the pairs at `indices`, summed in index order.
pub fn batch_loss_and_gradient(
    model: &SrcnnModel,
    pairs: &SrPairSet,
    indices: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.param_count()];
    for &i in indices {
        let (d, t) = &pairs.pairs[i];
        let (l, g) = model.loss_and_gradient(d, t)?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let n = indices.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Trains a freshly initialized model by minibatch SGD on the mean
/// per-pixel squared error. Returns the model and the per-epoch loss trace.
pub fn train_srcnn(
    pairs: &SrPairSet,
    geometry: &SrcnnGeometry,
    config: &SgdConfig,
    init_seed: u64,
) -> Result<(SrcnnModel, Vec<f64>)> {
    let init = SrcnnModel::random(*geometry, init_seed)?;
    continue_training(&init, pairs, config)
}

/// Runs SGD starting from `model`'s current parameters.
pub fn continue_training(
    model: &SrcnnModel,
    pairs: &SrPairSet,
    config: &SgdConfig,
) -> Result<(SrcnnModel, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    let mut scratch = model.clone();
    let outcome = sgd_train(
        |params, indices| {
            for (layer, chunk) in scratch.layers.iter_mut().zip(split_params(model, params)) {
                layer.read_params(chunk);
            }
            batch_loss_and_gradient(&scratch, pairs, indices)
        },
        model.params(),
        config,
        pairs.len(),
    )?;
    Ok((model.with_params(&outcome.params)?, outcome.epoch_losses))
}

/// Full-batch alternative to [`train_srcnn`] using scaled conjugate
/// gradient. Returns the model and the per-iteration loss trace.
pub fn train_srcnn_scg(
    pairs: &SrPairSet,
    geometry: &SrcnnGeometry,
    settings: &ScgSettings,
    init_seed: u64,
) -> Result<(SrcnnModel, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    let init = SrcnnModel::random(*geometry, init_seed)?;
    let all: Vec<usize> = (0..pairs.len()).collect();
    let mut scratch = init.clone();
    let outcome = scg_minimize(
        |params| {
            for (layer, chunk) in scratch.layers.iter_mut().zip(split_params(&init, params)) {
                layer.read_params(chunk);
            }
            batch_loss_and_gradient(&scratch, pairs, &all)
        },
        init.params(),
        settings,
    )?;
    Ok((init.with_params(&outcome.params)?, outcome.trace))
}

fn split_params<'a>(model: &SrcnnModel, params: &'a [f64]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(3);
    let mut rest = params;
    for layer in &model.layers {
        let (head, tail) = rest.split_at(layer.param_count());
        out.push(head);
        rest = tail;
    }
    out
}
