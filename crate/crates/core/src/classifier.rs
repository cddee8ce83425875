//! Feed-forward land-cover classifier over pooled block features, trained
//! by scaled conjugate gradient on mean softmax cross-entropy.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::{
    dense_backward_batch, dense_forward_batch, pack_params, serialize, softmax, unpack_params,
    Activation, DenseLayer, ParamVector, Parameterized,
};
use crate::optim::{scg_minimize, ScgOutcome, ScgSettings};
use crate::raster::{
    pooled_block_rows, ClassMap, FeatureMode, FeatureSet, MultispectralScene, DEFAULT_PALETTE,
};
use crate::rng;

pub const MODEL_KIND: &str = "mlp";

/// Block rows classified per batch by [`classify_scene`].
const SCENE_CHUNK_ROWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MlpGeometry {
    dims: Vec<usize>,
    hidden_activation: Activation,
    class_names: Vec<String>,
}

/// Dense layers with a shared hidden activation and a linear logit layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
    hidden_activation: Activation,
    class_names: Vec<String>,
}

impl MlpModel {
    pub fn new(
        layers: Vec<DenseLayer>,
        hidden_activation: Activation,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::InvalidModel(
                "classifier needs at least one layer".into(),
            ));
        };
        if last.out_dim() != class_names.len() {
            return Err(Error::InvalidModel(format!(
                "final layer has {} outputs for {} classes",
                last.out_dim(),
                class_names.len()
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::InvalidModel(format!(
                    "layer {} outputs {} values, layer {} expects {}",
                    i + 1,
                    pair[0].out_dim(),
                    i + 2,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self {
            layers,
            hidden_activation,
            class_names,
        })
    }

    /// Gaussian-initialized model `input_dim -> hidden_dims... -> classes`.
    pub fn random(
        input_dim: usize,
        hidden_dims: &[usize],
        hidden_activation: Activation,
        class_names: Vec<String>,
        seed: u64,
    ) -> Result<Self> {
        let mut r = rng::seeded(seed);
        let dims: Vec<usize> = std::iter::once(input_dim)
            .chain(hidden_dims.iter().copied())
            .chain(std::iter::once(class_names.len()))
            .collect();
        if dims.contains(&0) {
            return Err(Error::InvalidModel(format!("zero-width layer in {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|d| DenseLayer::random(d[0], d[1], &mut r))
            .collect();
        Self::new(layers, hidden_activation, class_names)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn params(&self) -> ParamVector {
        pack_params(&self.layers)
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        Ok(Self {
            layers: unpack_params(&self.layers, params)?,
            hidden_activation: self.hidden_activation,
            class_names: self.class_names.clone(),
        })
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            Activation::Linear
        } else {
            self.hidden_activation
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "features have dimension {dim}, classifier expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Activated outputs of every layer for `n` row-major inputs.
    fn forward_all(&self, inputs: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
        let mut outs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let x = if i == 0 { inputs } else { &outs[i - 1] };
            let y = dense_forward_batch(x, n, layer, self.activation(i))?;
            outs.push(y);
        }
        Ok(outs)
    }

    /// `n x classes` logits for `n` row-major feature vectors.
    pub fn logits(&self, inputs: &[f64], n: usize) -> Result<Vec<f64>> {
        Ok(self
            .forward_all(inputs, n)?
            .pop()
            .expect("at least one layer"))
    }

    /// Mean softmax cross-entropy over a labeled set and its gradient in
    /// [`ParamVector`] layout.
    pub fn loss_and_gradient(&self, data: &FeatureSet) -> Result<(f64, Vec<f64>)> {
        self.check_dim(data.dim())?;
        let labels = data
            .labels()
            .ok_or_else(|| Error::InvalidArgument("training features carry no labels".into()))?;
        let n = data.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        let c = self.num_classes();
        let outs = self.forward_all(data.values(), n)?;
        let logits = outs.last().expect("at least one layer");
        let mut loss = 0.0;
        let mut upstream = vec![0.0; n * c];
        for (i, (&label, row)) in labels.iter().zip(logits.chunks_exact(c)).enumerate() {
            // Inline log-sum-exp: the per-sample loss and softmax share the work.
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
            loss += max + sum.ln() - row[label];
            let g = &mut upstream[i * c..(i + 1) * c];
            for (gk, z) in g.iter_mut().zip(row) {
                *gk = (z - max).exp() / sum / n as f64;
            }
            g[label] -= 1.0 / n as f64;
        }
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let x = if i == 0 { data.values() } else { &outs[i - 1] };
            let g = dense_backward_batch(
                x,
                n,
                &self.layers[i],
                self.activation(i),
                &outs[i],
                &upstream,
                i > 0,
            )?;
            grads.push((g.weights, g.biases));
            upstream = g.input;
        }
        let mut flat = Vec::with_capacity(self.layers.iter().map(Parameterized::param_count).sum());
        for (w, b) in grads.into_iter().rev() {
            flat.extend(w);
            flat.extend(b);
        }
        Ok((loss / n as f64, flat))
    }

    fn geometry(&self) -> MlpGeometry {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(DenseLayer::out_dim));
        MlpGeometry {
            dims,
            hidden_activation: self.hidden_activation,
            class_names: self.class_names.clone(),
        }
    }

    fn from_parts(geometry: MlpGeometry, params: &[f64]) -> Result<Self> {
        let n = geometry.dims.len();
        if n < 2 {
            return Err(Error::InvalidModel(
                "classifier geometry lists fewer than two widths".into(),
            ));
        }
        let hidden = &geometry.dims[1..n - 1];
        let template = Self::random(
            geometry.dims[0],
            hidden,
            geometry.hidden_activation,
            geometry.class_names,
            0,
        )?;
        if template.num_classes() != geometry.dims[n - 1] {
            return Err(Error::InvalidModel(
                "output width differs from class count".into(),
            ));
        }
        template.with_params(params)
    }

    pub fn to_json(&self) -> String {
        serialize::to_json(MODEL_KIND, &self.geometry(), &self.params())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let (geometry, params) = serialize::from_json(MODEL_KIND, text)?;
        Self::from_parts(geometry, &params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        serialize::save(path, MODEL_KIND, &self.geometry(), &self.params())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (geometry, params) = serialize::load(path, MODEL_KIND)?;
        Self::from_parts(geometry, &params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub hidden_dims: Vec<usize>,
    pub hidden_activation: Activation,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        let scg = ScgSettings::default();
        Self {
            hidden_dims: vec![24],
            hidden_activation: Activation::Sigmoid,
            max_iter: scg.max_iter,
            grad_tol: scg.grad_tol,
            seed: 0,
        }
    }
}

impl ClassifierSettings {
    pub fn scg(&self) -> ScgSettings {
        ScgSettings {
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            ..ScgSettings::default()
        }
    }
}

/// Trains a fresh model on every labeled sample at once. Every class named
/// by `data` must occur at least once.
pub fn train_classifier(
    data: &FeatureSet,
    settings: &ClassifierSettings,
) -> Result<(MlpModel, ScgOutcome)> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::InvalidArgument("training features carry no labels".into()))?;
    for (c, name) in data.class_names().iter().enumerate() {
        if !labels.contains(&c) {
            return Err(Error::InvalidArgument(format!(
                "class {name:?} has no training samples"
            )));
        }
    }
    let init = MlpModel::random(
        data.dim(),
        &settings.hidden_dims,
        settings.hidden_activation,
        data.class_names().to_vec(),
        settings.seed,
    )?;
    let mut scratch = init.clone();
    let outcome = scg_minimize(
        |params| {
            let mut offset = 0;
            for layer in &mut scratch.layers {
                let n = layer.param_count();
                layer.read_params(&params[offset..offset + n]);
                offset += n;
            }
            scratch.loss_and_gradient(data)
        },
        init.params(),
        &settings.scg(),
    )?;
    Ok((init.with_params(&outcome.params)?, outcome))
}

/// Arg-max class of each row of `n x classes` logits; ties go to the lowest
/// class index.
fn argmax_rows(logits: &[f64], classes: usize) -> Vec<usize> {
    logits
        .chunks_exact(classes)
        .map(|row| {
            let mut best = 0;
            for (k, &z) in row.iter().enumerate().skip(1) {
                if z > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub fn classify_features(model: &MlpModel, features: &FeatureSet) -> Result<Vec<usize>> {
    model.check_dim(features.dim())?;
    if features.is_empty() {
        return Ok(Vec::new());
    }
    Ok(argmax_rows(
        &model.logits(features.values(), features.len())?,
        model.num_classes(),
    ))
}

/// Class probabilities per feature vector.
pub fn predict_proba(model: &MlpModel, features: &FeatureSet) -> Result<Vec<Vec<f64>>> {
    model.check_dim(features.dim())?;
    let logits = model.logits(features.values(), features.len())?;
    Ok(logits
        .chunks_exact(model.num_classes())
        .map(softmax)
        .collect())
}

/// One label per 2x2 block of `scene`, computed in bounded-memory chunks.
pub fn classify_scene(model: &MlpModel, scene: &MultispectralScene) -> Result<ClassMap> {
    let (bw, bh) = (scene.width() / 2, scene.height() / 2);
    if bw == 0 || bh == 0 {
        return Err(Error::TooSmall(format!(
            "{}x{} scene has no 2x2 block",
            scene.width(),
            scene.height()
        )));
    }
    let dim = FeatureMode::Pooled2x2.dim(scene.band_count());
    if dim != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "scene has {} bands ({dim} features), classifier expects {} features",
            scene.band_count(),
            model.input_dim()
        )));
    }
    let mut labels = Vec::with_capacity(bw * bh);
    let mut buf = Vec::with_capacity(SCENE_CHUNK_ROWS * bw * dim);
    for start in (0..bh).step_by(SCENE_CHUNK_ROWS) {
        let rows = start..(start + SCENE_CHUNK_ROWS).min(bh);
        let n = rows.len() * bw;
        buf.clear();
        pooled_block_rows(scene, rows, &mut buf);
        labels.extend(argmax_rows(&model.logits(&buf, n)?, model.num_classes()));
    }
    ClassMap::new(bw, bh, labels, palette_for(model.num_classes()))
}

/// Default gray levels, extended with evenly spaced values for extra classes.
fn palette_for(classes: usize) -> Vec<u8> {
    let mut palette: Vec<u8> = DEFAULT_PALETTE.iter().copied().take(classes).collect();
    let mut next = 32u8;
    while palette.len() < classes {
        if !palette.contains(&next) {
            palette.push(next);
        }
        next = next.wrapping_add(37);
    }
    palette
}

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.count(truth, p)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.classes).map(|c| self.count(c, c)).sum();
        correct as f64 / self.total() as f64
    }

    /// Fraction of class `c` samples predicted as `c`; `None` if absent.
    pub fn recall(&self, c: usize) -> Option<f64> {
        let n = self.row_total(c);
        (n > 0).then(|| self.count(c, c) as f64 / n as f64)
    }
}

/// Tallies predictions against truth over `classes` classes.
pub fn evaluate(predictions: &[usize], truth: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let mut counts = vec![0u64; classes * classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p >= classes || t >= classes {
            return Err(Error::InvalidArgument(format!(
                "label {} out of range for {classes} classes",
                p.max(t)
            )));
        }
        counts[t * classes + p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{default_class_names, extract_features, BandRaster};
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    fn clusters(per_class: usize, seed: u64) -> FeatureSet {
        let mut r = rng::seeded(seed);
        let normal = Normal::new(0.0, 0.05).unwrap();
        let centers: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..24).map(|_| r.random::<f64>()).collect())
            .collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                rows.push(
                    center
                        .iter()
                        .map(|m| m + normal.sample(&mut r))
                        .collect::<Vec<_>>(),
                );
                labels.push(c);
            }
        }
        FeatureSet::from_rows(&rows, Some(labels), default_class_names()).unwrap()
    }

    fn accuracy(model: &MlpModel, data: &FeatureSet) -> f64 {
        let pred = classify_features(model, data).unwrap();
        evaluate(&pred, data.labels().unwrap(), 3)
            .unwrap()
            .accuracy()
    }

    #[test]
    fn separable_clusters() {
        let data = clusters(100, 1);
        let (model, outcome) = train_classifier(&data, &ClassifierSettings::default()).unwrap();
        assert!(outcome.iterations <= 500);
        assert!(accuracy(&model, &data) >= 0.99);
        assert!(outcome.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn same_seed_same_parameters() {
        let data = clusters(20, 2);
        let s = ClassifierSettings {
            max_iter: 40,
            ..Default::default()
        };
        let (a, _) = train_classifier(&data, &s).unwrap();
        let (b, _) = train_classifier(&data, &s).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn missing_class_rejected() {
        let rows = vec![vec![0.0; 24], vec![1.0; 24]];
        let data = FeatureSet::from_rows(&rows, Some(vec![0, 1]), default_class_names()).unwrap();
        assert!(train_classifier(&data, &ClassifierSettings::default()).is_err());
    }

    #[test]
    fn single_sample_memorized() {
        let rows = vec![vec![0.3; 24]];
        let data = FeatureSet::from_rows(&rows, Some(vec![0]), vec!["only".to_string()]).unwrap();
        let (model, outcome) = train_classifier(&data, &ClassifierSettings::default()).unwrap();
        assert!(*outcome.trace.last().unwrap() <= 1e-3);
        assert_eq!(model.num_classes(), 1);
    }

    #[test]
    fn zero_head_predicts_class_zero() {
        let data = clusters(5, 3);
        let mut model =
            MlpModel::random(24, &[24], Activation::Sigmoid, default_class_names(), 4).unwrap();
        let last = model.layers_mut().last_mut().unwrap();
        last.weights_mut().fill(0.0);
        last.biases_mut().fill(0.0);
        assert!(classify_features(&model, &data)
            .unwrap()
            .iter()
            .all(|&c| c == 0));
    }

    #[test]
    fn argmax_invariant_under_shift_and_scale() {
        let data = clusters(10, 5);
        let model =
            MlpModel::random(24, &[24], Activation::Sigmoid, default_class_names(), 6).unwrap();
        let base = classify_features(&model, &data).unwrap();
        let mut shifted = model.clone();
        let last = shifted.layers_mut().last_mut().unwrap();
        last.biases_mut().iter_mut().for_each(|b| *b += 3.7);
        assert_eq!(classify_features(&shifted, &data).unwrap(), base);
        let mut scaled = model.clone();
        let last = scaled.layers_mut().last_mut().unwrap();
        last.weights_mut().iter_mut().for_each(|w| *w *= 2.5);
        last.biases_mut().iter_mut().for_each(|b| *b *= 2.5);
        assert_eq!(classify_features(&scaled, &data).unwrap(), base);
    }

    #[test]
    fn dimension_mismatch() {
        let model =
            MlpModel::random(8, &[4], Activation::Sigmoid, default_class_names(), 0).unwrap();
        assert!(classify_features(&model, &clusters(2, 0)).is_err());
        let scene =
            MultispectralScene::new(vec![BandRaster::constant("B1", 4, 4, 0.1).unwrap()]).unwrap();
        assert!(matches!(
            classify_scene(&model, &scene),
            Err(Error::DimensionMismatch(_))
        ));
    }

    fn random_scene(seed: u64, w: usize, h: usize) -> MultispectralScene {
        let mut r = rng::seeded(seed);
        let bands = (0..6)
            .map(|b| BandRaster::from_fn(format!("B{b}"), w, h, |_, _| r.random::<f64>()).unwrap())
            .collect();
        MultispectralScene::new(bands).unwrap()
    }

    #[test]
    fn scene_labels_match_feature_labels() {
        let model =
            MlpModel::random(24, &[24], Activation::Sigmoid, default_class_names(), 7).unwrap();
        for w in 2..=8 {
            for h in 2..=8 {
                let scene = random_scene((w * 10 + h) as u64, w, h);
                let map = classify_scene(&model, &scene).unwrap();
                assert_eq!((map.width(), map.height()), (w / 2, h / 2));
                let feats = extract_features(&scene, FeatureMode::Pooled2x2).unwrap();
                assert_eq!(
                    map.labels(),
                    classify_features(&model, &feats).unwrap().as_slice()
                );
            }
        }
        let map = classify_scene(&model, &random_scene(1, 2, 2)).unwrap();
        assert_eq!(map.labels().len(), 1);
    }

    #[test]
    fn chunked_scene_matches_whole() {
        let model =
            MlpModel::random(24, &[24], Activation::Sigmoid, default_class_names(), 8).unwrap();
        let scene = random_scene(9, 20, 2 * SCENE_CHUNK_ROWS + 6);
        let feats = extract_features(&scene, FeatureMode::Pooled2x2).unwrap();
        assert_eq!(
            classify_scene(&model, &scene).unwrap().labels(),
            classify_features(&model, &feats).unwrap().as_slice()
        );
    }

    #[test]
    fn evaluate_tallies() {
        let truth: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let m = evaluate(&truth, &truth, 3).unwrap();
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.count(1, 0), 0);
        let zeros = vec![0; 30];
        let m = evaluate(&zeros, &truth, 3).unwrap();
        assert!((m.accuracy() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall(0), Some(1.0));
        assert_eq!(m.recall(2), Some(0.0));
        assert!(evaluate(&zeros[..3], &truth, 3).is_err());

        let mut r = rng::seeded(10);
        let p: Vec<usize> = (0..200).map(|_| r.random_range(0..3)).collect();
        let t: Vec<usize> = (0..200).map(|_| r.random_range(0..3)).collect();
        let m = evaluate(&p, &t, 3).unwrap();
        for a in 0..3 {
            assert_eq!(m.row_total(a), t.iter().filter(|&&x| x == a).count() as u64);
            for b in 0..3 {
                let n = p
                    .iter()
                    .zip(&t)
                    .filter(|&(&pp, &tt)| tt == a && pp == b)
                    .count();
                assert_eq!(m.count(a, b), n as u64);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let model =
            MlpModel::random(24, &[24, 5], Activation::Sigmoid, default_class_names(), 11).unwrap();
        assert_eq!(MlpModel::from_json(&model.to_json()).unwrap(), model);
        assert!(crate::srcnn::SrcnnModel::from_json(&model.to_json()).is_err());
    }
}
