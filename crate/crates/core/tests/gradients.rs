//! Central finite-difference checks of every hand-derived gradient:
//! h = 1e-5, relative error at most 1e-5, at least 20 random instances each.

use landsr_core::classifier::MlpModel;
use landsr_core::nnet::{
    conv2d_backward, conv2d_forward, dense_backward, dense_backward_batch, dense_forward,
    dense_forward_batch, mse_loss, softmax_cross_entropy, Activation, ConvLayer, DenseLayer,
    Padding, Tensor3,
};
use landsr_core::raster::FeatureSet;
use landsr_core::rng::{gaussian_vec, seeded, Rng};
use landsr_core::srcnn::{SrcnnGeometry, SrcnnModel};
use rand::Rng as _;

const H: f64 = 1e-5;
const TOL: f64 = 1e-5;
const INSTANCES: u64 = 20;

/// Central differences of `f` at `x`.
fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + H;
            let up = f(&probe);
            probe[i] = orig - H;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

fn assert_close(what: &str, instance: u64, analytic: &[f64], numeric: &[f64]) {
    let err = relative_error(analytic, numeric);
    assert!(
        err <= TOL,
        "{what}, instance {instance}: relative error {err:.3e}"
    );
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_tensor(r: &mut Rng, c: usize, h: usize, w: usize) -> Tensor3 {
    Tensor3::new(c, h, w, gaussian_vec(r, c * h * w, 1.0)).unwrap()
}

fn random_conv(r: &mut Rng) -> ConvLayer {
    let cin = r.random_range(1..=3);
    let cout = r.random_range(1..=3);
    let k = [1, 3, 5][r.random_range(0..3)];
    let n = cout * cin * k * k;
    ConvLayer::new(
        cin,
        cout,
        k,
        gaussian_vec(r, n, 0.5),
        gaussian_vec(r, cout, 0.5),
    )
    .unwrap()
}

fn conv_with(layer: &ConvLayer, weights: &[f64], biases: &[f64]) -> ConvLayer {
    ConvLayer::new(
        layer.in_channels(),
        layer.out_channels(),
        layer.kernel_size(),
        weights.to_vec(),
        biases.to_vec(),
    )
    .unwrap()
}

fn check_conv(padding: Padding, seed: u64) {
    for i in 0..INSTANCES {
        let mut r = seeded(seed + i);
        let layer = random_conv(&mut r);
        let (h, w) = (r.random_range(5..=9), r.random_range(5..=9));
        let input = random_tensor(&mut r, layer.in_channels(), h, w);
        let out = conv2d_forward(&input, &layer, padding).unwrap();
        let (oc, oh, ow) = out.shape();
        let upstream = random_tensor(&mut r, oc, oh, ow);
        let grads = conv2d_backward(&input, &layer, &upstream, padding).unwrap();
        let objective = |input: &Tensor3, layer: &ConvLayer| {
            dot(
                conv2d_forward(input, layer, padding).unwrap().values(),
                upstream.values(),
            )
        };

        let (c, ih, iw) = input.shape();
        let n_in = numeric_gradient(input.values(), |x| {
            objective(&Tensor3::new(c, ih, iw, x.to_vec()).unwrap(), &layer)
        });
        assert_close("conv input", i, grads.input.values(), &n_in);
        let n_w = numeric_gradient(layer.weights(), |wv| {
            objective(&input, &conv_with(&layer, wv, layer.biases()))
        });
        assert_close("conv weights", i, &grads.weights, &n_w);
        let n_b = numeric_gradient(layer.biases(), |bv| {
            objective(&input, &conv_with(&layer, layer.weights(), bv))
        });
        assert_close("conv biases", i, &grads.biases, &n_b);
    }
}

#[test]
fn conv_same_replicate_gradients() {
    check_conv(Padding::SameReplicate, 1000);
}

#[test]
fn conv_valid_gradients() {
    check_conv(Padding::Valid, 2000);
}

fn random_dense(r: &mut Rng) -> DenseLayer {
    let (din, dout) = (r.random_range(1..=6), r.random_range(1..=5));
    DenseLayer::new(
        din,
        dout,
        gaussian_vec(r, din * dout, 0.7),
        gaussian_vec(r, dout, 0.5),
    )
    .unwrap()
}

fn dense_with(layer: &DenseLayer, weights: &[f64], biases: &[f64]) -> DenseLayer {
    DenseLayer::new(
        layer.in_dim(),
        layer.out_dim(),
        weights.to_vec(),
        biases.to_vec(),
    )
    .unwrap()
}

fn check_dense(activation: Activation, seed: u64) {
    for i in 0..INSTANCES {
        let mut r = seeded(seed + i);
        let layer = random_dense(&mut r);
        let input = gaussian_vec(&mut r, layer.in_dim(), 1.0);
        let output = dense_forward(&input, &layer, activation).unwrap();
        let upstream = gaussian_vec(&mut r, layer.out_dim(), 1.0);
        let grads = dense_backward(&input, &layer, activation, &output, &upstream).unwrap();
        let objective =
            |x: &[f64], l: &DenseLayer| dot(&dense_forward(x, l, activation).unwrap(), &upstream);

        let n_in = numeric_gradient(&input, |x| objective(x, &layer));
        assert_close("dense input", i, &grads.input, &n_in);
        let n_w = numeric_gradient(layer.weights(), |wv| {
            objective(&input, &dense_with(&layer, wv, layer.biases()))
        });
        assert_close("dense weights", i, &grads.weights, &n_w);
        let n_b = numeric_gradient(layer.biases(), |bv| {
            objective(&input, &dense_with(&layer, layer.weights(), bv))
        });
        assert_close("dense biases", i, &grads.biases, &n_b);
    }
}

#[test]
fn dense_sigmoid_gradients() {
    check_dense(Activation::Sigmoid, 3000);
}

#[test]
fn dense_relu_gradients() {
    check_dense(Activation::Relu, 4000);
}

#[test]
fn dense_linear_gradients() {
    check_dense(Activation::Linear, 5000);
}

#[test]
fn dense_batch_gradients() {
    for i in 0..INSTANCES {
        let mut r = seeded(6000 + i);
        let layer = random_dense(&mut r);
        let n = r.random_range(1..=5);
        let inputs = gaussian_vec(&mut r, n * layer.in_dim(), 1.0);
        let act = Activation::Sigmoid;
        let outputs = dense_forward_batch(&inputs, n, &layer, act).unwrap();
        let upstream = gaussian_vec(&mut r, n * layer.out_dim(), 1.0);
        let grads =
            dense_backward_batch(&inputs, n, &layer, act, &outputs, &upstream, true).unwrap();
        let objective =
            |x: &[f64], l: &DenseLayer| dot(&dense_forward_batch(x, n, l, act).unwrap(), &upstream);

        assert_close(
            "batch input",
            i,
            &grads.input,
            &numeric_gradient(&inputs, |x| objective(x, &layer)),
        );
        let n_w = numeric_gradient(layer.weights(), |wv| {
            objective(&inputs, &dense_with(&layer, wv, layer.biases()))
        });
        assert_close("batch weights", i, &grads.weights, &n_w);
        let n_b = numeric_gradient(layer.biases(), |bv| {
            objective(&inputs, &dense_with(&layer, layer.weights(), bv))
        });
        assert_close("batch biases", i, &grads.biases, &n_b);
    }
}

#[test]
fn softmax_cross_entropy_gradients() {
    for i in 0..INSTANCES {
        let mut r = seeded(7000 + i);
        let k = r.random_range(2..=6);
        let logits = gaussian_vec(&mut r, k, 2.0);
        let label = r.random_range(0..k);
        let (_, grad) = softmax_cross_entropy(&logits, label).unwrap();
        let numeric = numeric_gradient(&logits, |z| softmax_cross_entropy(z, label).unwrap().0);
        assert_close("softmax cross-entropy", i, &grad, &numeric);
    }
}

#[test]
fn mse_gradients() {
    for i in 0..INSTANCES {
        let mut r = seeded(8000 + i);
        let (c, h, w) = (
            r.random_range(1..=3),
            r.random_range(1..=6),
            r.random_range(1..=6),
        );
        let pred = random_tensor(&mut r, c, h, w);
        let target = random_tensor(&mut r, c, h, w);
        let (_, grad) = mse_loss(&pred, &target).unwrap();
        let numeric = numeric_gradient(pred.values(), |p| {
            mse_loss(&Tensor3::new(c, h, w, p.to_vec()).unwrap(), &target)
                .unwrap()
                .0
        });
        assert_close("mse", i, grad.values(), &numeric);
    }
}

fn check_srcnn(padding: Padding, seed: u64) {
    let geometry = SrcnnGeometry {
        kernel_sizes: [3, 3, 1],
        features: [4, 2],
        padding,
        ..SrcnnGeometry::default()
    };
    for i in 0..INSTANCES {
        let mut r = seeded(seed + i);
        let base = SrcnnModel::random(geometry, seed + i).unwrap();
        let params: Vec<f64> = gaussian_vec(&mut r, base.param_count(), 0.5);
        let model = base.with_params(&params).unwrap();
        let (h, w) = (r.random_range(6..=10), r.random_range(6..=10));
        let input = Tensor3::new(1, h, w, (0..h * w).map(|_| r.random::<f64>()).collect()).unwrap();
        let target =
            Tensor3::new(1, h, w, (0..h * w).map(|_| r.random::<f64>()).collect()).unwrap();
        let (_, grad) = model.loss_and_gradient(&input, &target).unwrap();
        let numeric = numeric_gradient(&params, |p| {
            base.with_params(p)
                .unwrap()
                .loss_and_gradient(&input, &target)
                .unwrap()
                .0
        });
        assert_close("srcnn", i, &grad, &numeric);
    }
}

#[test]
fn srcnn_composite_gradients_same_padding() {
    check_srcnn(Padding::SameReplicate, 9000);
}

#[test]
fn srcnn_composite_gradients_valid_padding() {
    check_srcnn(Padding::Valid, 10_000);
}

fn check_mlp(activation: Activation, seed: u64) {
    for i in 0..INSTANCES {
        let mut r = seeded(seed + i);
        let dim = r.random_range(2..=8);
        let hidden: Vec<usize> = (0..r.random_range(1..=2))
            .map(|_| r.random_range(2..=6))
            .collect();
        let classes = r.random_range(2..=4);
        let names: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
        let base = MlpModel::random(dim, &hidden, activation, names.clone(), seed + i).unwrap();
        let params = gaussian_vec(&mut r, base.params().len(), 0.7);
        let n = r.random_range(1..=6);
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..classes)).collect();
        let data =
            FeatureSet::new(dim, gaussian_vec(&mut r, n * dim, 1.0), Some(labels), names).unwrap();
        let (_, grad) = base
            .with_params(&params)
            .unwrap()
            .loss_and_gradient(&data)
            .unwrap();
        let numeric = numeric_gradient(&params, |p| {
            base.with_params(p)
                .unwrap()
                .loss_and_gradient(&data)
                .unwrap()
                .0
        });
        assert_close("mlp", i, &grad, &numeric);
    }
}

#[test]
fn mlp_composite_gradients_sigmoid() {
    check_mlp(Activation::Sigmoid, 11_000);
}

#[test]
fn mlp_composite_gradients_relu() {
    check_mlp(Activation::Relu, 12_000);
}
