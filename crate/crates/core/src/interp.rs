//! Classical upscaling kernels.
//!
//! Whole-raster upscaling maps output pixel `k` to source coordinate
//! `(k + 0.5) / factor - 0.5` on both axes, reads out-of-range taps from the
//! nearest edge sample, and clamps to `[0, 1]` only when the output raster is
//! assembled. The `*_values` functions expose the unclamped results.

use crate::error::{Error, Result};
use crate::raster::BandRaster;

/// Keys cubic-convolution parameter.
pub const KEYS_A: f64 = -0.5;

/// Corner samples of a unit square, each listed over the corners
/// `(0,0), (1,0), (0,1), (1,1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerData {
    pub f: [f64; 4],
    pub fx: [f64; 4],
    pub fy: [f64; 4],
    pub fxy: [f64; 4],
}

/// Coefficients of `p(x, y) = sum a[i][j] x^i y^j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicubicPatchCoeffs {
    pub a: [[f64; 4]; 4],
}

// Hermite basis change: maps (value at 0, value at 1, slope at 0, slope at 1)
// to monomial coefficients of a cubic.
const HERMITE: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [-3.0, 3.0, -2.0, -1.0],
    [2.0, -2.0, 1.0, 1.0],
];

/// Solves for the 16 coefficients that match value, both first partials and
/// the cross partial at all four corners.
pub fn solve_bicubic_patch(corners: &CornerData) -> Result<BicubicPatchCoeffs> {
    let all = corners
        .f
        .iter()
        .chain(&corners.fx)
        .chain(&corners.fy)
        .chain(&corners.fxy);
    if let Some(bad) = all.into_iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("corner datum {bad}")));
    }
    // corner index for (x, y) in {0,1}^2
    let c = |x: usize, y: usize| x + 2 * y;
    // rows follow x-side quantities (f, fx), columns y-side (f, fy)
    let mut g = [[0.0; 4]; 4];
    for x in 0..2 {
        for y in 0..2 {
            g[x][y] = corners.f[c(x, y)];
            g[x][y + 2] = corners.fy[c(x, y)];
            g[x + 2][y] = corners.fx[c(x, y)];
            g[x + 2][y + 2] = corners.fxy[c(x, y)];
        }
    }
    // a = H g H^T
    let mut hg = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            hg[i][j] = (0..4).map(|k| HERMITE[i][k] * g[k][j]).sum();
        }
    }
    let mut a = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = (0..4).map(|k| hg[i][k] * HERMITE[j][k]).sum();
        }
    }
    Ok(BicubicPatchCoeffs { a })
}

pub fn eval_bicubic_patch(coeffs: &BicubicPatchCoeffs, x: f64, y: f64) -> f64 {
    coeffs.eval_with(x, y, 0, 0)
}

impl BicubicPatchCoeffs {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_with(x, y, 0, 0)
    }

    pub fn eval_dx(&self, x: f64, y: f64) -> f64 {
        self.eval_with(x, y, 1, 0)
    }

    pub fn eval_dy(&self, x: f64, y: f64) -> f64 {
        self.eval_with(x, y, 0, 1)
    }

    pub fn eval_dxy(&self, x: f64, y: f64) -> f64 {
        self.eval_with(x, y, 1, 1)
    }

    /// Evaluates the `(dx, dy)`-th mixed partial derivative (orders 0 or 1).
    fn eval_with(&self, x: f64, y: f64, dx: u32, dy: u32) -> f64 {
        let term = |t: f64, p: u32, d: u32| -> f64 {
            match (d, p) {
                (0, _) => t.powi(p as i32),
                (_, 0) => 0.0,
                _ => f64::from(p) * t.powi(p as i32 - 1),
            }
        };
        let mut sum = 0.0;
        for i in 0..4u32 {
            for j in 0..4u32 {
                sum += self.a[i as usize][j as usize] * term(x, i, dx) * term(y, j, dy);
            }
        }
        sum
    }
}

/// Keys cubic-convolution kernel with parameter `a`.
pub fn keys_kernel(x: f64, a: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Kernel weights for taps at offsets -1, 0, 1, 2 from `floor(s)`, where
/// `t = s - floor(s)`.
pub fn keys_weights(t: f64) -> [f64; 4] {
    [
        keys_kernel(t + 1.0, KEYS_A),
        keys_kernel(t, KEYS_A),
        keys_kernel(1.0 - t, KEYS_A),
        keys_kernel(2.0 - t, KEYS_A),
    ]
}

/// Weights for taps at offsets 0, 1 from `floor(s)`.
pub fn bilinear_weights(t: f64) -> [f64; 2] {
    [1.0 - t, t]
}

/// Source coordinate of output index `k` under half-pixel-centered mapping.
#[inline]
pub fn source_coord(k: usize, factor: usize) -> f64 {
    (k as f64 + 0.5) / factor as f64 - 0.5
}

struct Taps<const N: usize> {
    index: Vec<[usize; N]>,
    weight: Vec<[f64; N]>,
}

fn axis_taps<const N: usize>(
    src_len: usize,
    factor: usize,
    first_offset: isize,
    weights: impl Fn(f64) -> [f64; N],
) -> Taps<N> {
    let out_len = src_len * factor;
    let mut index = Vec::with_capacity(out_len);
    let mut weight = Vec::with_capacity(out_len);
    let last = src_len as isize - 1;
    for k in 0..out_len {
        let s = source_coord(k, factor);
        let base = s.floor();
        let t = s - base;
        let base = base as isize + first_offset;
        index.push(std::array::from_fn(|i| {
            (base + i as isize).clamp(0, last) as usize
        }));
        weight.push(weights(t));
    }
    Taps { index, weight }
}

fn separable<const N: usize>(
    raster: &BandRaster,
    factor: usize,
    first_offset: isize,
    weights: impl Fn(f64) -> [f64; N] + Copy,
) -> Result<Vec<f64>> {
    if factor < 1 {
        return Err(Error::InvalidArgument(format!(
            "upscale factor {factor} < 1"
        )));
    }
    let (w, h) = (raster.width(), raster.height());
    let (ow, oh) = (w * factor, h * factor);
    let tx = axis_taps(w, factor, first_offset, weights);
    let ty = axis_taps(h, factor, first_offset, weights);
    let src = raster.samples();

    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut horiz[y * ow..(y + 1) * ow];
        for (x, o) in out.iter_mut().enumerate() {
            let (idx, wt) = (&tx.index[x], &tx.weight[x]);
            let mut acc = 0.0;
            for i in 0..N {
                acc += wt[i] * row[idx[i]];
            }
            *o = acc;
        }
    }

    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        let (idx, wt) = (&ty.index[y], &ty.weight[y]);
        let dst = &mut out[y * ow..(y + 1) * ow];
        for i in 0..N {
            let src_row = &horiz[idx[i] * ow..(idx[i] + 1) * ow];
            let wi = wt[i];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += wi * s;
            }
        }
    }
    Ok(out)
}

/// Unclamped bilinear upscale, row-major `(w*factor) x (h*factor)`.
pub fn bilinear_values(raster: &BandRaster, factor: usize) -> Result<Vec<f64>> {
    separable(raster, factor, 0, bilinear_weights)
}

/// Unclamped Keys cubic-convolution upscale, row-major `(w*factor) x (h*factor)`.
pub fn bicubic_values(raster: &BandRaster, factor: usize) -> Result<Vec<f64>> {
    separable(raster, factor, -1, keys_weights)
}

pub fn upscale_bilinear(raster: &BandRaster, factor: usize) -> Result<BandRaster> {
    let values = bilinear_values(raster, factor)?;
    BandRaster::from_clamped(
        raster.band_id(),
        raster.width() * factor,
        raster.height() * factor,
        values,
    )
}

pub fn upscale_bicubic(raster: &BandRaster, factor: usize) -> Result<BandRaster> {
    let values = bicubic_values(raster, factor)?;
    BandRaster::from_clamped(
        raster.band_id(),
        raster.width() * factor,
        raster.height() * factor,
        values,
    )
}
