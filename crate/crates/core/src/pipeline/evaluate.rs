//! Super-resolution quality against ground truth: degrade a high-resolution
//! scene by block means, enlarge it back and score a grid of crops.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::metrics::{downsample_block_mean, psnr};
use crate::raster::MultispectralScene;
use crate::upscale::{UpscaleMethod, Upscaler};

#[derive(Debug, Clone, PartialEq)]
pub struct CropScore {
    pub band_id: String,
    pub method: UpscaleMethod,
    /// Crop origin in the reconstructed image.
    pub x: usize,
    pub y: usize,
    pub psnr_db: f64,
}

/// Scores every method on `crop x crop` tiles laid edge to edge over the
/// reconstructed area (the scene cropped to a multiple of `factor`).
pub fn evaluate_sr(
    truth: &MultispectralScene,
    upscalers: &[&dyn Upscaler],
    factor: usize,
    crop: usize,
) -> Result<Vec<CropScore>> {
    if crop == 0 {
        return Err(Error::InvalidArgument("crop size must be positive".into()));
    }
    let (w, h) = (
        truth.width() / factor.max(1) * factor,
        truth.height() / factor.max(1) * factor,
    );
    if w < crop || h < crop {
        return Err(Error::TooSmall(format!(
            "{w}x{h} reconstruction cannot hold a {crop}x{crop} crop"
        )));
    }
    let mut scores = Vec::new();
    for upscaler in upscalers {
        for (i, band) in truth.bands().iter().enumerate() {
            let low = downsample_block_mean(band, factor)?;
            let rebuilt = upscaler.upscale(i, &low, factor)?;
            for y in (0..=h - crop).step_by(crop) {
                for x in (0..=w - crop).step_by(crop) {
                    scores.push(CropScore {
                        band_id: band.band_id().to_string(),
                        method: upscaler.method(),
                        x,
                        y,
                        psnr_db: psnr(
                            &band.crop(x, y, crop, crop)?,
                            &rebuilt.crop(x, y, crop, crop)?,
                        )?,
                    });
                }
            }
        }
    }
    Ok(scores)
}

/// Mean PSNR of one method's finite crop scores, with the number averaged.
pub fn mean_crop_psnr(scores: &[CropScore], method: UpscaleMethod) -> (f64, usize) {
    let values: Vec<f64> = scores
        .iter()
        .filter(|s| s.method == method && s.psnr_db.is_finite())
        .map(|s| s.psnr_db)
        .collect();
    let n = values.len();
    (
        if n == 0 {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / n as f64
        },
        n,
    )
}

pub fn crop_scores_csv(scores: &[CropScore]) -> String {
    let mut out = String::from("band,method,x,y,psnr_db\n");
    for s in scores {
        let v = if s.psnr_db.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:.6}", s.psnr_db)
        };
        writeln!(out, "{},{},{},{},{v}", s.band_id, s.method, s.x, s.y).unwrap();
    }
    out
}
