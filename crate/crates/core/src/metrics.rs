//! Image quality metrics and the chained per-step PSNR protocol.
//!
//! MSE and PSNR are expressed in 8-bit units (samples scaled by 255) with
//! peak value 255.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{BandRaster, MultispectralScene};
use crate::upscale::{UpscaleMethod, Upscaler};

/// Each chained step enlarges both axes by this factor.
pub const STEP_FACTOR: usize = 3;

fn check_same_size(f: &BandRaster, g: &BandRaster) -> Result<()> {
    if f.width() != g.width() || f.height() != g.height() {
        return Err(Error::DimensionMismatch(format!(
            "reference is {}x{}, test image is {}x{}",
            f.width(),
            f.height(),
            g.width(),
            g.height()
        )));
    }
    Ok(())
}

/// Mean squared difference in 8-bit units.
pub fn mse(f: &BandRaster, g: &BandRaster) -> Result<f64> {
    check_same_size(f, g)?;
    let sum: f64 = f
        .samples()
        .iter()
        .zip(g.samples())
        .map(|(&a, &b)| {
            let d = (a - b) * 255.0;
            d * d
        })
        .sum();
    Ok(sum / f.samples().len() as f64)
}

/// `10 log10(255^2 / MSE)`; `f64::INFINITY` when the images are identical.
pub fn psnr(f: &BandRaster, g: &BandRaster) -> Result<f64> {
    Ok(psnr_from_mse(mse(f, g)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

/// Averages `factor x factor` blocks; trailing rows/columns that do not
/// fill a block are dropped.
pub fn downsample_block_mean(raster: &BandRaster, factor: usize) -> Result<BandRaster> {
    if factor < 1 {
        return Err(Error::InvalidArgument(format!(
            "downsample factor {factor} < 1"
        )));
    }
    let (w, h) = (raster.width() / factor, raster.height() / factor);
    if w == 0 || h == 0 {
        return Err(Error::TooSmall(format!(
            "{}x{} raster has no {factor}x{factor} block",
            raster.width(),
            raster.height()
        )));
    }
    if factor == 1 {
        return Ok(raster.clone());
    }
    let area = (factor * factor) as f64;
    let src = raster.samples();
    let sw = raster.width();
    let mut out = vec![0.0; w * h];
    for by in 0..h {
        let dst = &mut out[by * w..(by + 1) * w];
        for y in by * factor..(by + 1) * factor {
            let row = &src[y * sw..y * sw + w * factor];
            for (d, block) in dst.iter_mut().zip(row.chunks_exact(factor)) {
                *d += block.iter().sum::<f64>();
            }
        }
        for d in dst.iter_mut() {
            *d /= area;
        }
    }
    BandRaster::from_clamped(raster.band_id(), w, h, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsnrRow {
    pub band_id: String,
    pub method: UpscaleMethod,
    pub step: usize,
    pub psnr_db: f64,
}

/// PSNR table keyed by `(band, method, step)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PsnrReport {
    rows: Vec<PsnrRow>,
}

impl PsnrReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: PsnrRow) -> Result<()> {
        if self
            .rows
            .iter()
            .any(|r| r.band_id == row.band_id && r.method == row.method && r.step == row.step)
        {
            return Err(Error::InvalidArgument(format!(
                "duplicate PSNR row for band {:?}, {}, step {}",
                row.band_id, row.method, row.step
            )));
        }
        if row.step < 1 || !(row.psnr_db >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid PSNR row: step {}, {} dB",
                row.step, row.psnr_db
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, other: PsnrReport) -> Result<()> {
        for row in other.rows {
            self.push(row)?;
        }
        Ok(())
    }

    pub fn rows(&self) -> &[PsnrRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// PSNR values of one band and method, ordered by step.
    pub fn series(&self, band_id: &str, method: UpscaleMethod) -> Vec<(usize, f64)> {
        let mut s: Vec<(usize, f64)> = self
            .rows
            .iter()
            .filter(|r| r.band_id == band_id && r.method == method)
            .map(|r| (r.step, r.psnr_db))
            .collect();
        s.sort_by_key(|&(step, _)| step);
        s
    }

    /// `band,method,step,psnr_db` with `inf` for identical images.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("band,method,step,psnr_db\n");
        for r in &self.rows {
            let value = if r.psnr_db.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.6}", r.psnr_db)
            };
            writeln!(out, "{},{},{},{}", r.band_id, r.method, r.step, value).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// PSNR of one upscaling step: the enlarged image is block-averaged back to
/// the previous step's grid, stored at 8 bits, and compared with it.
pub fn step_psnr(previous: &BandRaster, upscaled: &BandRaster) -> Result<f64> {
    let aligned = quantize_raster(&downsample_block_mean(upscaled, STEP_FACTOR)?);
    psnr(previous, &aligned)
}

/// Repeatedly enlarges every band by [`STEP_FACTOR`] and reports, for each
/// step `n`, the PSNR of step `n` against step `n - 1`. Every image entering
/// the comparison is quantized to 8 bits, as stored images would be.
pub fn chained_psnr(
    originals: &MultispectralScene,
    upscaler: &dyn Upscaler,
    steps: usize,
) -> Result<PsnrReport> {
    chained_psnr_with(originals, upscaler, steps, |_, _| Ok(()))
}

/// [`chained_psnr`] that also hands every quantized step scene to `on_step`
/// as soon as it exists. Only two consecutive steps are held in memory.
pub fn chained_psnr_with(
    originals: &MultispectralScene,
    upscaler: &dyn Upscaler,
    steps: usize,
    mut on_step: impl FnMut(usize, &MultispectralScene) -> Result<()>,
) -> Result<PsnrReport> {
    if steps < 1 {
        return Err(Error::InvalidArgument(
            "chained PSNR needs at least one step".into(),
        ));
    }
    let mut rows = Vec::with_capacity(steps * originals.band_count());
    let mut current = originals.try_map_bands(|_, b| Ok(quantize_raster(b)))?;
    for step in 1..=steps {
        let next = current
            .try_map_bands(|i, b| Ok(quantize_raster(&upscaler.upscale(i, b, STEP_FACTOR)?)))?;
        for (i, (prev, up)) in current.bands().iter().zip(next.bands()).enumerate() {
            rows.push((
                i,
                PsnrRow {
                    band_id: prev.band_id().to_string(),
                    method: upscaler.method(),
                    step,
                    psnr_db: step_psnr(prev, up)?,
                },
            ));
        }
        on_step(step, &next)?;
        current = next;
    }
    rows.sort_by_key(|(i, r)| (*i, r.step));
    let mut report = PsnrReport::new();
    for (_, row) in rows {
        report.push(row)?;
    }
    Ok(report)
}

/// Rounds every sample to the nearest 8-bit level.
pub fn quantize_raster(raster: &BandRaster) -> BandRaster {
    BandRaster::from_u8(
        raster.band_id(),
        raster.width(),
        raster.height(),
        &raster.to_u8(),
    )
    .expect("quantized raster is valid")
}
