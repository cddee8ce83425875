//! Common interface over the three enlargement methods.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{upscale_bicubic, upscale_bilinear};
use crate::raster::{BandRaster, MultispectralScene};
use crate::srcnn::{upscale_srcnn, SrcnnModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpscaleMethod {
    Bilinear,
    Bicubic,
    Srcnn,
}

impl UpscaleMethod {
    pub const ALL: [UpscaleMethod; 3] = [
        UpscaleMethod::Bilinear,
        UpscaleMethod::Bicubic,
        UpscaleMethod::Srcnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UpscaleMethod::Bilinear => "bilinear",
            UpscaleMethod::Bicubic => "bicubic",
            UpscaleMethod::Srcnn => "srcnn",
        }
    }
}

impl fmt::Display for UpscaleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UpscaleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown upscale method {s:?}")))
    }
}

/// Enlarges one band of a scene; `band_index` lets per-band methods pick
/// their model.
pub trait Upscaler {
    fn method(&self) -> UpscaleMethod;
    fn upscale(&self, band_index: usize, raster: &BandRaster, factor: usize) -> Result<BandRaster>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Bilinear;

#[derive(Debug, Clone, Copy, Default)]
pub struct Bicubic;

impl Upscaler for Bilinear {
    fn method(&self) -> UpscaleMethod {
        UpscaleMethod::Bilinear
    }

    fn upscale(&self, _: usize, raster: &BandRaster, factor: usize) -> Result<BandRaster> {
        upscale_bilinear(raster, factor)
    }
}

impl Upscaler for Bicubic {
    fn method(&self) -> UpscaleMethod {
        UpscaleMethod::Bicubic
    }

    fn upscale(&self, _: usize, raster: &BandRaster, factor: usize) -> Result<BandRaster> {
        upscale_bicubic(raster, factor)
    }
}

/// SRCNN models indexed by band, or a single model shared by all bands.
#[derive(Debug, Clone, PartialEq)]
pub struct SrcnnBank {
    models: Vec<SrcnnModel>,
}

impl SrcnnBank {
    pub fn per_band(models: Vec<SrcnnModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidArgument(
                "SRCNN bank needs at least one model".into(),
            ));
        }
        Ok(Self { models })
    }

    pub fn shared(model: SrcnnModel) -> Self {
        Self {
            models: vec![model],
        }
    }

    pub fn models(&self) -> &[SrcnnModel] {
        &self.models
    }

    pub fn is_shared(&self) -> bool {
        self.models.len() == 1
    }

    pub fn model_for(&self, band_index: usize) -> Result<&SrcnnModel> {
        if self.is_shared() {
            return Ok(&self.models[0]);
        }
        self.models.get(band_index).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "no SRCNN model for band {band_index} ({} models)",
                self.models.len()
            ))
        })
    }
}

impl Upscaler for SrcnnBank {
    fn method(&self) -> UpscaleMethod {
        UpscaleMethod::Srcnn
    }

    fn upscale(&self, band_index: usize, raster: &BandRaster, factor: usize) -> Result<BandRaster> {
        upscale_srcnn(self.model_for(band_index)?, raster, factor)
    }
}

/// Enlarges every band of `scene` by `factor`, keeping band ids.
pub fn upscale_scene(
    scene: &MultispectralScene,
    upscaler: &dyn Upscaler,
    factor: usize,
) -> Result<MultispectralScene> {
    scene.try_map_bands(|i, band| upscaler.upscale(i, band, factor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in UpscaleMethod::ALL {
            assert_eq!(m.to_string().parse::<UpscaleMethod>().unwrap(), m);
        }
        assert!("nearest".parse::<UpscaleMethod>().is_err());
    }

    #[test]
    fn scene_upscale_keeps_ids() {
        let bands = ["B1", "B7"]
            .iter()
            .map(|id| BandRaster::constant(*id, 4, 3, 0.5).unwrap())
            .collect();
        let scene = MultispectralScene::new(bands).unwrap();
        let up = upscale_scene(&scene, &Bicubic, 3).unwrap();
        assert_eq!((up.width(), up.height()), (12, 9));
        assert_eq!(up.bands()[1].band_id(), "B7");
    }

    #[test]
    fn bank_lookup() {
        use crate::srcnn::{SrcnnGeometry, SrcnnModel};
        let m = SrcnnModel::random(
            SrcnnGeometry {
                features: [2, 2],
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let shared = SrcnnBank::shared(m.clone());
        assert!(shared.model_for(5).is_ok());
        let bank = SrcnnBank::per_band(vec![m.clone(), m]).unwrap();
        assert!(bank.model_for(2).is_err());
        assert!(SrcnnBank::per_band(vec![]).is_err());
    }
}
