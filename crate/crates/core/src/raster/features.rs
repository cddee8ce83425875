use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BandRaster, FeatureSet, MultispectralScene};
use crate::error::{Error, Result};

/// How a scene is cut into classifier inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// One vector per non-overlapping 2x2 block: 4 values per band.
    #[default]
    Pooled2x2,
    /// One vector per interior pixel from its 3x3 neighborhood: 9 values per band.
    Patch3x3,
}

impl FeatureMode {
    pub fn dim(self, bands: usize) -> usize {
        match self {
            FeatureMode::Pooled2x2 => 4 * bands,
            FeatureMode::Patch3x3 => 9 * bands,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub rect: Rect,
    pub class: usize,
}

/// Averages every 2x2 block; a trailing odd row or column is dropped.
pub fn pool_2x2(raster: &BandRaster) -> Result<BandRaster> {
    let (w, h) = (raster.width() / 2, raster.height() / 2);
    if w == 0 || h == 0 {
        return Err(Error::TooSmall(format!(
            "{}x{} raster cannot be pooled 2x2",
            raster.width(),
            raster.height()
        )));
    }
    let mut out = Vec::with_capacity(w * h);
    for by in 0..h {
        for bx in 0..w {
            let (x, y) = (2 * bx, 2 * by);
            let sum = raster.get(x, y)
                + raster.get(x + 1, y)
                + raster.get(x, y + 1)
                + raster.get(x + 1, y + 1);
            out.push(sum / 4.0);
        }
    }
    BandRaster::from_clamped(raster.band_id(), w, h, out)
}

/// Appends pooled 2x2 feature vectors for block rows `rows` to `out`.
pub(crate) fn pooled_block_rows(
    scene: &MultispectralScene,
    rows: std::ops::Range<usize>,
    out: &mut Vec<f64>,
) {
    let blocks_x = scene.width() / 2;
    for by in rows {
        for bx in 0..blocks_x {
            for band in scene.bands() {
                let (x, y) = (2 * bx, 2 * by);
                out.extend_from_slice(&[
                    band.get(x, y),
                    band.get(x + 1, y),
                    band.get(x, y + 1),
                    band.get(x + 1, y + 1),
                ]);
            }
        }
    }
}

pub fn extract_features(scene: &MultispectralScene, mode: FeatureMode) -> Result<FeatureSet> {
    extract_with_classes(scene, mode, super::default_class_names())
}

fn extract_with_classes(
    scene: &MultispectralScene,
    mode: FeatureMode,
    class_names: Vec<String>,
) -> Result<FeatureSet> {
    let (w, h) = (scene.width(), scene.height());
    let dim = mode.dim(scene.band_count());
    let mut values = Vec::new();
    match mode {
        FeatureMode::Pooled2x2 => {
            if w < 2 || h < 2 {
                return Err(Error::TooSmall(format!("{w}x{h} scene has no 2x2 block")));
            }
            values.reserve((w / 2) * (h / 2) * dim);
            pooled_block_rows(scene, 0..h / 2, &mut values);
        }
        FeatureMode::Patch3x3 => {
            if w < 3 || h < 3 {
                return Err(Error::TooSmall(format!(
                    "{w}x{h} scene has no interior pixel"
                )));
            }
            values.reserve((w - 2) * (h - 2) * dim);
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    for band in scene.bands() {
                        for yy in y - 1..=y + 1 {
                            for xx in x - 1..=x + 1 {
                                values.push(band.get(xx, yy));
                            }
                        }
                    }
                }
            }
        }
    }
    FeatureSet::new(dim, values, None, class_names)
}

/// Builds a labeled training set from rectangles of known class.
pub fn label_regions(
    scene: &MultispectralScene,
    regions: &[Region],
    mode: FeatureMode,
    class_names: Vec<String>,
) -> Result<FeatureSet> {
    if regions.is_empty() {
        return Err(Error::InvalidArgument("no training regions given".into()));
    }
    let mut sets = Vec::with_capacity(regions.len());
    for region in regions {
        let Rect { x, y, w, h } = region.rect;
        if w == 0 || h == 0 || x + w > scene.width() || y + h > scene.height() {
            return Err(Error::InvalidArgument(format!(
                "region {w}x{h} at ({x}, {y}) outside {}x{} scene",
                scene.width(),
                scene.height()
            )));
        }
        if region.class >= class_names.len() {
            return Err(Error::InvalidArgument(format!(
                "class {} out of range for {} classes",
                region.class,
                class_names.len()
            )));
        }
        let crop = scene.crop(x, y, w, h)?;
        let unlabeled = extract_with_classes(&crop, mode, class_names.clone())?;
        let n = unlabeled.len();
        sets.push(FeatureSet::new(
            unlabeled.dim(),
            unlabeled.values,
            Some(vec![region.class; n]),
            class_names.clone(),
        )?);
    }
    FeatureSet::concat(sets)
}

#[derive(Debug, Serialize, Deserialize)]
struct RegionFile {
    regions: Vec<RegionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegionEntry {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    class: String,
}

/// Parses a region label file:
///
/// ```toml
/// [[regions]]
/// x = 0
/// y = 0
/// w = 40
/// h = 30
/// class = "river"
/// ```
pub fn read_regions(path: impl AsRef<Path>, class_names: &[String]) -> Result<Vec<Region>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_regions(&text, class_names).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::parse(path, msg),
        other => other,
    })
}

pub fn parse_regions(text: &str, class_names: &[String]) -> Result<Vec<Region>> {
    let file: RegionFile =
        toml::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    file.regions
        .into_iter()
        .map(|r| {
            let class = class_names
                .iter()
                .position(|c| *c == r.class)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown class {:?}", r.class)))?;
            Ok(Region {
                rect: Rect {
                    x: r.x,
                    y: r.y,
                    w: r.w,
                    h: r.h,
                },
                class,
            })
        })
        .collect()
}

pub fn format_regions(regions: &[Region], class_names: &[String]) -> String {
    let file = RegionFile {
        regions: regions
            .iter()
            .map(|r| RegionEntry {
                x: r.rect.x,
                y: r.rect.y,
                w: r.rect.w,
                h: r.rect.h,
                class: class_names[r.class].clone(),
            })
            .collect(),
    };
    toml::to_string(&file).expect("regions serialize")
}
