//! Raster data model: single bands, co-registered multispectral scenes,
//! classifier feature sets and label maps.

mod features;
mod manifest;
pub mod pgm;

pub(crate) use features::pooled_block_rows;
pub use features::{
    extract_features, format_regions, label_regions, parse_regions, pool_2x2, read_regions,
    FeatureMode, Rect, Region,
};
pub use manifest::{load_scene, write_scene, SceneManifest};

use crate::error::{Error, Result};

/// Default land-cover classes, in label order.
pub const DEFAULT_CLASS_NAMES: [&str; 3] = ["deep_forest", "light_forest", "river"];

/// Default gray value used to render each default class (ash, white, black).
pub const DEFAULT_PALETTE: [u8; 3] = [128, 255, 0];

pub fn default_class_names() -> Vec<String> {
    DEFAULT_CLASS_NAMES.iter().map(|s| s.to_string()).collect()
}

/// One spectral band, stored as row-major intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRaster {
    band_id: String,
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl BandRaster {
    pub fn new(
        band_id: impl Into<String>,
        width: usize,
        height: usize,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "{} samples for a {width}x{height} raster",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidRaster(format!("sample {bad} outside [0, 1]")));
        }
        Ok(Self {
            band_id: band_id.into(),
            width,
            height,
            samples,
        })
    }

    /// Builds a raster by clamping arbitrary values into `[0, 1]`.
    pub fn from_clamped(
        band_id: impl Into<String>,
        width: usize,
        height: usize,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| v.is_nan()) {
            return Err(Error::NonFinite(format!("raster value {bad}")));
        }
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
        Self::new(band_id, width, height, values)
    }

    pub fn from_fn(
        band_id: impl Into<String>,
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self::new(band_id, width, height, samples)
    }

    pub fn constant(
        band_id: impl Into<String>,
        width: usize,
        height: usize,
        value: f64,
    ) -> Result<Self> {
        Self::new(band_id, width, height, vec![value; width * height])
    }

    /// Decodes 8-bit samples (`v / 255`).
    pub fn from_u8(
        band_id: impl Into<String>,
        width: usize,
        height: usize,
        data: &[u8],
    ) -> Result<Self> {
        Self::new(
            band_id,
            width,
            height,
            data.iter().map(|&v| f64::from(v) / 255.0).collect(),
        )
    }

    /// Encodes to 8-bit, rounding to the nearest level.
    pub fn to_u8(&self) -> Vec<u8> {
        self.samples.iter().map(|&v| quantize_u8(v)).collect()
    }

    pub fn band_id(&self) -> &str {
        &self.band_id
    }

    pub fn set_band_id(&mut self, id: impl Into<String>) {
        self.band_id = id.into();
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    /// Copies out a `w`x`h` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::InvalidArgument(format!(
                "crop {w}x{h} at ({x}, {y}) outside {}x{} raster",
                self.width, self.height
            )));
        }
        let mut out = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            out.extend_from_slice(&self.samples[start..start + w]);
        }
        Self::new(self.band_id.clone(), w, h, out)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

#[inline]
pub(crate) fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// A stack of co-registered bands sharing one pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultispectralScene {
    bands: Vec<BandRaster>,
    width: usize,
    height: usize,
}

impl MultispectralScene {
    pub fn new(bands: Vec<BandRaster>) -> Result<Self> {
        let first = bands
            .first()
            .ok_or_else(|| Error::InvalidRaster("scene has no bands".into()))?;
        let (width, height) = (first.width, first.height);
        for (i, band) in bands.iter().enumerate() {
            if band.width != width || band.height != height {
                return Err(Error::DimensionMismatch(format!(
                    "band {:?} is {}x{}, expected {width}x{height}",
                    band.band_id, band.width, band.height
                )));
            }
            if bands[..i].iter().any(|b| b.band_id == band.band_id) {
                return Err(Error::DuplicateBand(band.band_id.clone()));
            }
        }
        Ok(Self {
            bands,
            width,
            height,
        })
    }

    pub fn bands(&self) -> &[BandRaster] {
        &self.bands
    }

    pub fn into_bands(self) -> Vec<BandRaster> {
        self.bands
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        let bands = self
            .bands
            .iter()
            .map(|b| b.crop(x, y, w, h))
            .collect::<Result<Vec<_>>>()?;
        Self::new(bands)
    }

    /// Applies `f` to every band, keeping band ids.
    pub fn try_map_bands(
        &self,
        mut f: impl FnMut(usize, &BandRaster) -> Result<BandRaster>,
    ) -> Result<Self> {
        let bands = self
            .bands
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mut out = f(i, b)?;
                out.set_band_id(b.band_id.clone());
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bands)
    }
}

/// Labeled (or unlabeled) feature vectors of a fixed dimension, stored
/// contiguously one vector after another.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    values: Vec<f64>,
    labels: Option<Vec<usize>>,
    class_names: Vec<String>,
}

impl FeatureSet {
    pub fn new(
        dim: usize,
        values: Vec<f64>,
        labels: Option<Vec<usize>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "feature dimension must be positive".into(),
            ));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not split into vectors of dimension {dim}",
                values.len()
            )));
        }
        let n = values.len() / dim;
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {n} features",
                    labels.len()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
                return Err(Error::InvalidArgument(format!(
                    "label {bad} out of range for {} classes",
                    class_names.len()
                )));
            }
        }
        Ok(Self {
            dim,
            values,
            labels,
            class_names,
        })
    }

    pub fn from_rows(
        rows: &[Vec<f64>],
        labels: Option<Vec<usize>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(
                "feature rows differ in length".into(),
            ));
        }
        Self::new(dim, rows.concat(), labels, class_names)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Row-major `len() x dim()` matrix of all features.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Concatenates feature sets that share dimension and class names.
    pub fn concat(sets: Vec<FeatureSet>) -> Result<Self> {
        let mut iter = sets.into_iter();
        let mut acc = iter
            .next()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        for set in iter {
            if set.dim != acc.dim || set.class_names != acc.class_names {
                return Err(Error::DimensionMismatch(
                    "feature sets differ in dimension or classes".into(),
                ));
            }
            acc.values.extend_from_slice(&set.values);
            acc.labels = match (acc.labels, set.labels) {
                (Some(mut a), Some(b)) => {
                    a.extend(b);
                    Some(a)
                }
                (None, None) => None,
                _ => {
                    return Err(Error::InvalidArgument(
                        "cannot mix labeled and unlabeled feature sets".into(),
                    ))
                }
            };
        }
        Ok(acc)
    }
}

/// A grid of class labels with the gray value used to render each class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    width: usize,
    height: usize,
    labels: Vec<usize>,
    palette: Vec<u8>,
}

impl ClassMap {
    pub fn new(width: usize, height: usize, labels: Vec<usize>, palette: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {width}x{height} map",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= palette.len()) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} has no palette entry"
            )));
        }
        for (i, v) in palette.iter().enumerate() {
            if palette[..i].contains(v) {
                return Err(Error::InvalidArgument(format!(
                    "palette value {v} used by two classes"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            labels,
            palette,
        })
    }

    pub fn with_default_palette(width: usize, height: usize, labels: Vec<usize>) -> Result<Self> {
        Self::new(width, height, labels, DEFAULT_PALETTE.to_vec())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn palette(&self) -> &[u8] {
        &self.palette
    }

    pub fn get(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }

    pub fn to_gray(&self) -> Vec<u8> {
        self.labels.iter().map(|&l| self.palette[l]).collect()
    }

    pub fn from_gray(width: usize, height: usize, gray: &[u8], palette: Vec<u8>) -> Result<Self> {
        let labels =
            gray.iter()
                .map(|v| {
                    palette.iter().position(|p| p == v).ok_or_else(|| {
                        Error::InvalidArgument(format!("gray value {v} not in palette"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        Self::new(width, height, labels, palette)
    }
}

/// Renders a class map as an 8-bit PGM using its palette.
pub fn write_class_map(map: &ClassMap, path: impl AsRef<std::path::Path>) -> Result<()> {
    pgm::write_pgm(path, map.width, map.height, &map.to_gray())
}

/// Reads a class map rendered by [`write_class_map`] back into labels.
pub fn read_class_map(path: impl AsRef<std::path::Path>, palette: Vec<u8>) -> Result<ClassMap> {
    let img = pgm::read_pgm(path)?;
    ClassMap::from_gray(img.width, img.height, &img.data, palette)
}
