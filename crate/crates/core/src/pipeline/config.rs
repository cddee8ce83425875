//! Experiment configuration, read from TOML. Relative paths resolve against
//! the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierSettings;
use crate::error::{Error, Result};
use crate::optim::{ScgSettings, SgdConfig};
use crate::srcnn::SrcnnGeometry;
use crate::upscale::UpscaleMethod;

/// Optimizer used to fit SRCNN weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrOptimizer {
    #[default]
    Sgd,
    /// Full-batch scaled conjugate gradient; `epochs` is its iteration budget.
    Scg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrcnnSettings {
    pub geometry: SrcnnGeometry,
    /// One model for all bands instead of one per band.
    pub shared: bool,
    /// Degradation factor used to synthesize training pairs.
    pub factor: usize,
    pub patch_size: usize,
    pub stride: usize,
    pub optimizer: SrOptimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SrcnnSettings {
    fn default() -> Self {
        Self {
            geometry: SrcnnGeometry::default(),
            shared: false,
            factor: 3,
            patch_size: 33,
            stride: 14,
            optimizer: SrOptimizer::Sgd,
            learning_rate: 0.05,
            batch_size: 4,
            epochs: 30,
            seed: 0,
        }
    }
}

impl SrcnnSettings {
    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: crate::rng::derive_seed(self.seed, 0x5eed),
        }
    }

    pub fn scg(&self) -> ScgSettings {
        ScgSettings {
            max_iter: self.epochs,
            grad_tol: 0.0,
            ..ScgSettings::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.factor < 1 || self.patch_size < 1 || self.stride < 1 {
            return Err(Error::Config(
                "srcnn factor, patch_size and stride must be >= 1".into(),
            ));
        }
        if self.optimizer == SrOptimizer::Sgd {
            self.sgd()
                .validate()
                .map_err(|e| Error::Config(format!("srcnn: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scene manifest.
    pub scene: PathBuf,
    /// Classifier training rectangles.
    pub regions: PathBuf,
    /// Optional pixel-level truth map (PGM, class palette) for accuracy reports.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_methods")]
    pub methods: Vec<UpscaleMethod>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "crate::raster::default_class_names")]
    pub class_names: Vec<String>,
    #[serde(default = "default_palette")]
    pub palette: Vec<u8>,
    #[serde(default)]
    pub classifier: ClassifierSettings,
    #[serde(default)]
    pub srcnn: SrcnnSettings,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_methods() -> Vec<UpscaleMethod> {
    vec![UpscaleMethod::Bicubic, UpscaleMethod::Srcnn]
}

fn default_steps() -> usize {
    3
}

fn default_palette() -> Vec<u8> {
    crate::raster::DEFAULT_PALETTE.to_vec()
}

impl ExperimentConfig {
    /// Parses TOML text; relative paths are joined onto `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in [
            &mut config.scene,
            &mut config.regions,
            &mut config.output_dir,
        ]
        .into_iter()
        .chain(config.truth.as_mut())
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::parse(path, msg),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    /// Replaces every seed with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.classifier.seed = seed;
        self.srcnn.seed = seed;
    }

    /// Checks field ranges and that input files exist.
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods contains duplicates".into()));
        }
        if self.palette.len() != self.class_names.len() {
            return Err(Error::Config(format!(
                "{} palette entries for {} classes",
                self.palette.len(),
                self.class_names.len()
            )));
        }
        if self.classifier.hidden_dims.contains(&0) {
            return Err(Error::Config(
                "classifier hidden_dims must be positive".into(),
            ));
        }
        self.srcnn.validate()?;
        for path in [&self.scene, &self.regions]
            .into_iter()
            .chain(self.truth.as_ref())
        {
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "input file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scene = "data/scene.toml"
regions = "data/regions.toml"
"#;

    #[test]
    fn defaults_and_relative_paths() {
        let c = ExperimentConfig::from_toml(MINIMAL, Path::new("/exp")).unwrap();
        assert_eq!(c.scene, PathBuf::from("/exp/data/scene.toml"));
        assert_eq!(c.output_dir, PathBuf::from("/exp/out"));
        assert_eq!(c.steps, 3);
        assert_eq!(
            c.methods,
            vec![UpscaleMethod::Bicubic, UpscaleMethod::Srcnn]
        );
        assert_eq!(c.classifier.hidden_dims, vec![24]);
        assert_eq!(c.srcnn.geometry, SrcnnGeometry::default());
        assert!(c.truth.is_none());
    }

    #[test]
    fn nested_sections() {
        let text = format!(
            "{MINIMAL}\nmethods = [\"bilinear\"]\nsteps = 1\n[classifier]\nmax_iter = 7\n[srcnn]\nepochs = 2\n[srcnn.geometry]\nfeatures = [8, 4]\n"
        );
        let c = ExperimentConfig::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(c.methods, vec![UpscaleMethod::Bilinear]);
        assert_eq!(c.classifier.max_iter, 7);
        assert_eq!(c.srcnn.epochs, 2);
        assert_eq!(c.srcnn.geometry.features, [8, 4]);
        assert_eq!(c.srcnn.geometry.kernel_sizes, [9, 3, 1]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(
            ExperimentConfig::from_toml(&format!("{MINIMAL}\nstepz = 2\n"), Path::new("."))
                .is_err()
        );
        let c = ExperimentConfig::from_toml(&format!("{MINIMAL}\nsteps = 0\n"), Path::new("."))
            .unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = ExperimentConfig::from_toml(&format!("{MINIMAL}\nmethods = []\n"), Path::new("."))
            .unwrap();
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml(
            &format!("{MINIMAL}\nmethods = [\"nearest\"]\n"),
            Path::new(".")
        )
        .is_err());
    }

    #[test]
    fn missing_inputs_fail_validation() {
        let c = ExperimentConfig::from_toml(MINIMAL, Path::new("/nonexistent")).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(m)) if m.contains("does not exist")));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::from_toml(MINIMAL, Path::new("/exp")).unwrap();
        c.override_seed(42);
        let back = ExperimentConfig::from_toml(&c.to_toml(), Path::new("/other")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.srcnn.seed, 42);
    }

    #[test]
    fn shipped_reference_matches_defaults() {
        let reference = include_str!("../../../../configs/default.toml");
        let parsed = ExperimentConfig::from_toml(reference, Path::new("/r")).unwrap();
        let minimal = ExperimentConfig::from_toml(
            "scene = \"data/scene.toml\"\nregions = \"data/regions.toml\"\n",
            Path::new("/r"),
        )
        .unwrap();
        assert_eq!(parsed, minimal);
    }

    #[test]
    fn shipped_study_settings_parse() {
        let study = include_str!("../../../../configs/synthetic-study.toml");
        let c = ExperimentConfig::from_toml(&format!("{MINIMAL}{study}"), Path::new("/r")).unwrap();
        assert_eq!(c.srcnn.optimizer, SrOptimizer::Scg);
        c.srcnn.validate().unwrap();
    }
}
