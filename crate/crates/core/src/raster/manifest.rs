use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{pgm, BandRaster, MultispectralScene};
use crate::error::{Error, Result};

/// Scene manifest: shared dimensions plus one PGM per band, with paths
/// relative to the manifest file.
///
/// ```toml
/// width = 375
/// height = 516
///
/// [[bands]]
/// id = "B1"
/// path = "b1.pgm"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub width: usize,
    pub height: usize,
    pub bands: Vec<BandEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEntry {
    pub id: String,
    pub path: PathBuf,
}

impl SceneManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

pub fn load_scene(manifest_path: impl AsRef<Path>) -> Result<MultispectralScene> {
    let manifest_path = manifest_path.as_ref();
    let manifest = SceneManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut bands = Vec::with_capacity(manifest.bands.len());
    for entry in &manifest.bands {
        if bands.iter().any(|b: &BandRaster| b.band_id() == entry.id) {
            return Err(Error::DuplicateBand(entry.id.clone()));
        }
        let img = pgm::read_pgm(base.join(&entry.path))?;
        if img.width != manifest.width || img.height != manifest.height {
            return Err(Error::DimensionMismatch(format!(
                "band {:?} is {}x{}, manifest says {}x{}",
                entry.id, img.width, img.height, manifest.width, manifest.height
            )));
        }
        bands.push(BandRaster::from_u8(
            entry.id.clone(),
            img.width,
            img.height,
            &img.data,
        )?);
    }
    MultispectralScene::new(bands)
}

/// Writes every band as `<dir>/<band_id>.pgm` plus `<dir>/scene.toml`, and
/// returns the manifest path.
pub fn write_scene(scene: &MultispectralScene, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(scene.band_count());
    for band in scene.bands() {
        let file = PathBuf::from(format!("{}.pgm", band.band_id()));
        pgm::write_pgm(dir.join(&file), band.width(), band.height(), &band.to_u8())?;
        entries.push(BandEntry {
            id: band.band_id().to_string(),
            path: file,
        });
    }
    let manifest = SceneManifest {
        width: scene.width(),
        height: scene.height(),
        bands: entries,
    };
    let path = dir.join("scene.toml");
    let text = toml::to_string(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_manifest(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("scene.toml");
        fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn loads_single_peak_pixel() {
        let dir = tempfile::tempdir().unwrap();
        pgm::write_pgm(dir.path().join("b.pgm"), 1, 1, &[255]).unwrap();
        let m = write_manifest(
            dir.path(),
            "width = 1\nheight = 1\n[[bands]]\nid = \"B1\"\npath = \"b.pgm\"\n",
        );
        let scene = load_scene(m).unwrap();
        assert_eq!(scene.bands()[0].samples(), &[1.0]);
    }

    #[test]
    fn loads_six_band_scene_at_study_size() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("width = 375\nheight = 516\n");
        for (i, id) in ["B1", "B2", "B3", "B4", "B5", "B7"].iter().enumerate() {
            let data: Vec<u8> = (0..375 * 516).map(|p| ((p + i) % 256) as u8).collect();
            pgm::write_pgm(dir.path().join(format!("{id}.pgm")), 375, 516, &data).unwrap();
            body.push_str(&format!("[[bands]]\nid = \"{id}\"\npath = \"{id}.pgm\"\n"));
        }
        let scene = load_scene(write_manifest(dir.path(), &body)).unwrap();
        assert_eq!(
            (scene.width(), scene.height(), scene.band_count()),
            (375, 516, 6)
        );
        assert_eq!(scene.bands()[5].band_id(), "B7");
    }

    #[test]
    fn rejects_height_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        pgm::write_pgm(dir.path().join("a.pgm"), 2, 2, &[0; 4]).unwrap();
        pgm::write_pgm(dir.path().join("b.pgm"), 2, 3, &[0; 6]).unwrap();
        let m = write_manifest(
            dir.path(),
            "width = 2\nheight = 2\n[[bands]]\nid = \"B1\"\npath = \"a.pgm\"\n[[bands]]\nid = \"B2\"\npath = \"b.pgm\"\n",
        );
        assert!(matches!(load_scene(m), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejects_duplicate_ids_missing_files_and_depth() {
        let dir = tempfile::tempdir().unwrap();
        pgm::write_pgm(dir.path().join("a.pgm"), 1, 1, &[0]).unwrap();
        let m = write_manifest(
            dir.path(),
            "width = 1\nheight = 1\n[[bands]]\nid = \"B1\"\npath = \"a.pgm\"\n[[bands]]\nid = \"B1\"\npath = \"a.pgm\"\n",
        );
        assert!(matches!(load_scene(&m), Err(Error::DuplicateBand(_))));

        let m = write_manifest(
            dir.path(),
            "width = 1\nheight = 1\n[[bands]]\nid = \"B1\"\npath = \"missing.pgm\"\n",
        );
        assert!(matches!(load_scene(&m), Err(Error::Io { .. })));
        assert!(matches!(
            load_scene(dir.path().join("nope.toml")),
            Err(Error::Io { .. })
        ));

        fs::write(dir.path().join("deep.pgm"), b"P5\n1 1\n65535\n\0\0").unwrap();
        let m = write_manifest(
            dir.path(),
            "width = 1\nheight = 1\n[[bands]]\nid = \"B1\"\npath = \"deep.pgm\"\n",
        );
        assert!(matches!(
            load_scene(&m),
            Err(Error::UnsupportedDepth(65535))
        ));
    }

    #[test]
    fn write_then_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let bands = (0..3)
            .map(|b| {
                let data: Vec<u8> = (0..35u32).map(|i| (i * 37 + b * 11) as u8).collect();
                BandRaster::from_u8(format!("B{b}"), 7, 5, &data).unwrap()
            })
            .collect();
        let scene = MultispectralScene::new(bands).unwrap();
        let m = write_scene(&scene, dir.path()).unwrap();
        let back = load_scene(m).unwrap();
        assert_eq!(back, scene);
        for (a, b) in back.bands().iter().zip(scene.bands()) {
            assert_eq!(a.to_u8(), b.to_u8());
        }
    }
}
