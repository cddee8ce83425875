//! End-to-end runs of the experiment pipeline on small synthetic scenes.

use std::fs;
use std::path::Path;

use landsr_core::pipeline::experiment::FAILURE_MARKER;
use landsr_core::pipeline::{
    make_synthetic_scene, run_experiment, ExperimentConfig, SyntheticLayout,
};
use landsr_core::raster::{
    format_regions, read_class_map, write_class_map, write_scene, DEFAULT_PALETTE,
};
use landsr_core::upscale::UpscaleMethod;
use landsr_core::Error;

/// Writes a synthetic scene and returns a config pointing at it.
fn setup(dir: &Path, size: usize, extra: &str) -> ExperimentConfig {
    let layout = SyntheticLayout::standard(size, size, 3).unwrap();
    let synth = make_synthetic_scene(&layout, 0.01, 3).unwrap();
    write_scene(&synth.scene, dir).unwrap();
    write_class_map(&synth.truth, dir.join("truth.pgm")).unwrap();
    fs::write(
        dir.join("regions.toml"),
        format_regions(&synth.training_regions, &layout.class_names),
    )
    .unwrap();
    let text = format!(
        "scene = \"scene.toml\"\nregions = \"regions.toml\"\ntruth = \"truth.pgm\"\n{extra}"
    );
    ExperimentConfig::from_toml(&text, dir).unwrap()
}

#[test]
fn smallest_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), 16, "methods = [\"bilinear\"]\nsteps = 1\n");
    let result = run_experiment(&config).unwrap();
    assert_eq!(result.class_maps.len(), 2);
    assert_eq!(result.psnr.len(), 6);
    assert!(result.srcnn_models.is_empty());
    for f in result.files() {
        assert!(
            fs::metadata(f).unwrap().len() > 0,
            "{} is empty",
            f.display()
        );
    }
    assert!(!dir.path().join("out").join(FAILURE_MARKER).exists());
    let csv = fs::read_to_string(&result.psnr_csv).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("band,method,step,psnr_db\n"));
}

#[test]
fn class_map_sizes_follow_steps() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(
        dir.path(),
        21,
        "methods = [\"bicubic\", \"srcnn\"]\nsteps = 2\n[srcnn]\nepochs = 1\npatch_size = 12\nstride = 12\n[srcnn.geometry]\nfeatures = [4, 2]\nkernel_sizes = [3, 3, 1]\n",
    );
    let result = run_experiment(&config).unwrap();
    assert_eq!(result.class_maps.len(), 6);
    for entry in &result.class_maps {
        let map = read_class_map(&entry.path, DEFAULT_PALETTE.to_vec()).unwrap();
        let side = 3usize.pow(entry.step as u32) * 21 / 2;
        assert_eq!(
            (map.width(), map.height()),
            (side, side),
            "{:?} step {}",
            entry.method,
            entry.step
        );
    }
    // Per-band models: one file and one loss trace per band.
    assert_eq!(result.srcnn_models.len(), 6);
    assert_eq!(result.srcnn_traces.len(), 6);
    assert_eq!(result.accuracy.len(), 6);
    let acc = result.accuracy_row(UpscaleMethod::Bicubic, 0).unwrap();
    assert!((0.0..=1.0).contains(&acc.accuracy));
    assert_eq!(acc.recall.len(), 3);
    assert!(acc.recall.iter().flatten().all(|r| (0.0..=1.0).contains(r)));
    let header = fs::read_to_string(result.accuracy_csv.as_ref().unwrap()).unwrap();
    assert!(header
        .starts_with("method,step,accuracy,recall_deep_forest,recall_light_forest,recall_river\n"));
}

#[test]
fn step_zero_is_shared_by_methods() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(
        dir.path(),
        18,
        "methods = [\"bilinear\", \"bicubic\"]\nsteps = 1\n",
    );
    let result = run_experiment(&config).unwrap();
    let step0: Vec<_> = result
        .class_maps
        .iter()
        .filter(|e| e.step == 0)
        .map(|e| fs::read(&e.path).unwrap())
        .collect();
    assert_eq!(step0.len(), 2);
    assert_eq!(step0[0], step0[1]);
}

#[test]
fn replay_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(
        dir.path(),
        20,
        "methods = [\"bicubic\", \"srcnn\"]\nsteps = 1\n[srcnn]\nshared = true\nepochs = 2\npatch_size = 12\nstride = 8\n[srcnn.geometry]\nfeatures = [4, 2]\nkernel_sizes = [3, 3, 1]\n",
    );
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        config.output_dir = dir.path().join(run);
        let result = run_experiment(&config).unwrap();
        let mut files: Vec<(String, Vec<u8>)> = result
            .files()
            .into_iter()
            .filter(|f| f.file_name().unwrap() != "run.meta")
            .map(|f| {
                (
                    f.strip_prefix(&config.output_dir)
                        .unwrap()
                        .display()
                        .to_string(),
                    fs::read(f).unwrap(),
                )
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn failing_stage_leaves_marker() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), 16, "methods = [\"bilinear\"]\nsteps = 1\n");
    // A region with an unknown class fails the load stage.
    fs::write(
        dir.path().join("regions.toml"),
        "[[regions]]\nx = 0\ny = 0\nw = 2\nh = 2\nclass = \"swamp\"\n",
    )
    .unwrap();
    let err = run_experiment(&config).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "load", .. }), "{err}");
    let marker = fs::read_to_string(dir.path().join("out").join(FAILURE_MARKER)).unwrap();
    assert!(marker.contains("load"));

    // A later success clears the marker.
    let layout = SyntheticLayout::standard(16, 16, 3).unwrap();
    let synth = make_synthetic_scene(&layout, 0.01, 3).unwrap();
    fs::write(
        dir.path().join("regions.toml"),
        format_regions(&synth.training_regions, &layout.class_names),
    )
    .unwrap();
    run_experiment(&config).unwrap();
    assert!(!dir.path().join("out").join(FAILURE_MARKER).exists());
}

#[test]
fn missing_truth_skips_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(dir.path(), 16, "methods = [\"bicubic\"]\nsteps = 1\n");
    config.truth = None;
    let result = run_experiment(&config).unwrap();
    assert!(result.accuracy.is_empty());
    assert!(result.accuracy_csv.is_none());
    assert!(!dir.path().join("out/reports/accuracy.csv").exists());
}
