//! End-to-end study: train the classifier once, enlarge the scene step by
//! step with each method, classify every step and report PSNR and accuracy.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{ExperimentConfig, SrOptimizer, SrcnnSettings};
use super::plot::render_psnr_plot;
use super::synthetic::block_truth;
use crate::classifier::{classify_scene, evaluate, train_classifier, ClassifierSettings, MlpModel};
use crate::error::{Error, Result};
use crate::metrics::{chained_psnr_with, PsnrReport, STEP_FACTOR};
use crate::optim::{write_trace_csv, ScgOutcome};
use crate::raster::{
    label_regions, load_scene, read_class_map, read_regions, write_class_map, ClassMap,
    FeatureMode, MultispectralScene, Region,
};
use crate::rng::derive_seed;
use crate::srcnn::{make_training_pairs, train_srcnn, train_srcnn_scg, SrPairSet, SrcnnModel};
use crate::upscale::{Bicubic, Bilinear, SrcnnBank, UpscaleMethod, Upscaler};

pub const FAILURE_MARKER: &str = "FAILED";

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMapEntry {
    pub method: UpscaleMethod,
    pub step: usize,
    pub path: PathBuf,
}

/// Block-level scores of one class map against the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub method: UpscaleMethod,
    pub step: usize,
    pub accuracy: f64,
    /// Per class, `None` when the class is absent from the truth.
    pub recall: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub class_maps: Vec<ClassMapEntry>,
    pub psnr: PsnrReport,
    pub psnr_csv: PathBuf,
    pub accuracy: Vec<AccuracyRow>,
    pub accuracy_csv: Option<PathBuf>,
    pub classifier_model: PathBuf,
    pub classifier_trace: PathBuf,
    pub srcnn_models: Vec<PathBuf>,
    pub srcnn_traces: Vec<PathBuf>,
    pub plot: PathBuf,
    pub run_meta: PathBuf,
}

impl ExperimentResult {
    pub fn accuracy_row(&self, method: UpscaleMethod, step: usize) -> Option<&AccuracyRow> {
        self.accuracy
            .iter()
            .find(|r| r.method == method && r.step == step)
    }

    /// Every file the run reported.
    pub fn files(&self) -> Vec<&Path> {
        let mut files: Vec<&Path> = self.class_maps.iter().map(|e| e.path.as_path()).collect();
        files.extend([
            self.psnr_csv.as_path(),
            self.classifier_model.as_path(),
            self.classifier_trace.as_path(),
            self.plot.as_path(),
            self.run_meta.as_path(),
        ]);
        files.extend(self.accuracy_csv.as_deref());
        files.extend(self.srcnn_models.iter().map(PathBuf::as_path));
        files.extend(self.srcnn_traces.iter().map(PathBuf::as_path));
        files
    }
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Trains the classifier on the labeled rectangles of `scene`.
pub fn train_scene_classifier(
    scene: &MultispectralScene,
    regions: &[Region],
    class_names: &[String],
    settings: &ClassifierSettings,
) -> Result<(MlpModel, ScgOutcome)> {
    let data = label_regions(scene, regions, FeatureMode::Pooled2x2, class_names.to_vec())?;
    train_classifier(&data, settings)
}

/// Trains SRCNN models on pairs synthesized from the scene's own bands,
/// one per band or one shared. Returns the bank and one loss trace per model.
pub fn train_srcnn_bank(
    scene: &MultispectralScene,
    settings: &SrcnnSettings,
) -> Result<(SrcnnBank, Vec<Vec<f64>>)> {
    settings.validate()?;
    let pairs_for = |i: usize| {
        make_training_pairs(
            &scene.bands()[i],
            settings.factor,
            settings.patch_size,
            settings.stride,
            derive_seed(settings.seed, 100 + i as u64),
        )
    };
    let fit = |pairs: &SrPairSet, seed: u64| match settings.optimizer {
        SrOptimizer::Sgd => train_srcnn(pairs, &settings.geometry, &settings.sgd(), seed),
        SrOptimizer::Scg => train_srcnn_scg(pairs, &settings.geometry, &settings.scg(), seed),
    };
    if settings.shared {
        let sets = (0..scene.band_count())
            .map(pairs_for)
            .collect::<Result<Vec<_>>>()?;
        let pairs = SrPairSet::merge(sets, derive_seed(settings.seed, 99))?;
        let (model, trace) = fit(&pairs, settings.seed)?;
        return Ok((SrcnnBank::shared(model), vec![trace]));
    }
    let mut models = Vec::with_capacity(scene.band_count());
    let mut traces = Vec::with_capacity(scene.band_count());
    for i in 0..scene.band_count() {
        let (model, trace) = fit(&pairs_for(i)?, derive_seed(settings.seed, 200 + i as u64))?;
        models.push(model);
        traces.push(trace);
    }
    Ok((SrcnnBank::per_band(models)?, traces))
}

fn bank_names(bank: &SrcnnBank, scene: &MultispectralScene) -> Vec<String> {
    if bank.is_shared() {
        vec![SHARED_MODEL_NAME.to_string()]
    } else {
        scene
            .bands()
            .iter()
            .map(|b| b.band_id().to_string())
            .collect()
    }
}

pub const SHARED_MODEL_NAME: &str = "shared";

/// File name of the SRCNN model for a band id, or for the shared model.
pub fn srcnn_model_file(name: &str) -> String {
    format!("srcnn_{name}.json")
}

/// Writes one model file per band (or a single shared one) into `dir`.
pub fn save_srcnn_bank(
    bank: &SrcnnBank,
    scene: &MultispectralScene,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let names = bank_names(bank, scene);
    let mut paths = Vec::with_capacity(names.len());
    for (name, model) in names.iter().zip(bank.models()) {
        let path = dir.join(srcnn_model_file(name));
        model.save(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Loads the models written by [`save_srcnn_bank`]: a shared model if
/// present, otherwise one model per listed band id.
pub fn load_srcnn_bank(dir: &Path, band_ids: &[&str]) -> Result<SrcnnBank> {
    let shared = dir.join(srcnn_model_file(SHARED_MODEL_NAME));
    if shared.is_file() {
        return Ok(SrcnnBank::shared(SrcnnModel::load(&shared)?));
    }
    let models = band_ids
        .iter()
        .map(|id| SrcnnModel::load(dir.join(srcnn_model_file(id))))
        .collect::<Result<Vec<_>>>()?;
    SrcnnBank::per_band(models)
}

fn accuracy_csv(rows: &[AccuracyRow], class_names: &[String]) -> String {
    let mut out = String::from("method,step,accuracy");
    for name in class_names {
        write!(out, ",recall_{name}").unwrap();
    }
    out.push('\n');
    for r in rows {
        write!(out, "{},{},{:.6}", r.method, r.step, r.accuracy).unwrap();
        for v in &r.recall {
            match v {
                Some(v) => write!(out, ",{v:.6}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn score(
    map: &ClassMap,
    truth: Option<&ClassMap>,
    method: UpscaleMethod,
    step: usize,
) -> Result<Option<AccuracyRow>> {
    let Some(truth) = truth else { return Ok(None) };
    let expected = block_truth(truth, STEP_FACTOR.pow(step as u32))?;
    if (expected.width(), expected.height()) != (map.width(), map.height()) {
        return Err(Error::DimensionMismatch(format!(
            "truth blocks are {}x{}, class map is {}x{}",
            expected.width(),
            expected.height(),
            map.width(),
            map.height()
        )));
    }
    let m = evaluate(map.labels(), expected.labels(), map.palette().len())?;
    Ok(Some(AccuracyRow {
        method,
        step,
        accuracy: m.accuracy(),
        recall: (0..m.classes()).map(|c| m.recall(c)).collect(),
    }))
}

#[derive(Serialize)]
struct RunMeta<'a> {
    classifier_seed: u64,
    srcnn_seed: u64,
    srcnn_shared: bool,
    steps: usize,
    methods: &'a [UpscaleMethod],
    classifier_iterations: usize,
    classifier_final_loss: f64,
    durations_s: Vec<(String, f64)>,
}

/// Runs the whole study. On failure a `FAILED` marker naming the stage is
/// left in the output directory next to any partial outputs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let out = &config.output_dir;
    create_dir(out)?;
    let marker = out.join(FAILURE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }
    let result = run_stages(config);
    if let Err(e) = &result {
        write_file(&marker, &format!("{e}\n"))?;
    }
    result
}

fn run_stages(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let out = &config.output_dir;
    let (maps_dir, reports_dir, plots_dir, models_dir) = (
        out.join("maps"),
        out.join("reports"),
        out.join("plots"),
        out.join("models"),
    );
    for d in [&maps_dir, &reports_dir, &plots_dir, &models_dir] {
        create_dir(d)?;
    }
    let mut durations: Vec<(String, f64)> = Vec::new();
    let mut timed = |name: &str, start: Instant| {
        durations.push((name.to_string(), start.elapsed().as_secs_f64()))
    };

    let t = Instant::now();
    let (scene, regions, truth) = stage("load", || {
        let scene = load_scene(&config.scene)?;
        let regions = read_regions(&config.regions, &config.class_names)?;
        let truth = config
            .truth
            .as_ref()
            .map(|p| read_class_map(p, config.palette.clone()))
            .transpose()?;
        if let Some(truth) = &truth {
            if (truth.width(), truth.height()) != (scene.width(), scene.height()) {
                return Err(Error::DimensionMismatch(format!(
                    "truth map is {}x{}, scene is {}x{}",
                    truth.width(),
                    truth.height(),
                    scene.width(),
                    scene.height()
                )));
            }
        }
        Ok((scene, regions, truth))
    })?;
    timed("load", t);

    let t = Instant::now();
    let classifier_model = models_dir.join("classifier.json");
    let classifier_trace = reports_dir.join("classifier_loss.csv");
    let (classifier, outcome) = stage("classifier", || {
        let (model, outcome) =
            train_scene_classifier(&scene, &regions, &config.class_names, &config.classifier)?;
        model.save(&classifier_model)?;
        write_trace_csv(&classifier_trace, &outcome.trace)?;
        Ok((model, outcome))
    })?;
    timed("classifier", t);

    let mut srcnn_models = Vec::new();
    let mut srcnn_traces = Vec::new();
    let bank = if config.methods.contains(&UpscaleMethod::Srcnn) {
        let t = Instant::now();
        let bank = stage("srcnn", || {
            let (bank, traces) = train_srcnn_bank(&scene, &config.srcnn)?;
            srcnn_models = save_srcnn_bank(&bank, &scene, &models_dir)?;
            for (name, trace) in bank_names(&bank, &scene).iter().zip(&traces) {
                let trace_path = reports_dir.join(format!("srcnn_loss_{name}.csv"));
                write_trace_csv(&trace_path, trace)?;
                srcnn_traces.push(trace_path);
            }
            Ok(bank)
        })?;
        timed("srcnn_training", t);
        Some(bank)
    } else {
        None
    };

    let t = Instant::now();
    let step0 = stage("classify", || classify_scene(&classifier, &scene))?;
    let mut class_maps = Vec::new();
    let mut accuracy = Vec::new();
    let mut psnr = PsnrReport::new();
    timed("classify_step0", t);
    for &method in &config.methods {
        let t = Instant::now();
        let upscaler: &dyn Upscaler = match method {
            UpscaleMethod::Bilinear => &Bilinear,
            UpscaleMethod::Bicubic => &Bicubic,
            UpscaleMethod::Srcnn => bank.as_ref().expect("trained above"),
        };
        let mut emit = |step: usize, map: &ClassMap| -> Result<()> {
            let path = maps_dir.join(format!("{method}_step{step}.pgm"));
            write_class_map(map, &path)?;
            class_maps.push(ClassMapEntry { method, step, path });
            accuracy.extend(score(map, truth.as_ref(), method, step)?);
            Ok(())
        };
        stage("classify", || emit(0, &step0))?;
        let report = stage("upscale", || {
            chained_psnr_with(&scene, upscaler, config.steps, |step, upscaled| {
                let map = classify_scene(&classifier, upscaled)?;
                emit(step, &map)
            })
        })?;
        psnr.extend(report)?;
        timed(method.name(), t);
    }

    let psnr_csv = reports_dir.join("psnr.csv");
    let plot = plots_dir.join("psnr.svg");
    let accuracy_csv_path = reports_dir.join("accuracy.csv");
    stage("report", || {
        psnr.write_csv(&psnr_csv)?;
        render_psnr_plot(&psnr, &plot)?;
        if truth.is_some() {
            write_file(
                &accuracy_csv_path,
                &accuracy_csv(&accuracy, &config.class_names),
            )?;
        }
        Ok(())
    })?;

    let run_meta = out.join("run.meta");
    let meta = RunMeta {
        classifier_seed: config.classifier.seed,
        srcnn_seed: config.srcnn.seed,
        srcnn_shared: config.srcnn.shared,
        steps: config.steps,
        methods: &config.methods,
        classifier_iterations: outcome.iterations,
        classifier_final_loss: outcome.trace.last().copied().unwrap_or(f64::NAN),
        durations_s: durations,
    };
    write_file(
        &run_meta,
        &serde_json::to_string_pretty(&meta).expect("metadata serializes"),
    )?;

    Ok(ExperimentResult {
        class_maps,
        psnr,
        psnr_csv,
        accuracy,
        accuracy_csv: truth.is_some().then_some(accuracy_csv_path),
        classifier_model,
        classifier_trace,
        srcnn_models,
        srcnn_traces,
        plot,
        run_meta,
    })
}
