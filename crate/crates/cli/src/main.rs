use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use landsr_core::classifier::ClassifierSettings;
use landsr_core::classifier::{classify_scene, evaluate, MlpModel};
use landsr_core::metrics::{chained_psnr, PsnrReport};
use landsr_core::optim::write_trace_csv;
use landsr_core::pipeline::experiment::save_srcnn_bank;
use landsr_core::pipeline::{
    block_truth, crop_scores_csv, evaluate_sr, load_srcnn_bank, make_synthetic_scene,
    mean_crop_psnr, render_psnr_plot, run_experiment, train_scene_classifier, train_srcnn_bank,
    ExperimentConfig, SrcnnSettings, SyntheticLayout,
};
use landsr_core::raster::{
    default_class_names, format_regions, load_scene, read_class_map, read_regions, write_class_map,
    write_scene, MultispectralScene, DEFAULT_PALETTE,
};
use landsr_core::upscale::{upscale_scene, Bicubic, Bilinear, UpscaleMethod, Upscaler};

#[derive(Parser)]
#[command(
    name = "landsr",
    version,
    about = "Super-resolution and land-cover classification of multispectral scenes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the land-cover classifier on labeled rectangles.
    TrainClassifier(TrainClassifierArgs),
    /// Train SRCNN models on pairs synthesized from a scene.
    TrainSr(TrainSrArgs),
    /// Enlarge every band of a scene.
    Upscale(UpscaleArgs),
    /// Classify a scene with a trained classifier.
    Classify(ClassifyArgs),
    /// Chained PSNR of repeated 3x upscaling.
    Psnr(PsnrArgs),
    /// Run the full upscale-then-classify study.
    Experiment(ExperimentArgs),
    /// Score SRCNN and bicubic reconstructions of a degraded scene against it.
    EvaluateSr(EvaluateSrArgs),
    /// Generate a synthetic scene with truth map, training regions and config.
    Synthesize(SynthesizeArgs),
}

/// Settings shared by every subcommand that reads a config file.
#[derive(Args)]
struct Common {
    /// Experiment config (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces every seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainClassifierArgs {
    #[command(flatten)]
    common: Common,
    /// Scene manifest.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Training region file.
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Output model file (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Loss trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct TrainSrArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Directory receiving the model files.
    #[arg(long)]
    out: PathBuf,
    /// Train one model for all bands.
    #[arg(long)]
    shared: bool,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Bilinear,
    Bicubic,
    Srcnn,
}

impl From<MethodArg> for UpscaleMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bilinear => UpscaleMethod::Bilinear,
            MethodArg::Bicubic => UpscaleMethod::Bicubic,
            MethodArg::Srcnn => UpscaleMethod::Srcnn,
        }
    }
}

#[derive(Args)]
struct UpscaleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, default_value_t = 3)]
    factor: usize,
    /// SRCNN model directory (required for srcnn).
    #[arg(long)]
    models: Option<PathBuf>,
    /// Output directory for the enlarged scene.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Classifier model file.
    #[arg(long)]
    model: PathBuf,
    /// Output class map (PGM).
    #[arg(long)]
    out: PathBuf,
    /// Pixel-level truth map; prints block accuracy when given.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Upscaling factor of the scene relative to the truth map.
    #[arg(long, default_value_t = 1)]
    truth_factor: usize,
}

#[derive(Args)]
struct PsnrArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    models: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG plot.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateSrArgs {
    #[command(flatten)]
    common: Common,
    /// High-resolution ground-truth scene.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// SRCNN model directory.
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value_t = 3)]
    factor: usize,
    /// Side of the square crops.
    #[arg(long, default_value_t = 25)]
    crop: usize,
    /// Per-crop CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Standard,
    ThreeRegions,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    /// Standard deviation of the per-pixel Gaussian noise.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = LayoutArg::Standard)]
    layout: LayoutArg,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainClassifier(a) => train_classifier_cmd(a),
        Command::TrainSr(a) => train_sr_cmd(a),
        Command::Upscale(a) => upscale_cmd(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Psnr(a) => psnr_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::EvaluateSr(a) => evaluate_sr_cmd(a),
        Command::Synthesize(a) => synthesize_cmd(a),
    }
}

/// Values taken from an optional config file, with seed override applied.
struct Loaded {
    config: Option<ExperimentConfig>,
    seed: Option<u64>,
}

impl Loaded {
    fn new(common: &Common) -> Result<Self> {
        let config = common
            .config
            .as_ref()
            .map(|p| {
                ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))
            })
            .transpose()?;
        Ok(Self {
            config,
            seed: common.seed,
        })
    }

    fn scene_path(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        flag.or_else(|| self.config.as_ref().map(|c| c.scene.clone()))
            .context("no scene given: pass --scene or --config")
    }

    fn scene(&self, flag: Option<PathBuf>) -> Result<MultispectralScene> {
        let path = self.scene_path(flag)?;
        load_scene(&path).with_context(|| format!("loading scene {}", path.display()))
    }

    fn class_names(&self) -> Vec<String> {
        self.config
            .as_ref()
            .map_or_else(default_class_names, |c| c.class_names.clone())
    }

    fn palette(&self) -> Vec<u8> {
        self.config
            .as_ref()
            .map_or_else(|| DEFAULT_PALETTE.to_vec(), |c| c.palette.clone())
    }

    fn classifier(&self) -> ClassifierSettings {
        let mut s = self
            .config
            .as_ref()
            .map(|c| c.classifier.clone())
            .unwrap_or_default();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }

    fn srcnn(&self) -> SrcnnSettings {
        let mut s = self
            .config
            .as_ref()
            .map(|c| c.srcnn.clone())
            .unwrap_or_default();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }

    fn steps(&self, flag: Option<usize>) -> usize {
        flag.or_else(|| self.config.as_ref().map(|c| c.steps))
            .unwrap_or(3)
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn train_classifier_cmd(a: TrainClassifierArgs) -> Result<()> {
    let loaded = Loaded::new(&a.common)?;
    let scene = loaded.scene(a.scene)?;
    let class_names = loaded.class_names();
    let regions_path = a
        .regions
        .or_else(|| loaded.config.as_ref().map(|c| c.regions.clone()))
        .context("no regions given: pass --regions or --config")?;
    let regions = read_regions(&regions_path, &class_names)?;
    let mut settings = loaded.classifier();
    if let Some(n) = a.max_iter {
        settings.max_iter = n;
    }
    let (model, outcome) = train_scene_classifier(&scene, &regions, &class_names, &settings)?;
    create_parent(&a.out)?;
    model.save(&a.out)?;
    if let Some(trace) = &a.trace {
        create_parent(trace)?;
        write_trace_csv(trace, &outcome.trace)?;
    }
    println!(
        "trained classifier: {} iterations, final loss {:.6e}, converged {}",
        outcome.iterations,
        outcome.trace.last().copied().unwrap_or(f64::NAN),
        outcome.converged
    );
    Ok(())
}

fn train_sr_cmd(a: TrainSrArgs) -> Result<()> {
    let loaded = Loaded::new(&a.common)?;
    let scene = loaded.scene(a.scene)?;
    let mut settings = loaded.srcnn();
    settings.shared |= a.shared;
    if let Some(e) = a.epochs {
        settings.epochs = e;
    }
    let (bank, traces) = train_srcnn_bank(&scene, &settings)?;
    let paths = save_srcnn_bank(&bank, &scene, &a.out)?;
    for (path, trace) in paths.iter().zip(&traces) {
        write_trace_csv(path.with_extension("loss.csv"), trace)?;
        println!(
            "{}: loss {:.6e} -> {:.6e}",
            path.display(),
            trace.first().copied().unwrap_or(f64::NAN),
            trace.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn upscaler_for(
    method: UpscaleMethod,
    models: Option<&Path>,
    scene: &MultispectralScene,
) -> Result<Box<dyn Upscaler>> {
    Ok(match method {
        UpscaleMethod::Bilinear => Box::new(Bilinear),
        UpscaleMethod::Bicubic => Box::new(Bicubic),
        UpscaleMethod::Srcnn => {
            let dir = models.context("--models is required for srcnn")?;
            let ids: Vec<&str> = scene.bands().iter().map(|b| b.band_id()).collect();
            Box::new(
                load_srcnn_bank(dir, &ids)
                    .with_context(|| format!("loading models from {}", dir.display()))?,
            )
        }
    })
}

fn upscale_cmd(a: UpscaleArgs) -> Result<()> {
    let loaded = Loaded::new(&a.common)?;
    let scene = loaded.scene(a.scene)?;
    let upscaler = upscaler_for(a.method.into(), a.models.as_deref(), &scene)?;
    let out = upscale_scene(&scene, upscaler.as_ref(), a.factor)?;
    let manifest = write_scene(&out, &a.out)?;
    println!(
        "wrote {}x{} scene to {}",
        out.width(),
        out.height(),
        manifest.display()
    );
    Ok(())
}

fn classify_cmd(a: ClassifyArgs) -> Result<()> {
    let loaded = Loaded::new(&a.common)?;
    let scene = loaded.scene(a.scene)?;
    let model =
        MlpModel::load(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let map = classify_scene(&model, &scene)?;
    create_parent(&a.out)?;
    write_class_map(&map, &a.out)?;
    println!(
        "wrote {}x{} class map to {}",
        map.width(),
        map.height(),
        a.out.display()
    );
    if let Some(truth_path) = &a.truth {
        let truth = read_class_map(truth_path, loaded.palette())?;
        let expected = block_truth(&truth, a.truth_factor)?;
        if (expected.width(), expected.height()) != (map.width(), map.height()) {
            bail!(
                "truth blocks are {}x{} but the class map is {}x{}; check --truth-factor",
                expected.width(),
                expected.height(),
                map.width(),
                map.height()
            );
        }
        let m = evaluate(map.labels(), expected.labels(), model.num_classes())?;
        println!("accuracy {:.6}", m.accuracy());
        for (c, name) in model.class_names().iter().enumerate() {
            match m.recall(c) {
                Some(r) => println!("recall {name} {r:.6}"),
                None => println!("recall {name} n/a"),
            }
        }
    }
    Ok(())
}

fn psnr_cmd(a: PsnrArgs) -> Result<()> {
    let loaded = Loaded::new(&a.common)?;
    let scene = loaded.scene(a.scene)?;
    let upscaler = upscaler_for(a.method.into(), a.models.as_deref(), &scene)?;
    let report: PsnrReport = chained_psnr(&scene, upscaler.as_ref(), loaded.steps(a.steps))?;
    create_parent(&a.out)?;
    report.write_csv(&a.out)?;
    if let Some(plot) = &a.plot {
        create_parent(plot)?;
        render_psnr_plot(&report, plot)?;
    }
    print!("{}", report.to_csv());
    Ok(())
}

fn experiment_cmd(a: ExperimentArgs) -> Result<()> {
    let path = a
        .common
        .config
        .as_ref()
        .context("experiment requires --config")?;
    let mut config = ExperimentConfig::load(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    if let Some(seed) = a.common.seed {
        config.override_seed(seed);
    }
    if let Some(dir) = a.output_dir {
        config.output_dir = dir;
    }
    let result = run_experiment(&config)?;
    println!(
        "wrote {} class maps, PSNR report {}",
        result.class_maps.len(),
        result.psnr_csv.display()
    );
    for row in &result.accuracy {
        println!(
            "{} step {}: accuracy {:.4}",
            row.method, row.step, row.accuracy
        );
    }
    Ok(())
}

fn evaluate_sr_cmd(a: EvaluateSrArgs) -> Result<()> {
    let loaded = Loaded::new(&a.common)?;
    let scene = loaded.scene(a.scene)?;
    let srcnn = upscaler_for(UpscaleMethod::Srcnn, Some(&a.models), &scene)?;
    let scores = evaluate_sr(&scene, &[&Bicubic, srcnn.as_ref()], a.factor, a.crop)?;
    if let Some(out) = &a.out {
        create_parent(out)?;
        fs::write(out, crop_scores_csv(&scores))
            .with_context(|| format!("writing {}", out.display()))?;
    }
    for method in [UpscaleMethod::Bicubic, UpscaleMethod::Srcnn] {
        let (mean, n) = mean_crop_psnr(&scores, method);
        println!("{method} mean_psnr_db {mean:.6} crops {n}");
    }
    Ok(())
}

fn synthesize_cmd(a: SynthesizeArgs) -> Result<()> {
    let layout = match a.layout {
        LayoutArg::Standard => SyntheticLayout::standard(a.width, a.height, a.seed)?,
        LayoutArg::ThreeRegions => SyntheticLayout::three_regions(a.width, a.height)?,
    };
    let synth = make_synthetic_scene(&layout, a.noise, a.seed)?;
    let manifest = write_scene(&synth.scene, &a.out)?;
    write_class_map(&synth.truth, a.out.join("truth.pgm"))?;
    let regions = a.out.join("regions.toml");
    fs::write(
        &regions,
        format_regions(&synth.training_regions, &layout.class_names),
    )
    .with_context(|| format!("writing {}", regions.display()))?;
    let config = a.out.join("config.toml");
    let text =
        format!(
        "scene = {:?}\nregions = \"regions.toml\"\ntruth = \"truth.pgm\"\noutput_dir = \"out\"\n",
        manifest.file_name().and_then(|n| n.to_str()).unwrap_or("scene.toml")
    );
    fs::write(&config, text).with_context(|| format!("writing {}", config.display()))?;
    println!("wrote synthetic scene to {}", a.out.display());
    Ok(())
}
