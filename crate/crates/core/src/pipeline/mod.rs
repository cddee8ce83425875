pub mod config;
pub mod evaluate;
pub mod experiment;
pub mod plot;
pub mod synthetic;

pub use config::{ExperimentConfig, SrOptimizer, SrcnnSettings};
pub use evaluate::{crop_scores_csv, evaluate_sr, mean_crop_psnr, CropScore};
pub use experiment::{
    load_srcnn_bank, run_experiment, save_srcnn_bank, train_scene_classifier, train_srcnn_bank,
    AccuracyRow, ExperimentResult,
};
pub use plot::{render_psnr_plot, render_psnr_svg};
pub use synthetic::{block_truth, make_synthetic_scene, SyntheticLayout, SyntheticScene};
