//! Shared fixtures for the kernel benchmarks.

use landsr_core::pipeline::{make_synthetic_scene, SyntheticLayout};
use landsr_core::raster::{BandRaster, MultispectralScene};

/// The standard synthetic scene at the given size.
pub fn scene(width: usize, height: usize, seed: u64) -> MultispectralScene {
    let layout = SyntheticLayout::standard(width, height, seed).expect("valid layout");
    make_synthetic_scene(&layout, 0.01, seed)
        .expect("valid noise")
        .scene
}

/// First band of [`scene`].
pub fn band(width: usize, height: usize, seed: u64) -> BandRaster {
    scene(width, height, seed).bands()[0].clone()
}
