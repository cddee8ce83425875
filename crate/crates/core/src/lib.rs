//! Multispectral super-resolution and land-cover classification.

pub mod classifier;
pub mod error;
pub mod interp;
pub mod metrics;
pub mod nnet;
pub mod optim;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod srcnn;
pub mod upscale;

pub use error::{Error, Result};
