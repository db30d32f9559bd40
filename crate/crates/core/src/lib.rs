//! Desk-scale differentiable 3D Gaussian splatting with frequency-aware
//! densification.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod camera;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod image;
pub mod lfcf;
pub mod math;
pub mod metrics;
pub mod raster;
pub mod scalar;
pub mod scene;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Gaussian32 = gaussian::Gaussian<f32>;
pub type Gaussian64 = gaussian::Gaussian<f64>;
pub type Cloud32 = gaussian::GaussianCloud<f32>;
pub type Cloud64 = gaussian::GaussianCloud<f64>;
pub type Camera32 = camera::Camera<f32>;
pub type Camera64 = camera::Camera<f64>;
pub type Image32 = image::Image<f32>;
pub type Image64 = image::Image<f64>;
