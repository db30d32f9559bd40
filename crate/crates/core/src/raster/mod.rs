//! Differentiable tile-based splatting.
//!
//! Each Gaussian is projected with a first-order (EWA) approximation,
//! binned into 8x8 pixel tiles in global depth order, and alpha-blended
//! front to back at pixel centers. [`render_backward`] differentiates the
//! same compositing expression analytically.

mod backward;
mod forward;
mod lowpass;
mod project;

pub use backward::{render_backward, render_backward_with_state, BackwardOutput};
pub use forward::{rasterize, render, RasterState, RenderedImage};
pub use lowpass::{apply_lowpass_baseline, LowpassFilter, DEFAULT_LOWPASS_KAPPA};
pub use project::{project_gaussian, project_gaussian_with, ProjectedGaussian};

use crate::camera::DEFAULT_GUARD_BAND;
use crate::math::Vec3;
use crate::scalar::Real;

pub const TILE_SIZE: u32 = 8;
/// Screen-space isotropic dilation added to every projected covariance, in pixels².
pub const COV2D_DILATION: f64 = 0.3;
/// Compositing stops once transmittance falls below this value.
pub const TRANSMITTANCE_EPS: f64 = 1e-4;
/// Default footprint cutoff in standard deviations.
pub const DEFAULT_CUTOFF_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy)]
pub struct RenderOptions<'a, T> {
    pub background: Vec3<T>,
    /// Render-time covariance regularization; parameters are untouched.
    pub lowpass: Option<&'a LowpassFilter<T>>,
    /// A Gaussian contributes to a pixel only within this many standard
    /// deviations (Mahalanobis distance). `+∞` disables truncation.
    pub cutoff_sigmas: T,
    /// Fraction of the image size by which the culling rectangle is grown.
    pub guard_band: T,
}

impl<T: Real> RenderOptions<'_, T> {
    pub fn new(background: Vec3<T>) -> Self {
        Self {
            background,
            lowpass: None,
            cutoff_sigmas: T::lit(DEFAULT_CUTOFF_SIGMAS),
            guard_band: T::lit(DEFAULT_GUARD_BAND),
        }
    }
}

impl<'a, T: Real> RenderOptions<'a, T> {
    pub fn with_lowpass(mut self, filter: Option<&'a LowpassFilter<T>>) -> Self {
        self.lowpass = filter;
        self
    }

    pub fn with_cutoff(mut self, sigmas: T) -> Self {
        self.cutoff_sigmas = sigmas;
        self
    }
}
