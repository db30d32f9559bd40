use crate::camera::{Camera, SamplingProfile};
use crate::error::{Error, Result};
use crate::gaussian::{build_covariance, Gaussian, GaussianCloud};
use crate::math::Mat3;
use crate::scalar::Real;

/// Default filter strength `κ`.
pub const DEFAULT_LOWPASS_KAPPA: f64 = 0.2;

/// Fixed 3D low-pass filter: each Gaussian's covariance is widened by
/// `(κ / ν̂)² · I` at render time, `ν̂` being its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LowpassFilter<T> {
    pub kappa: T,
    /// Added isotropic variance per Gaussian (zero when unobserved).
    pub variance: Vec<T>,
    /// Gaussians that no camera observes; their covariance is left alone.
    pub unobserved: Vec<bool>,
}

impl<T: Real> LowpassFilter<T> {
    /// Builds the filter from the current sampling rates of `cloud`.
    pub fn from_cameras(cloud: &GaussianCloud<T>, cams: &[Camera<T>], kappa: T) -> Result<Self> {
        let profile = SamplingProfile::compute(cloud, cams)?;
        apply_lowpass_baseline(cloud, &profile.rate, kappa)
    }

    /// Effective covariance of Gaussian `i` under the filter.
    pub fn effective_covariance(&self, g: &Gaussian<T>, i: usize) -> Result<Mat3<T>> {
        let mut cov = build_covariance(g)?;
        let v = self.variance.get(i).copied().unwrap_or(T::zero());
        for k in 0..3 {
            cov.m[k][k] += v;
        }
        Ok(cov)
    }

    pub fn unobserved_count(&self) -> usize {
        self.unobserved.iter().filter(|u| **u).count()
    }
}

/// Computes the per-Gaussian regularization `(κ / ν̂)²` for the given
/// sampling rates. Parameters of `cloud` are not modified; pass the result
/// to the renderer through [`RenderOptions::with_lowpass`](super::RenderOptions::with_lowpass).
pub fn apply_lowpass_baseline<T: Real>(cloud: &GaussianCloud<T>, rates: &[T], kappa: T) -> Result<LowpassFilter<T>> {
    if rates.len() != cloud.len() {
        return Err(Error::param(format!(
            "{} sampling rates for {} Gaussians",
            rates.len(),
            cloud.len()
        )));
    }
    if !(kappa >= T::zero()) || !kappa.is_finite() {
        return Err(Error::param(format!("low-pass kappa must be finite and non-negative, got {kappa}")));
    }
    let mut variance = Vec::with_capacity(rates.len());
    let mut unobserved = Vec::with_capacity(rates.len());
    for &nu in rates {
        if nu > T::zero() {
            let s = kappa / nu;
            variance.push(s * s);
            unobserved.push(false);
        } else {
            variance.push(T::zero());
            unobserved.push(true);
        }
    }
    Ok(LowpassFilter {
        kappa,
        variance,
        unobserved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    fn cloud() -> GaussianCloud<f64> {
        let g = Gaussian::new(Vec3::zero(), Vec3::splat(0.01), 0.5, Vec3::splat(0.5));
        GaussianCloud::from_gaussians(vec![g], 0)
    }

    #[test]
    fn known_widening() {
        let f = apply_lowpass_baseline(&cloud(), &[10.0], 0.2).unwrap();
        let cov = f.effective_covariance(&cloud().gaussians[0], 0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0005 } else { 0.0 };
                assert!((cov.m[i][j] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn infinite_rate_is_identity() {
        let f = apply_lowpass_baseline(&cloud(), &[f64::INFINITY], 0.2).unwrap();
        assert_eq!(f.variance[0], 0.0);
        assert!(!f.unobserved[0]);
    }

    #[test]
    fn unobserved_is_flagged_and_untouched() {
        let f = apply_lowpass_baseline(&cloud(), &[0.0], 0.2).unwrap();
        assert_eq!(f.variance[0], 0.0);
        assert_eq!(f.unobserved_count(), 1);
    }

    #[test]
    fn rate_count_must_match() {
        assert!(apply_lowpass_baseline(&cloud(), &[1.0, 2.0], 0.2).is_err());
    }
}
