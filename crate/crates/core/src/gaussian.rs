//! Anisotropic 3D Gaussian primitives and the cloud that holds them.

use crate::error::{Error, Result};
use crate::math::{Mat3, Quat, Vec3};
use crate::scalar::Real;

/// Zeroth-order real spherical harmonic constant.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;
/// First-order real spherical harmonic constant.
pub const SH_C1: f64 = 0.488_602_511_902_919_9;

/// Number of scalar parameters per Gaussian.
pub const PARAM_COUNT: usize = 23;

/// One splat. Scales live in the log domain and opacity as a logit so that
/// unconstrained optimizer steps keep them valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian<T> {
    pub position: Vec3<T>,
    /// Natural log of the per-axis standard deviation.
    pub log_scale: Vec3<T>,
    /// Rotation; normalized before use.
    pub rotation: Quat<T>,
    pub opacity_logit: T,
    /// DC spherical-harmonic coefficient per channel; base color is `0.5 + C0 * sh_dc`.
    pub sh_dc: Vec3<T>,
    /// Degree-1 coefficients, `sh_rest[k]` holding the RGB triple of basis `k`.
    /// Ignored when the owning cloud has SH degree 0.
    pub sh_rest: [Vec3<T>; 3],
}

impl<T: Real> Default for Gaussian<T> {
    fn default() -> Self {
        Self {
            position: Vec3::zero(),
            log_scale: Vec3::zero(),
            rotation: Quat::identity(),
            opacity_logit: T::zero(),
            sh_dc: Vec3::zero(),
            sh_rest: [Vec3::zero(); 3],
        }
    }
}

impl<T: Real> Gaussian<T> {
    pub fn new(position: Vec3<T>, scale: Vec3<T>, opacity: T, rgb: Vec3<T>) -> Self {
        let mut g = Self {
            position,
            log_scale: scale.map(|s| s.ln()),
            opacity_logit: opacity.logit(),
            ..Default::default()
        };
        g.set_base_rgb(rgb);
        g
    }

    #[inline]
    pub fn scale(&self) -> Vec3<T> {
        self.log_scale.map(|s| s.exp())
    }

    #[inline]
    pub fn opacity(&self) -> T {
        self.opacity_logit.sigmoid()
    }

    pub fn base_rgb(&self) -> Vec3<T> {
        let c0 = T::lit(SH_C0);
        self.sh_dc.map(|c| c * c0 + T::lit(0.5))
    }

    pub fn set_base_rgb(&mut self, rgb: Vec3<T>) {
        let c0 = T::lit(SH_C0);
        self.sh_dc = rgb.map(|c| (c - T::lit(0.5)) / c0);
    }

    /// Unit rotation matrix.
    pub fn rotation_matrix(&self) -> Result<Mat3<T>> {
        self.rotation
            .normalized()
            .map(Quat::unit_to_matrix)
            .ok_or_else(|| Error::param("zero-norm rotation quaternion"))
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.log_scale.is_finite()
            && self.rotation.is_finite()
            && self.opacity_logit.is_finite()
            && self.sh_dc.is_finite()
            && self.sh_rest.iter().all(|v| v.is_finite())
    }

    /// Flattened parameters in the order position, log_scale, rotation
    /// (w, x, y, z), opacity_logit, sh_dc, sh_rest.
    pub fn to_params(&self) -> [T; PARAM_COUNT] {
        let mut out = [T::zero(); PARAM_COUNT];
        let q = self.rotation.to_array();
        out[..3].copy_from_slice(&self.position.to_array());
        out[3..6].copy_from_slice(&self.log_scale.to_array());
        out[6..10].copy_from_slice(&q);
        out[10] = self.opacity_logit;
        out[11..14].copy_from_slice(&self.sh_dc.to_array());
        for k in 0..3 {
            out[14 + 3 * k..17 + 3 * k].copy_from_slice(&self.sh_rest[k].to_array());
        }
        out
    }

    /// Inverse of [`Gaussian::to_params`].
    pub fn from_params(p: &[T; PARAM_COUNT]) -> Self {
        let v = |i: usize| Vec3::new(p[i], p[i + 1], p[i + 2]);
        Self {
            position: v(0),
            log_scale: v(3),
            rotation: Quat::new(p[6], p[7], p[8], p[9]),
            opacity_logit: p[10],
            sh_dc: v(11),
            sh_rest: [v(14), v(17), v(20)],
        }
    }

    /// All-zero value, used as a gradient accumulator.
    pub fn zeros() -> Self {
        Self::from_params(&[T::zero(); PARAM_COUNT])
    }

    pub fn cast<U: Real>(&self) -> Gaussian<U> {
        Gaussian {
            position: self.position.cast(),
            log_scale: self.log_scale.cast(),
            rotation: self.rotation.cast(),
            opacity_logit: U::lit(self.opacity_logit.as_f64()),
            sh_dc: self.sh_dc.cast(),
            sh_rest: [self.sh_rest[0].cast(), self.sh_rest[1].cast(), self.sh_rest[2].cast()],
        }
    }
}

/// `Σ = R S Sᵀ Rᵀ` with `S = diag(exp(log_scale))`.
pub fn build_covariance<T: Real>(g: &Gaussian<T>) -> Result<Mat3<T>> {
    let r = g.rotation_matrix()?;
    let s = g.scale();
    Ok(covariance_from(&r, s))
}

pub(crate) fn covariance_from<T: Real>(r: &Mat3<T>, s: Vec3<T>) -> Mat3<T> {
    let m = r.matmul(&Mat3::diag(s));
    m.matmul(&m.transpose())
}

/// Normalized density `(2π)^{-3/2} |Σ|^{-1/2} exp(-½ (x−p)ᵀ Σ⁻¹ (x−p))`.
pub fn evaluate_density<T: Real>(g: &Gaussian<T>, x: Vec3<T>) -> Result<T> {
    let cov = build_covariance(g)?;
    let inv = cov
        .inverse()
        .ok_or_else(|| Error::param("covariance is singular"))?;
    let d = x - g.position;
    let norm = (T::lit(2.0) * T::lit(std::f64::consts::PI)).powf(T::lit(-1.5)) / cov.det().sqrt();
    Ok(norm * (T::lit(-0.5) * inv.quad_form(d)).exp())
}

/// Magnitude of the Fourier transform of a unit-mass Gaussian with
/// covariance `cov` at angular frequency `omega`: `exp(-ωᵀΣω / 2)`.
pub fn frequency_weight<T: Real>(cov: &Mat3<T>, omega: Vec3<T>) -> T {
    (T::lit(-0.5) * cov.quad_form(omega)).exp()
}

/// Multiplies the per-axis scales by `factor` (`s' = s · c`).
pub fn apply_scale_factor<T: Real>(g: &Gaussian<T>, factor: Vec3<T>) -> Result<Gaussian<T>> {
    for i in 0..3 {
        let c = factor[i];
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::param(format!("scale factor component {i} must be positive and finite, got {c}")));
        }
    }
    let mut out = *g;
    out.log_scale = g.log_scale + factor.map(|c| c.ln());
    Ok(out)
}

/// Dense array of Gaussians plus the index-aligned densification statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud<T> {
    pub gaussians: Vec<Gaussian<T>>,
    /// Accumulated screen-space positional gradient norm since the last reset.
    pub grad_accum: Vec<T>,
    /// Number of views that observed each Gaussian since the last reset.
    pub grad_count: Vec<u32>,
    /// Spherical harmonics degree (0 or 1).
    pub sh_degree: u8,
}

impl<T: Real> Default for GaussianCloud<T> {
    fn default() -> Self {
        Self::new(0)
    }
}

impl<T: Real> GaussianCloud<T> {
    pub fn new(sh_degree: u8) -> Self {
        Self {
            gaussians: Vec::new(),
            grad_accum: Vec::new(),
            grad_count: Vec::new(),
            sh_degree: sh_degree.min(1),
        }
    }

    pub fn from_gaussians(gaussians: Vec<Gaussian<T>>, sh_degree: u8) -> Self {
        let n = gaussians.len();
        Self {
            gaussians,
            grad_accum: vec![T::zero(); n],
            grad_count: vec![0; n],
            sh_degree: sh_degree.min(1),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn push(&mut self, g: Gaussian<T>) {
        self.gaussians.push(g);
        self.grad_accum.push(T::zero());
        self.grad_count.push(0);
    }

    /// Keeps the Gaussians for which `keep[i]` is true, preserving order.
    pub fn retain_mask(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.len());
        let mut i = 0;
        self.gaussians.retain(|_| {
            i += 1;
            keep[i - 1]
        });
        let mut i = 0;
        self.grad_accum.retain(|_| {
            i += 1;
            keep[i - 1]
        });
        let mut i = 0;
        self.grad_count.retain(|_| {
            i += 1;
            keep[i - 1]
        });
    }

    /// Mean over Gaussians of the average per-axis scale; zero when empty.
    pub fn mean_scale(&self) -> T {
        if self.is_empty() {
            return T::zero();
        }
        let third = T::lit(1.0 / 3.0);
        let sum: T = self
            .gaussians
            .iter()
            .map(|g| {
                let s = g.scale();
                (s.x + s.y + s.z) * third
            })
            .sum();
        sum / T::from_usize_lossy(self.len())
    }

    /// Averaged screen-space gradient per Gaussian (zero for unobserved ones).
    pub fn average_grads(&self) -> Vec<T> {
        self.grad_accum
            .iter()
            .zip(&self.grad_count)
            .map(|(&a, &n)| if n == 0 { T::zero() } else { a / T::from_u32(n).unwrap() })
            .collect()
    }

    pub fn reset_grad_stats(&mut self) {
        self.grad_accum.iter_mut().for_each(|v| *v = T::zero());
        self.grad_count.iter_mut().for_each(|v| *v = 0);
    }

    /// Index of the first Gaussian with a non-finite parameter.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.gaussians.iter().position(|g| !g.is_finite())
    }

    pub fn check_aligned(&self) -> Result<()> {
        let n = self.len();
        if self.grad_accum.len() != n || self.grad_count.len() != n {
            return Err(Error::param(format!(
                "auxiliary arrays misaligned: {} gaussians, {} accumulators, {} counters",
                n,
                self.grad_accum.len(),
                self.grad_count.len()
            )));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> GaussianCloud<U> {
        GaussianCloud {
            gaussians: self.gaussians.iter().map(Gaussian::cast).collect(),
            grad_accum: self.grad_accum.iter().map(|v| U::lit(v.as_f64())).collect(),
            grad_count: self.grad_count.clone(),
            sh_degree: self.sh_degree,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{LN_2, PI};

    fn mat_close(a: &Mat3<f64>, b: [[f64; 3]; 3], tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.m[i][j] - b[i][j]).abs() < tol, "({i},{j}) {} vs {}", a.m[i][j], b[i][j]);
            }
        }
    }

    fn with_scale(log_scale: [f64; 3], q: Quat<f64>) -> Gaussian<f64> {
        Gaussian {
            log_scale: Vec3::from_array(log_scale),
            rotation: q,
            ..Default::default()
        }
    }

    #[test]
    fn covariance_examples() {
        let g = with_scale([0.0; 3], Quat::identity());
        mat_close(&build_covariance(&g).unwrap(), [[1., 0., 0.], [0., 1., 0.], [0., 0., 1.]], 1e-15);

        let g = with_scale([LN_2, 0.0, 0.0], Quat::identity());
        mat_close(&build_covariance(&g).unwrap(), [[4., 0., 0.], [0., 1., 0.], [0., 0., 1.]], 1e-12);

        // 90° about z maps the x axis onto y.
        let q = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), PI / 2.0);
        let g = with_scale([LN_2, 0.0, 0.0], q);
        mat_close(&build_covariance(&g).unwrap(), [[1., 0., 0.], [0., 4., 0.], [0., 0., 1.]], 1e-12);

        // Unnormalized quaternions are normalized first.
        let g = with_scale([LN_2, 0.0, 0.0], Quat::new(3.0, 0.0, 0.0, 3.0));
        mat_close(&build_covariance(&g).unwrap(), [[1., 0., 0.], [0., 4., 0.], [0., 0., 1.]], 1e-12);
    }

    #[test]
    fn zero_quaternion_is_rejected() {
        let g = with_scale([0.0; 3], Quat::new(0.0, 0.0, 0.0, 0.0));
        assert!(matches!(build_covariance(&g), Err(Error::Parameter(_))));
    }

    #[test]
    fn density_examples() {
        let peak = (2.0 * PI).powf(-1.5);
        assert_relative_eq!(peak, 0.063_493_635_934_240_97, epsilon = 1e-15);

        let g = with_scale([0.0; 3], Quat::identity());
        assert_relative_eq!(evaluate_density(&g, Vec3::zero()).unwrap(), peak, max_relative = 1e-14);
        let x = Vec3::new(0.6, 0.0, 0.8);
        assert_relative_eq!(evaluate_density(&g, x).unwrap(), peak * (-0.5f64).exp(), max_relative = 1e-14);

        let g = with_scale([LN_2, 0.0, 0.0], Quat::identity());
        assert_relative_eq!(
            evaluate_density(&g, Vec3::new(2.0, 0.0, 0.0)).unwrap(),
            peak * 0.5 * (-0.5f64).exp(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn frequency_weight_examples() {
        let id = Mat3::<f64>::identity();
        assert_eq!(frequency_weight(&id, Vec3::zero()), 1.0);
        assert_relative_eq!(frequency_weight(&id, Vec3::new(1.0, 0.0, 0.0)), 0.606_530_659_712_633_4, epsilon = 1e-15);
        let wide = Mat3::diag(Vec3::new(4.0, 1.0, 1.0));
        assert_relative_eq!(frequency_weight(&wide, Vec3::new(1.0, 0.0, 0.0)), (-2.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!((-2.0f64).exp(), 0.135_335_283_236_612_7, epsilon = 1e-15);
    }

    #[test]
    fn scale_factor_examples() {
        let g = with_scale([0.1, -0.2, 0.3], Quat::new(0.9, 0.1, 0.2, 0.3));
        assert_eq!(apply_scale_factor(&g, Vec3::splat(1.0)).unwrap(), g);

        let unit = with_scale([0.0; 3], Quat::identity());
        let grown = apply_scale_factor(&unit, Vec3::splat(1.5)).unwrap();
        for i in 0..3 {
            assert_relative_eq!(grown.log_scale[i], 1.5f64.ln(), epsilon = 1e-15);
        }

        let c = Vec3::new(2.0, 1.0, 0.5);
        let before = build_covariance(&g).unwrap().det();
        let after = build_covariance(&apply_scale_factor(&g, c).unwrap()).unwrap().det();
        assert_relative_eq!(before, after, max_relative = 1e-12);

        assert!(apply_scale_factor(&g, Vec3::new(1.0, 0.0, 1.0)).is_err());
        assert!(apply_scale_factor(&g, Vec3::new(1.0, -2.0, 1.0)).is_err());
        assert!(apply_scale_factor(&g, Vec3::new(f64::NAN, 1.0, 1.0)).is_err());
    }

    #[test]
    fn cloud_retain_keeps_alignment() {
        let mut cloud = GaussianCloud::from_gaussians(vec![Gaussian::<f64>::default(); 4], 0);
        cloud.grad_accum = vec![1.0, 2.0, 3.0, 4.0];
        cloud.grad_count = vec![1, 2, 3, 4];
        cloud.retain_mask(&[true, false, true, false]);
        assert_eq!(cloud.grad_accum, vec![1.0, 3.0]);
        assert_eq!(cloud.grad_count, vec![1, 3]);
        cloud.check_aligned().unwrap();
        assert_eq!(cloud.average_grads(), vec![1.0, 1.0]);
    }

    fn arb_gaussian() -> impl Strategy<Value = Gaussian<f64>> {
        (
            prop::array::uniform3(-3.0f64..1.0),
            prop::array::uniform4(-1.0f64..1.0),
        )
            .prop_filter("non-degenerate quaternion", |(_, q)| q.iter().map(|v| v * v).sum::<f64>() > 1e-3)
            .prop_map(|(s, q)| with_scale(s, Quat::from_array(q)))
    }

    proptest! {
        #[test]
        fn covariance_is_positive_definite(g in arb_gaussian()) {
            let c = build_covariance(&g).unwrap();
            // Sylvester's criterion on leading principal minors, scale-normalized.
            let s = g.scale().max_elem().powi(2);
            let m = c.scale(1.0 / s);
            prop_assert!(m.m[0][0] > 0.0);
            prop_assert!(m.m[0][0] * m.m[1][1] - m.m[0][1] * m.m[1][0] > 0.0);
            prop_assert!(m.det() > 0.0);
            for i in 0..3 { for j in 0..3 { prop_assert!((c.m[i][j] - c.m[j][i]).abs() <= 1e-12 * s); } }
        }

        #[test]
        fn frequency_weight_decays_along_rays(
            g in arb_gaussian(),
            w in prop::array::uniform3(-5.0f64..5.0),
            t in 1.0f64..10.0,
        ) {
            let c = build_covariance(&g).unwrap();
            let w = Vec3::from_array(w);
            prop_assert!(frequency_weight(&c, w) >= frequency_weight(&c, w * t));
        }

        #[test]
        fn volume_preserving_factors_keep_determinant(
            g in arb_gaussian(),
            a in 0.2f64..5.0,
            b in 0.2f64..5.0,
        ) {
            let c = Vec3::new(a, b, 1.0 / (a * b));
            // det Σ = det(R S)²; the factor is better conditioned than Σ itself.
            let det_rs = |g: &Gaussian<f64>| g.rotation_matrix().unwrap().matmul(&Mat3::diag(g.scale())).det();
            let d0 = det_rs(&g);
            let d1 = det_rs(&apply_scale_factor(&g, c).unwrap());
            prop_assert!(((d1 * d1 - d0 * d0) / (d0 * d0)).abs() < 1e-10);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        // Midpoint rule over ±6σ of the longest axis.
        let cases = [
            with_scale([-1.0, -1.3, -0.8], Quat::new(0.8, 0.2, -0.3, 0.4)),
            with_scale([-0.5, -0.5, -1.2], Quat::new(0.1, 0.9, 0.2, -0.3)),
            with_scale([-1.5, -0.9, -1.1], Quat::identity()),
        ];
        for g in cases {
            let half = 6.0 * g.scale().max_elem();
            let n = 120;
            let h = 2.0 * half / n as f64;
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let x = Vec3::new(
                            -half + (i as f64 + 0.5) * h,
                            -half + (j as f64 + 0.5) * h,
                            -half + (k as f64 + 0.5) * h,
                        );
                        total += evaluate_density(&g, x).unwrap();
                    }
                }
            }
            total *= h * h * h;
            assert!((total - 1.0).abs() < 1e-3, "integral {total}");
        }
    }
}
