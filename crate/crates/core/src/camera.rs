//! Pinhole cameras, per-Gaussian sampling rates and the over/under-optimized
//! classification that the densification strategies build on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, GaussianCloud};
use crate::math::{Mat3, Vec3};
use crate::scalar::Real;

/// Fraction of the image size by which the visibility rectangle is grown.
pub const DEFAULT_GUARD_BAND: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Camera<T> {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    /// World-to-camera rotation.
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
    pub near: T,
    pub far: T,
}

/// Outcome of projecting a world point through a camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection<T> {
    InFront { u: T, v: T, depth: T },
    /// The point is at or behind the image plane (`depth <= 0`).
    Behind { depth: T },
}

impl<T: Real> Camera<T> {
    /// Checks the camera invariants (orthonormal rotation, positive focal
    /// lengths, `0 < near < far`).
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::param(format!("camera `{}`: {m}", self.id)));
        if self.width == 0 || self.height == 0 {
            return err("zero-sized image".into());
        }
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return err(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy));
        }
        if !(self.near > T::zero() && self.near < self.far) {
            return err(format!("need 0 < near < far (near={}, far={})", self.near, self.far));
        }
        let rtr = self.rotation.transpose().matmul(&self.rotation);
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { T::one() } else { T::zero() };
                if (rtr.m[i][j] - e).abs() > tol {
                    return err("rotation is not orthonormal".into());
                }
            }
        }
        Ok(())
    }

    /// Camera looking from `eye` towards `target`, with +y of the image
    /// pointing along `-up` (OpenCV convention: x right, y down, z forward).
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        id: impl Into<String>,
        eye: Vec3<T>,
        target: Vec3<T>,
        up: Vec3<T>,
        width: u32,
        height: u32,
        fov_x: T,
        near: T,
        far: T,
    ) -> Self {
        let forward = (target - eye).normalized();
        let right = forward.cross(up).normalized();
        let down = forward.cross(right);
        let rotation = Mat3::from_rows([right.to_array(), down.to_array(), forward.to_array()]);
        let translation = -rotation.mul_vec(eye);
        let two = T::lit(2.0);
        let w = T::from_u32(width).unwrap();
        let h = T::from_u32(height).unwrap();
        let f = w / (two * (fov_x / two).tan());
        Self {
            id: id.into(),
            width,
            height,
            fx: f,
            fy: f,
            cx: w / two,
            cy: h / two,
            rotation,
            translation,
            near,
            far,
        }
    }

    /// World-space camera center `-Rᵀ t`.
    pub fn center(&self) -> Vec3<T> {
        -self.rotation.transpose().mul_vec(self.translation)
    }

    #[inline]
    pub fn to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    /// Larger of the two focal lengths.
    pub fn focal(&self) -> T {
        self.fx.max(self.fy)
    }

    pub fn project_point(&self, p: Vec3<T>) -> Projection<T> {
        let c = self.to_camera(p);
        if c.z <= T::zero() {
            return Projection::Behind { depth: c.z };
        }
        Projection::InFront {
            u: self.fx * c.x / c.z + self.cx,
            v: self.fy * c.y / c.z + self.cy,
            depth: c.z,
        }
    }

    /// Visibility indicator with the given guard band (fraction of the image size).
    pub fn is_visible_with(&self, p: Vec3<T>, guard: T) -> bool {
        match self.project_point(p) {
            Projection::Behind { .. } => false,
            Projection::InFront { u, v, depth } => {
                if depth < self.near || depth > self.far {
                    return false;
                }
                let w = T::from_u32(self.width).unwrap();
                let h = T::from_u32(self.height).unwrap();
                let gx = guard * w;
                let gy = guard * h;
                u >= -gx && u <= w + gx && v >= -gy && v <= h + gy
            }
        }
    }

    pub fn is_visible(&self, p: Vec3<T>) -> bool {
        self.is_visible_with(p, T::lit(DEFAULT_GUARD_BAND))
    }

    pub fn cast<U: Real>(&self) -> Camera<U> {
        Camera {
            id: self.id.clone(),
            width: self.width,
            height: self.height,
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            rotation: self.rotation.cast(),
            translation: self.translation.cast(),
            near: U::lit(self.near.as_f64()),
            far: U::lit(self.far.as_f64()),
        }
    }

    pub fn to_record(&self, image_path: Option<String>) -> CameraRecord {
        CameraRecord {
            id: self.id.clone(),
            width: self.width,
            height: self.height,
            fx: self.fx.as_f64(),
            fy: self.fy.as_f64(),
            cx: self.cx.as_f64(),
            cy: self.cy.as_f64(),
            rotation: self.rotation.to_row_vec().into_iter().map(Real::as_f64).collect(),
            translation: self.translation.to_array().iter().map(|v| v.as_f64()).collect(),
            near: self.near.as_f64(),
            far: self.far.as_f64(),
            image_path,
        }
    }

    pub fn from_record(r: &CameraRecord) -> Result<Self> {
        if r.rotation.len() != 9 {
            return Err(Error::format(format!("camera `{}`: rotation needs 9 values, got {}", r.id, r.rotation.len())));
        }
        if r.translation.len() != 3 {
            return Err(Error::format(format!(
                "camera `{}`: translation needs 3 values, got {}",
                r.id,
                r.translation.len()
            )));
        }
        let rot: Vec<T> = r.rotation.iter().map(|&v| T::lit(v)).collect();
        let cam = Self {
            id: r.id.clone(),
            width: r.width,
            height: r.height,
            fx: T::lit(r.fx),
            fy: T::lit(r.fy),
            cx: T::lit(r.cx),
            cy: T::lit(r.cy),
            rotation: Mat3::from_row_slice(&rot),
            translation: Vec3::new(T::lit(r.translation[0]), T::lit(r.translation[1]), T::lit(r.translation[2])),
            near: T::lit(r.near),
            far: T::lit(r.far),
        };
        cam.validate()?;
        Ok(cam)
    }
}

/// One entry of the camera-set JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Row-major world-to-camera rotation.
    pub rotation: Vec<f64>,
    pub translation: Vec<f64>,
    pub near: f64,
    pub far: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

pub fn load_cameras(path: &Path) -> Result<Vec<CameraRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_cameras(path: &Path, records: &[CameraRecord]) -> Result<()> {
    let text = serde_json::to_string_pretty(records)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Maximal sampling rate `ν = max_k 1_k(p) · f_k / d_k` (pixels per world
/// unit). Zero when no camera sees `p`.
pub fn sampling_rate<T: Real>(p: Vec3<T>, cams: &[Camera<T>]) -> Result<T> {
    if cams.is_empty() {
        return Err(Error::param("sampling rate needs at least one camera"));
    }
    Ok(sampling_rate_unchecked(p, cams, T::lit(DEFAULT_GUARD_BAND)))
}

fn sampling_rate_unchecked<T: Real>(p: Vec3<T>, cams: &[Camera<T>], guard: T) -> T {
    cams.iter()
        .filter(|c| c.is_visible_with(p, guard))
        .map(|c| c.focal() / c.to_camera(p).z)
        .fold(T::zero(), T::max)
}

/// Sampling interval `T = 1/ν`; `None` signals an unobserved Gaussian.
pub fn sampling_interval<T: Real>(rate: T) -> Option<T> {
    (rate > T::zero()).then(|| T::one() / rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizationClass {
    /// Largest scale exceeds the sampling interval.
    OverOptimized,
    UnderOptimized,
}

impl OptimizationClass {
    pub fn label(self) -> &'static str {
        match self {
            Self::OverOptimized => "over",
            Self::UnderOptimized => "under",
        }
    }
}

pub fn classify<T: Real>(g: &Gaussian<T>, interval: T) -> OptimizationClass {
    if g.scale().max_elem() > interval {
        OptimizationClass::OverOptimized
    } else {
        OptimizationClass::UnderOptimized
    }
}

/// Min-max normalizes sampling rates into `[0, 1]`. All-equal rates map to 0.5.
pub fn theta_factors<T: Real>(rates: &[T]) -> Vec<T> {
    let Some(&first) = rates.first() else {
        return Vec::new();
    };
    let (lo, hi) = rates.iter().fold((first, first), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let span = hi - lo;
    if !(span > T::zero()) {
        return vec![T::lit(0.5); rates.len()];
    }
    rates
        .iter()
        .map(|&r| ((r - lo) / span).max(T::zero()).min(T::one()))
        .collect()
}

/// Per-Gaussian rate, interval and interpolation factor for a cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingProfile<T> {
    pub rate: Vec<T>,
    /// `1/ν`, or `+∞` for unobserved Gaussians.
    pub interval: Vec<T>,
    pub theta: Vec<T>,
}

impl<T: Real> SamplingProfile<T> {
    pub fn compute(cloud: &GaussianCloud<T>, cams: &[Camera<T>]) -> Result<Self> {
        if cams.is_empty() {
            return Err(Error::param("sampling profile needs at least one camera"));
        }
        let guard = T::lit(DEFAULT_GUARD_BAND);
        let rate: Vec<T> = cloud
            .gaussians
            .iter()
            .map(|g| sampling_rate_unchecked(g.position, cams, guard))
            .collect();
        Ok(Self::from_rates(rate))
    }

    pub fn from_rates(rate: Vec<T>) -> Self {
        let interval = rate.iter().map(|&r| sampling_interval(r).unwrap_or(T::infinity())).collect();
        let theta = theta_factors(&rate);
        Self { rate, interval, theta }
    }

    pub fn len(&self) -> usize {
        self.rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rate.is_empty()
    }

    /// Classification per Gaussian; `None` where unobserved.
    pub fn classes(&self, cloud: &GaussianCloud<T>) -> Vec<Option<OptimizationClass>> {
        cloud
            .gaussians
            .iter()
            .zip(&self.interval)
            .map(|(g, &t)| t.is_finite().then(|| classify(g, t)))
            .collect()
    }
}
