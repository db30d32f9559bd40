//! Scene data: synthetic generation, noise injection, and persistence.

mod manifest;
mod noise;
mod ply;
mod synthetic;

pub use manifest::{load_scene, save_scene, ManifestEntry, SceneManifest, MANIFEST_FILE};
pub use noise::{inject_noise, resample_init, NoiseTarget, POSITION_NOISE_FRACTION, RESAMPLE_JITTER_FRACTION, SCALE_NOISE_LOG};
pub use ply::{load_ply, read_ply, save_ply, write_ply};
pub use synthetic::{generate_synthetic_scene, initialize_cloud, SceneSpec};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Vec3;
use crate::scalar::Real;

/// A camera with its target image.
#[derive(Debug, Clone, PartialEq)]
pub struct View<T> {
    pub camera: Camera<T>,
    pub image: Image<T>,
}

/// Seed point for initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitPoint<T> {
    pub position: Vec3<T>,
    pub color: Vec3<T>,
}

/// Everything a training run consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle<T> {
    pub train: Vec<View<T>>,
    pub test: Vec<View<T>>,
    pub init_points: Vec<InitPoint<T>>,
    /// Bounding-box diagonal of the scene content, in world units.
    pub extent: T,
    pub background: Vec3<T>,
}

impl<T: Real> SceneBundle<T> {
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::param("scene has no training cameras"));
        }
        if !(self.extent > T::zero()) {
            return Err(Error::param(format!("scene extent must be positive, got {}", self.extent)));
        }
        for v in self.train.iter().chain(&self.test) {
            v.camera.validate()?;
            if v.image.width != v.camera.width || v.image.height != v.camera.height {
                return Err(Error::param(format!("image size does not match camera {}", v.camera.id)));
            }
        }
        let ids: std::collections::HashSet<&str> = self.train.iter().map(|v| v.camera.id.as_str()).collect();
        if let Some(dup) = self.test.iter().find(|v| ids.contains(v.camera.id.as_str())) {
            return Err(Error::param(format!("camera {} is in both train and test splits", dup.camera.id)));
        }
        Ok(())
    }

    pub fn train_cameras(&self) -> Vec<Camera<T>> {
        self.train.iter().map(|v| v.camera.clone()).collect()
    }

    /// Copy with only the training views at `indices`.
    pub fn with_train_subset(&self, indices: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.train = indices
            .iter()
            .map(|&i| {
                self.train
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::param(format!("train view {i} out of range")))
            })
            .collect::<Result<_>>()?;
        Ok(out)
    }

    pub fn cast<U: Real>(&self) -> SceneBundle<U> {
        let views = |v: &[View<T>]| {
            v.iter()
                .map(|v| View {
                    camera: v.camera.cast(),
                    image: v.image.cast(),
                })
                .collect()
        };
        SceneBundle {
            train: views(&self.train),
            test: views(&self.test),
            init_points: self
                .init_points
                .iter()
                .map(|p| InitPoint {
                    position: p.position.cast(),
                    color: p.color.cast(),
                })
                .collect(),
            extent: U::lit(self.extent.as_f64()),
            background: self.background.cast(),
        }
    }
}
