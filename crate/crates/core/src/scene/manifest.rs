use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::{load_cameras, save_cameras, Camera};
use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, GaussianCloud};
use crate::image::Image;
use crate::math::Vec3;
use crate::scalar::Real;

use super::ply::{load_ply, save_ply};
use super::{InitPoint, SceneBundle, View};

pub const MANIFEST_FILE: &str = "manifest.json";
const CAMERAS_FILE: &str = "cameras.json";
const INIT_FILE: &str = "init.ply";
const IMAGE_NOTE: &str = "images are 8-bit PNG; metrics are computed on their float conversion";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub camera_id: String,
    pub image_path: String,
}

/// On-disk scene description. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub extent: f64,
    pub train: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
    pub init_ply_path: String,
    #[serde(default = "default_cameras_path")]
    pub cameras_path: String,
    #[serde(default)]
    pub background: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn default_cameras_path() -> String {
    CAMERAS_FILE.into()
}

fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Writes manifest, camera file, PNG targets and the init point PLY into `dir`.
pub fn save_scene<T: Real>(scene: &SceneBundle<T>, dir: &Path) -> Result<SceneManifest> {
    std::fs::create_dir_all(dir.join("images")).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::new();
    let mut entries = |views: &[View<T>]| -> Result<Vec<ManifestEntry>> {
        views
            .iter()
            .map(|v| {
                let rel = format!("images/{}.png", v.camera.id);
                v.image.save_png(&dir.join(&rel))?;
                records.push(v.camera.to_record(Some(rel.clone())));
                Ok(ManifestEntry {
                    camera_id: v.camera.id.clone(),
                    image_path: rel,
                })
            })
            .collect()
    };
    let train = entries(&scene.train)?;
    let test = entries(&scene.test)?;
    save_cameras(&dir.join(CAMERAS_FILE), &records)?;

    // Init points are stored as unit-scale, zero-opacity splats carrying position and color.
    let points = GaussianCloud::from_gaussians(
        scene
            .init_points
            .iter()
            .map(|p| {
                let mut g = Gaussian::<T>::default();
                g.position = p.position;
                g.set_base_rgb(p.color);
                g
            })
            .collect(),
        0,
    );
    save_ply(&points, &dir.join(INIT_FILE))?;

    let manifest = SceneManifest {
        extent: scene.extent.as_f64(),
        train,
        test,
        init_ply_path: INIT_FILE.into(),
        cameras_path: CAMERAS_FILE.into(),
        background: scene.background.to_array().map(Real::as_f64),
        note: Some(IMAGE_NOTE.into()),
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Loads a scene from a manifest file or the directory holding one.
pub fn load_scene<T: Real>(path: &Path) -> Result<SceneBundle<T>> {
    let mpath = manifest_path(path);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: SceneManifest = serde_json::from_str(&text)?;
    let root = mpath.parent().unwrap_or(Path::new("."));

    let cams: HashMap<String, Camera<T>> = load_cameras(&root.join(&manifest.cameras_path))?
        .iter()
        .map(|r| Camera::from_record(r).map(|c| (r.id.clone(), c)))
        .collect::<Result<_>>()?;
    let views = |entries: &[ManifestEntry]| -> Result<Vec<View<T>>> {
        entries
            .iter()
            .map(|e| {
                let camera = cams
                    .get(&e.camera_id)
                    .cloned()
                    .ok_or_else(|| Error::format(format!("manifest names unknown camera `{}`", e.camera_id)))?;
                let image = Image::load_png(&root.join(&e.image_path))?;
                Ok(View { camera, image })
            })
            .collect()
    };
    let points: GaussianCloud<T> = load_ply(&root.join(&manifest.init_ply_path))?;
    let scene = SceneBundle {
        train: views(&manifest.train)?,
        test: views(&manifest.test)?,
        init_points: points
            .gaussians
            .iter()
            .map(|g| InitPoint {
                position: g.position,
                color: g.base_rgb(),
            })
            .collect(),
        extent: T::lit(manifest.extent),
        background: Vec3::from_array(manifest.background).cast(),
    };
    scene.validate()?;
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_synthetic_scene, SceneSpec};

    #[test]
    fn save_then_load() {
        let spec = SceneSpec {
            objects: 2,
            gaussians_per_object: 40,
            distant_gaussians: 10,
            resolution: 32,
            n_train: 3,
            n_test: 1,
            ..Default::default()
        };
        let (scene, _) = generate_synthetic_scene::<f32>(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = save_scene(&scene, dir.path()).unwrap();
        assert_eq!(m.train.len(), 3);
        let back: SceneBundle<f32> = load_scene(dir.path()).unwrap();
        assert_eq!(back.train.len(), 3);
        assert_eq!(back.test.len(), 1);
        assert_eq!(back.init_points.len(), scene.init_points.len());
        assert_eq!(back.extent, scene.extent);
        for (a, b) in scene.train.iter().zip(&back.train) {
            assert_eq!(a.camera.id, b.camera.id);
            let diff = a.image.pixels.iter().flatten().zip(b.image.pixels.iter().flatten());
            assert!(diff.into_iter().all(|(x, y)| (x - y).abs() <= 0.5 / 255.0 + 1e-6));
        }
        for (a, b) in scene.init_points.iter().zip(&back.init_points) {
            assert_eq!(a.position, b.position);
            assert!((a.color - b.color).norm() < 1e-5);
        }
    }

    #[test]
    fn unknown_camera_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SceneSpec {
            objects: 1,
            gaussians_per_object: 20,
            distant_gaussians: 0,
            resolution: 16,
            n_train: 2,
            n_test: 1,
            ..Default::default()
        };
        let (scene, _) = generate_synthetic_scene::<f32>(&spec).unwrap();
        save_scene(&scene, dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).unwrap().replace("train_00", "nope");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_scene::<f32>(dir.path()), Err(Error::Format(_))));
    }
}
