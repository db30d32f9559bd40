use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, GaussianCloud};
use crate::math::{Quat, Vec3};
use crate::raster::{render, RenderOptions};
use crate::scalar::Real;

use super::{InitPoint, SceneBundle, View};

/// Parameters of the procedural scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    /// Number of foreground clusters.
    pub objects: usize,
    pub gaussians_per_object: usize,
    /// Size of the cluster placed outside the camera orbit.
    pub distant_gaussians: usize,
    pub resolution: u32,
    pub n_train: usize,
    pub n_test: usize,
    pub orbit_radius: f64,
    pub fov_deg: f64,
    /// Fraction of ground-truth centers kept as init points.
    pub init_fraction: f64,
    /// Init point jitter as a fraction of the extent.
    pub init_jitter: f64,
    pub background: [f64; 3],
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            objects: 5,
            gaussians_per_object: 160,
            distant_gaussians: 80,
            resolution: 128,
            n_train: 9,
            n_test: 3,
            orbit_radius: 4.0,
            fov_deg: 50.0,
            init_fraction: 0.3,
            init_jitter: 0.002,
            background: [0.0, 0.0, 0.0],
        }
    }
}

pub const SCENE_SPEC_KEYS: &[&str] = &[
    "seed",
    "objects",
    "gaussians_per_object",
    "distant_gaussians",
    "resolution",
    "n_train",
    "n_test",
    "orbit_radius",
    "fov_deg",
    "init_fraction",
    "init_jitter",
    "background",
];

impl SceneSpec {
    /// Parses `key = value` text; unknown keys are reported together.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::format(format!("scene spec: {}", e.message())))?;
        let unknown: Vec<String> = table.keys().filter(|k| !SCENE_SPEC_KEYS.contains(&k.as_str())).cloned().collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        let spec: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::format(format!("scene spec: {}", e.message())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train < 2 {
            return Err(Error::param(format!("n_train must be at least 2, got {}", self.n_train)));
        }
        if self.n_test < 1 {
            return Err(Error::param("n_test must be at least 1"));
        }
        if self.n_test >= self.n_train + self.n_test || self.objects == 0 || self.gaussians_per_object == 0 {
            return Err(Error::param("scene needs at least one object with at least one Gaussian"));
        }
        if self.resolution < 16 {
            return Err(Error::param(format!("resolution must be at least 16, got {}", self.resolution)));
        }
        if !(self.fov_deg > 1.0 && self.fov_deg < 170.0) {
            return Err(Error::param(format!("fov_deg out of range: {}", self.fov_deg)));
        }
        if !(self.orbit_radius > 0.5) {
            return Err(Error::param(format!("orbit_radius must exceed 0.5, got {}", self.orbit_radius)));
        }
        if !(self.init_fraction > 0.0 && self.init_fraction <= 1.0) {
            return Err(Error::param(format!("init_fraction must lie in (0, 1], got {}", self.init_fraction)));
        }
        if !(self.init_jitter >= 0.0) {
            return Err(Error::param("init_jitter must be non-negative"));
        }
        Ok(())
    }

    /// Orbit slots held out for testing.
    pub fn test_slots(&self) -> Vec<usize> {
        let n = self.n_train + self.n_test;
        (0..self.n_test)
            .map(|j| ((j as f64 + 0.5) * n as f64 / self.n_test as f64).floor() as usize)
            .collect()
    }
}

fn unit_ball(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() <= 1.0 && v.norm() > 1e-6 {
            return v;
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Quat<f64> {
    let q = Quat::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    q.normalized().unwrap_or(Quat::identity())
}

/// Smooth position-dependent color variation around a base color.
fn textured_color(base: Vec3<f64>, p: Vec3<f64>, freq: f64) -> Vec3<f64> {
    let t = Vec3::new(
        (freq * p.x + 1.3 * p.y).sin(),
        (freq * p.y - 0.7 * p.z).sin(),
        (freq * p.z + 0.9 * p.x).sin(),
    );
    (base + t * 0.22).map(|c| c.clamp(0.03, 0.97))
}

fn blob(
    rng: &mut ChaCha8Rng,
    center: Vec3<f64>,
    radius: f64,
    count: usize,
    scale: f64,
    out: &mut Vec<Gaussian<f64>>,
) {
    let base = Vec3::new(rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9));
    let freq = rng.gen_range(6.0..14.0);
    for _ in 0..count {
        let u = unit_ball(rng);
        // Most mass on a shell so the blob has a surface.
        let dir = u.normalized();
        let r = if rng.gen_bool(0.75) { rng.gen_range(0.85..1.0) } else { u.norm() };
        let p = center + dir * (radius * r);
        let s = Vec3::new(
            scale * rng.gen_range(0.6..1.6),
            scale * rng.gen_range(0.6..1.6),
            scale * rng.gen_range(0.25..0.6),
        );
        let mut g = Gaussian::new(p, s, rng.gen_range(0.6..0.95), textured_color(base, p, freq));
        g.rotation = random_rotation(rng);
        out.push(g);
    }
}

/// Builds the ground-truth cloud, renders all views, and derives init points.
pub fn generate_synthetic_scene<T: Real>(spec: &SceneSpec) -> Result<(SceneBundle<T>, GaussianCloud<T>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut gt = Vec::new();
    for k in 0..spec.objects {
        let ang = 2.0 * PI * (k as f64 + rng.gen_range(0.0..0.6)) / spec.objects as f64;
        let dist = rng.gen_range(0.3..1.3);
        let center = Vec3::new(dist * ang.cos(), dist * ang.sin(), rng.gen_range(-0.5..0.5));
        let radius = rng.gen_range(0.25..0.45);
        blob(&mut rng, center, radius, spec.gaussians_per_object, 0.045, &mut gt);
    }
    if spec.distant_gaussians > 0 {
        let ang = rng.gen_range(0.0..2.0 * PI);
        let dist = spec.orbit_radius * 1.6;
        let center = Vec3::new(dist * ang.cos(), dist * ang.sin(), 0.6);
        blob(&mut rng, center, 0.7, spec.distant_gaussians, 0.09, &mut gt);
    }
    let gt64 = GaussianCloud::from_gaussians(gt, 0);

    let (lo, hi) = gt64.gaussians.iter().fold(
        (Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY)),
        |(lo, hi), g| {
            let p = g.position;
            (
                Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        },
    );
    let extent = (hi - lo).norm();

    let n = spec.n_train + spec.n_test;
    let test_slots = spec.test_slots();
    let phase = rng.gen_range(0.0..2.0 * PI);
    let fov = spec.fov_deg.to_radians();
    let mut train_cams = Vec::new();
    let mut test_cams = Vec::new();
    for k in 0..n {
        let az = phase + 2.0 * PI * k as f64 / n as f64;
        let el = if k % 2 == 0 { 12f64 } else { 32f64 }.to_radians() + rng.gen_range(-0.05..0.05);
        let eye = Vec3::new(
            spec.orbit_radius * el.cos() * az.cos(),
            spec.orbit_radius * el.cos() * az.sin(),
            spec.orbit_radius * el.sin(),
        );
        let target = Vec3::new(0.0, 0.0, rng.gen_range(-0.1..0.1));
        let is_test = test_slots.contains(&k);
        let id = if is_test { format!("test_{k:02}") } else { format!("train_{k:02}") };
        let cam = Camera::look_at(
            id,
            eye,
            target,
            Vec3::new(0.0, 0.0, 1.0),
            spec.resolution,
            spec.resolution,
            fov,
            0.05,
            100.0,
        );
        if is_test {
            test_cams.push(cam);
        } else {
            train_cams.push(cam);
        }
    }

    let mut init_points = Vec::new();
    let jitter = spec.init_jitter * extent;
    for g in &gt64.gaussians {
        if rng.gen_bool(spec.init_fraction) {
            let z: [f64; 3] = [0, 1, 2].map(|_| rng.sample(StandardNormal));
            init_points.push(InitPoint {
                position: (g.position + Vec3::from_array(z) * jitter).cast(),
                color: g.base_rgb().cast(),
            });
        }
    }

    let gt_cloud: GaussianCloud<T> = gt64.cast();
    let background = Vec3::from_array(spec.background).cast::<T>();
    let opts = RenderOptions::new(background);
    let views = |cams: Vec<Camera<f64>>| -> Vec<View<T>> {
        cams.into_par_iter()
            .map(|c| {
                let camera: Camera<T> = c.cast();
                let image = render(&gt_cloud, &camera, &opts).color;
                View { camera, image }
            })
            .collect()
    };
    let bundle = SceneBundle {
        train: views(train_cams),
        test: views(test_cams),
        init_points,
        extent: T::lit(extent),
        background,
    };
    bundle.validate()?;
    Ok((bundle, gt_cloud))
}

/// Gaussians at the init points, isotropic with scale equal to the RMS
/// distance to the three nearest neighbours.
pub fn initialize_cloud<T: Real>(points: &[InitPoint<T>], init_opacity: T, sh_degree: u8) -> GaussianCloud<T> {
    let pos: Vec<Vec3<T>> = points.iter().map(|p| p.position).collect();
    let scales: Vec<T> = (0..pos.len())
        .into_par_iter()
        .map(|i| {
            let mut best = [T::infinity(); 3];
            for (j, q) in pos.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = pos[i] - *q;
                let d2 = d.dot(d);
                if d2 < best[2] {
                    best[2] = d2;
                    best.sort_by(|a, b| a.partial_cmp(b).unwrap());
                }
            }
            let finite: Vec<T> = best.iter().copied().filter(|v| v.is_finite()).collect();
            if finite.is_empty() {
                return T::lit(0.01);
            }
            let mean = finite.iter().copied().sum::<T>() / T::from_usize_lossy(finite.len());
            mean.sqrt().max(T::lit(1e-7))
        })
        .collect();
    let gs = points
        .iter()
        .zip(scales)
        .map(|(p, s)| Gaussian::new(p.position, Vec3::splat(s), init_opacity, p.color))
        .collect();
    GaussianCloud::from_gaussians(gs, sh_degree)
}
