use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianCloud;
use crate::math::Vec3;
use crate::scalar::Real;

use super::InitPoint;

/// One unit of position noise, as a fraction of the scene extent.
pub const POSITION_NOISE_FRACTION: f64 = 0.01;
/// One unit of scale noise in the log domain (a factor of about √2).
pub const SCALE_NOISE_LOG: f64 = std::f64::consts::LN_2 / 2.0;
/// Jitter of duplicated init points, as a fraction of the scene extent.
pub const RESAMPLE_JITTER_FRACTION: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseTarget {
    Coordinates,
    Scales,
    Both,
}

impl FromStr for NoiseTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coordinates" | "positions" => Ok(Self::Coordinates),
            "scales" => Ok(Self::Scales),
            "both" => Ok(Self::Both),
            _ => Err(Error::param(format!("unknown noise target `{s}` (coordinates, scales, both)"))),
        }
    }
}

fn normal3(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Perturbs a cloud: `p += k·(0.01·extent)·z` and/or
/// `log_scale += k·(ln2/2)·z`. The standard-normal draws depend only on
/// `seed` and the Gaussian's index, so different `k` scale the same noise.
pub fn inject_noise<T: Real>(cloud: &GaussianCloud<T>, target: NoiseTarget, k: T, extent: T, seed: u64) -> Result<GaussianCloud<T>> {
    if !(k >= T::zero()) || !k.is_finite() {
        return Err(Error::param(format!("noise intensity must be finite and non-negative, got {k}")));
    }
    let mut out = cloud.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma_p = k * T::lit(POSITION_NOISE_FRACTION) * extent;
    let sigma_s = k * T::lit(SCALE_NOISE_LOG);
    for g in &mut out.gaussians {
        let zp: Vec3<T> = normal3(&mut rng).cast();
        let zs: Vec3<T> = normal3(&mut rng).cast();
        if k == T::zero() {
            continue;
        }
        if matches!(target, NoiseTarget::Coordinates | NoiseTarget::Both) {
            g.position += zp * sigma_p;
        }
        if matches!(target, NoiseTarget::Scales | NoiseTarget::Both) {
            g.log_scale += zs * sigma_s;
        }
    }
    Ok(out)
}

/// Returns the original points followed by `factor − 1` jittered copies
/// of each (jitter σ = 0.5% of the extent).
pub fn resample_init<T: Real>(points: &[InitPoint<T>], factor: usize, extent: T, seed: u64) -> Result<Vec<InitPoint<T>>> {
    if factor < 1 {
        return Err(Error::param("resample factor must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = T::lit(RESAMPLE_JITTER_FRACTION) * extent;
    let mut out = points.to_vec();
    for _ in 1..factor {
        for p in points {
            let z: Vec3<T> = normal3(&mut rng).cast();
            out.push(InitPoint {
                position: p.position + z * sigma,
                color: p.color,
            });
        }
    }
    Ok(out)
}
