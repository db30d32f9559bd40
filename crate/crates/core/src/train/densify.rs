use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::gaussian::{Gaussian, GaussianCloud};
use crate::math::Vec3;
use crate::scalar::Real;

/// Scale divisor applied to split children.
pub const SPLIT_SCALE_DIVISOR: f64 = 1.6;

/// Where an output Gaussian came from after a structural update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    /// Index in the cloud before the update.
    pub source: usize,
    /// True for newly created Gaussians (clones and split children).
    pub fresh: bool,
}

impl Provenance {
    pub fn kept(source: usize) -> Self {
        Self { source, fresh: false }
    }

    pub fn fresh(source: usize) -> Self {
        Self { source, fresh: true }
    }
}

/// Thresholds for one densification round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensifyParams<T> {
    /// Averaged screen-space gradient above which a Gaussian is densified.
    pub grad_threshold: T,
    /// Largest max-axis scale (world units) that is cloned rather than split.
    pub size_threshold: T,
    pub opacity_prune: T,
    pub max_gaussians: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DensifyStats {
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensifyOutcome {
    pub stats: DensifyStats,
    pub origin: Vec<Provenance>,
}

/// Two children sampled from the parent's density, each with scales
/// divided by 1.6. Other parameters are copied.
pub fn split_gaussian<T: Real, R: Rng>(g: &Gaussian<T>, rng: &mut R) -> Result<[Gaussian<T>; 2]> {
    let rot = g.rotation_matrix()?;
    let s = g.scale();
    let shrink = T::lit(SPLIT_SCALE_DIVISOR.ln());
    let mut child = || {
        let z = Vec3::new(
            T::lit(rng.sample::<f64, _>(StandardNormal)),
            T::lit(rng.sample::<f64, _>(StandardNormal)),
            T::lit(rng.sample::<f64, _>(StandardNormal)),
        );
        let mut c = *g;
        c.position = g.position + rot.mul_vec(s.mul_elem(z));
        c.log_scale = g.log_scale - Vec3::splat(shrink);
        c
    };
    let a = child();
    let b = child();
    Ok([a, b])
}

/// Clone small and split large Gaussians whose averaged gradient exceeds
/// the threshold, then prune transparent ones. Resets gradient statistics.
///
/// Output order: surviving originals, then clones, then split children.
pub fn densify_and_prune<T: Real, R: Rng>(
    cloud: &mut GaussianCloud<T>,
    params: &DensifyParams<T>,
    rng: &mut R,
) -> Result<DensifyOutcome> {
    cloud.check_aligned()?;
    let grads = cloud.average_grads();
    let n = cloud.len();
    let mut budget = params.max_gaussians.saturating_sub(n);

    let mut kept = Vec::with_capacity(n);
    let mut origin = Vec::with_capacity(n);
    let mut clones = Vec::new();
    let mut clone_origin = Vec::new();
    let mut children = Vec::new();
    let mut child_origin = Vec::new();
    let mut stats = DensifyStats::default();
    for (i, g) in cloud.gaussians.iter().enumerate() {
        if grads[i] > params.grad_threshold && budget > 0 {
            if g.scale().max_elem() <= params.size_threshold {
                stats.cloned += 1;
                budget -= 1;
                clones.push(*g);
                clone_origin.push(Provenance::fresh(i));
                kept.push(*g);
                origin.push(Provenance::kept(i));
            } else {
                stats.split += 1;
                budget -= 1;
                for c in split_gaussian(g, rng)? {
                    children.push(c);
                    child_origin.push(Provenance::fresh(i));
                }
            }
        } else {
            kept.push(*g);
            origin.push(Provenance::kept(i));
        }
    }
    kept.extend(clones);
    kept.extend(children);
    origin.extend(clone_origin);
    origin.extend(child_origin);

    let keep: Vec<bool> = kept.iter().map(|g| g.opacity() >= params.opacity_prune).collect();
    stats.pruned = keep.iter().filter(|k| !**k).count();
    *cloud = GaussianCloud::from_gaussians(kept, cloud.sh_degree);
    cloud.retain_mask(&keep);
    let origin = origin.into_iter().zip(keep).filter(|(_, k)| *k).map(|(o, _)| o).collect();
    Ok(DensifyOutcome { stats, origin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> DensifyParams<f64> {
        DensifyParams {
            grad_threshold: 2e-4,
            size_threshold: 0.05,
            opacity_prune: 0.005,
            max_gaussians: 200_000,
        }
    }

    fn cloud(scales: &[f64], grads: &[f64]) -> GaussianCloud<f64> {
        let gs = scales
            .iter()
            .map(|s| Gaussian::new(Vec3::new(0.1, 0.2, 0.3), Vec3::splat(*s), 0.5, Vec3::splat(0.5)))
            .collect();
        let mut c = GaussianCloud::from_gaussians(gs, 0);
        c.grad_accum = grads.to_vec();
        c.grad_count = vec![1; grads.len()];
        c
    }

    #[test]
    fn quiet_cloud_is_unchanged() {
        let mut c = cloud(&[0.01, 0.2], &[1e-5, 1e-4]);
        let before = c.gaussians.clone();
        let out = densify_and_prune(&mut c, &params(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(c.gaussians, before);
        assert_eq!(out.stats, DensifyStats::default());
        assert!(c.grad_accum.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn small_high_gradient_gaussian_is_cloned() {
        let mut c = cloud(&[0.01], &[1e-3]);
        let out = densify_and_prune(&mut c, &params(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.gaussians[0], c.gaussians[1]);
        assert_eq!(out.stats.cloned, 1);
        assert_eq!(out.origin, vec![Provenance::kept(0), Provenance::fresh(0)]);
    }

    #[test]
    fn large_high_gradient_gaussian_is_split() {
        let mut c = cloud(&[0.2], &[1e-3]);
        let parent = c.gaussians[0];
        let out = densify_and_prune(&mut c, &params(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(out.stats.split, 1);
        // Same draws as the split routine with the same seed.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let expected = split_gaussian(&parent, &mut rng).unwrap();
        for (child, e) in c.gaussians.iter().zip(&expected) {
            assert_eq!(child, e);
            for k in 0..3 {
                assert!((child.log_scale[k] - (parent.log_scale[k] - 1.6f64.ln())).abs() < 1e-15);
            }
        }
        // Independent oracle for the first child's position.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z: [f64; 3] = [0, 1, 2].map(|_| rng.sample(StandardNormal));
        let expect = parent.position + Vec3::from_array(z) * 0.2;
        assert!((c.gaussians[0].position - expect).norm() < 1e-12);
    }

    #[test]
    fn transparent_gaussians_are_pruned() {
        let mut c = cloud(&[0.01, 0.01], &[0.0, 0.0]);
        c.gaussians[1].opacity_logit = -10.0;
        let out = densify_and_prune(&mut c, &params(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(out.stats.pruned, 1);
        assert_eq!(out.origin, vec![Provenance::kept(0)]);
    }

    #[test]
    fn cap_limits_growth() {
        let mut c = cloud(&[0.01; 4], &[1e-3; 4]);
        let p = DensifyParams {
            max_gaussians: 6,
            ..params()
        };
        densify_and_prune(&mut c, &p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(c.len(), 6);
    }
}
