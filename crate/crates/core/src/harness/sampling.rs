use crate::camera::{Camera, OptimizationClass, SamplingProfile};
use crate::error::Result;
use crate::gaussian::GaussianCloud;
use crate::scalar::Real;

/// Per-Gaussian sampling analysis of a cloud against a camera set.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingReport {
    pub rows: Vec<SamplingRow>,
    pub under_fraction: f64,
    pub over_fraction: f64,
    pub unobserved_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingRow {
    pub index: usize,
    pub rate: f64,
    /// `+∞` for unobserved Gaussians.
    pub interval: f64,
    pub max_scale: f64,
    pub class: Option<OptimizationClass>,
}

impl SamplingReport {
    pub fn compute<T: Real>(cloud: &GaussianCloud<T>, cams: &[Camera<T>]) -> Result<Self> {
        let profile = SamplingProfile::compute(cloud, cams)?;
        let classes = profile.classes(cloud);
        let rows: Vec<SamplingRow> = cloud
            .gaussians
            .iter()
            .enumerate()
            .map(|(i, g)| SamplingRow {
                index: i,
                rate: profile.rate[i].as_f64(),
                interval: profile.interval[i].as_f64(),
                max_scale: g.scale().max_elem().as_f64(),
                class: classes[i],
            })
            .collect();
        let n = rows.len().max(1) as f64;
        let count = |c: Option<OptimizationClass>| rows.iter().filter(|r| r.class == c).count() as f64 / n;
        Ok(Self {
            under_fraction: count(Some(OptimizationClass::UnderOptimized)),
            over_fraction: count(Some(OptimizationClass::OverOptimized)),
            unobserved_fraction: count(None),
            rows,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,rate,interval,max_scale,class\n");
        for r in &self.rows {
            let interval = if r.interval.is_finite() { format!("{:.9e}", r.interval) } else { "inf".into() };
            let class = r.class.map_or("unobserved", OptimizationClass::label);
            s.push_str(&format!("{},{:.9e},{},{:.9e},{}\n", r.index, r.rate, interval, r.max_scale, class));
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "gaussians = {}\nunder_optimized = {:.6}\nover_optimized = {:.6}\nunobserved = {:.6}\n",
            self.rows.len(),
            self.under_fraction,
            self.over_fraction,
            self.unobserved_fraction
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Gaussian;
    use crate::math::{Mat3, Vec3};

    fn cam() -> Camera<f64> {
        Camera {
            id: "c".into(),
            width: 100,
            height: 100,
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 50.0,
            rotation: Mat3::identity(),
            translation: Vec3::zero(),
            near: 0.1,
            far: 100.0,
        }
    }

    #[test]
    fn on_axis_gaussian_rate_and_interval() {
        let g = Gaussian::new(Vec3::new(0.0, 0.0, 2.0), Vec3::splat(0.01), 0.5, Vec3::splat(0.5));
        let r = SamplingReport::compute(&GaussianCloud::from_gaussians(vec![g], 0), &[cam()]).unwrap();
        assert!((r.rows[0].rate - 50.0).abs() < 1e-12);
        assert!((r.rows[0].interval - 0.02).abs() < 1e-12);
        assert_eq!(r.under_fraction, 1.0);
        assert!(r.to_csv().lines().nth(1).unwrap().ends_with(",under"));
    }

    #[test]
    fn behind_camera_is_unobserved() {
        let g = Gaussian::new(Vec3::new(0.0, 0.0, -2.0), Vec3::splat(0.01), 0.5, Vec3::splat(0.5));
        let r = SamplingReport::compute(&GaussianCloud::from_gaussians(vec![g, g], 0), &[cam()]).unwrap();
        assert_eq!(r.unobserved_fraction, 1.0);
        assert!(r.to_csv().contains(",inf,"));
    }

    #[test]
    fn large_scales_are_all_over() {
        let g = Gaussian::new(Vec3::new(0.0, 0.0, 2.0), Vec3::splat(0.5), 0.5, Vec3::splat(0.5));
        let r = SamplingReport::compute(&GaussianCloud::from_gaussians(vec![g; 3], 0), &[cam()]).unwrap();
        assert_eq!(r.under_fraction, 0.0);
    }
}
