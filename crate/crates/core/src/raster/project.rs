use crate::camera::Camera;
use crate::gaussian::{build_covariance, Gaussian, SH_C0, SH_C1};
use crate::math::{Mat3, Sym2, Vec3};
use crate::scalar::Real;

use super::{RenderOptions, COV2D_DILATION};

/// Screen-space footprint of one Gaussian for one camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedGaussian<T> {
    /// Index of the source Gaussian in its cloud.
    pub index: usize,
    pub mean2d: [T; 2],
    /// Projected covariance including the screen-space dilation (pixels²).
    pub cov2d: Sym2<T>,
    /// Inverse of `cov2d`.
    pub conic: Sym2<T>,
    pub depth: T,
    /// RGB after SH evaluation, clamped to `[0, 1]`.
    pub color: Vec3<T>,
    /// Opacity `sigmoid(opacity_logit)`.
    pub alpha: T,
    /// Footprint radius in pixels at the configured cutoff.
    pub radius: T,
    pub(crate) cam_point: Vec3<T>,
    /// Effective 3D covariance (after any low-pass regularization).
    pub(crate) cov3d: Mat3<T>,
    /// Unclamped SH color, needed to mask gradients of clamped channels.
    pub(crate) color_raw: Vec3<T>,
    pub(crate) view_dir: Vec3<T>,
}

/// Projects with default options (no low-pass, 3σ cutoff, 20% guard band).
pub fn project_gaussian<T: Real>(g: &Gaussian<T>, cam: &Camera<T>) -> Option<ProjectedGaussian<T>> {
    let opts = RenderOptions::new(Vec3::zero());
    project_gaussian_with(g, 0, cam, 0, T::zero(), &opts)
}

/// Full projection. `extra_variance` is added isotropically to the 3D
/// covariance. Returns `None` when culled (depth at or before the near
/// plane, or footprint entirely outside the guard-banded image).
pub fn project_gaussian_with<T: Real>(
    g: &Gaussian<T>,
    index: usize,
    cam: &Camera<T>,
    sh_degree: u8,
    extra_variance: T,
    opts: &RenderOptions<'_, T>,
) -> Option<ProjectedGaussian<T>> {
    let pc = cam.to_camera(g.position);
    if pc.z <= cam.near {
        return None;
    }
    let mut cov3d = build_covariance(g).ok()?;
    if extra_variance > T::zero() {
        for i in 0..3 {
            cov3d.m[i][i] += extra_variance;
        }
    }
    let (x, y, z) = (pc.x, pc.y, pc.z);
    let inv_z = T::one() / z;
    let mean2d = [cam.fx * x * inv_z + cam.cx, cam.fy * y * inv_z + cam.cy];

    let jw = jacobian_times_view(cam, pc);
    let cov2d = project_covariance(&jw, &cov3d);
    let conic = cov2d.inverse()?;

    let radius = opts.cutoff_sigmas * cov2d.max_eigenvalue().sqrt();
    let w = T::from_u32(cam.width).unwrap();
    let h = T::from_u32(cam.height).unwrap();
    let gx = opts.guard_band * w;
    let gy = opts.guard_band * h;
    if radius.is_finite()
        && (mean2d[0] + radius < -gx || mean2d[0] - radius > w + gx || mean2d[1] + radius < -gy || mean2d[1] - radius > h + gy)
    {
        return None;
    }

    let view_dir = (g.position - cam.center()).normalized();
    let color_raw = eval_color(g, sh_degree, view_dir);
    let color = color_raw.map(|c| c.max(T::zero()).min(T::one()));

    Some(ProjectedGaussian {
        index,
        mean2d,
        cov2d,
        conic,
        depth: z,
        color,
        alpha: g.opacity(),
        radius,
        cam_point: pc,
        cov3d,
        color_raw,
        view_dir,
    })
}

/// `J · W` as a 2x3 matrix, where `J` is the perspective Jacobian at the
/// camera-space point and `W` the world-to-camera rotation.
pub(crate) fn jacobian_times_view<T: Real>(cam: &Camera<T>, pc: Vec3<T>) -> [[T; 3]; 2] {
    let j = perspective_jacobian(cam, pc);
    let w = &cam.rotation.m;
    let mut out = [[T::zero(); 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            out[r][c] = j[r][0] * w[0][c] + j[r][1] * w[1][c] + j[r][2] * w[2][c];
        }
    }
    out
}

/// Bound on `|x/z|` and `|y/z|` used when linearizing, as a multiple of
/// the half-image tangent.
pub const JACOBIAN_CLAMP: f64 = 1.3;

/// Tangent limits `(lim_x, lim_y)` of the linearization point.
#[inline]
pub(crate) fn tangent_limits<T: Real>(cam: &Camera<T>) -> (T, T) {
    let k = T::lit(0.5 * JACOBIAN_CLAMP);
    (k * T::from_u32(cam.width).unwrap() / cam.fx, k * T::from_u32(cam.height).unwrap() / cam.fy)
}

/// Perspective Jacobian at `pc`, with the ray direction clamped to the
/// widened field of view so off-screen Gaussians near the image plane do
/// not receive unbounded footprints.
#[inline]
pub(crate) fn perspective_jacobian<T: Real>(cam: &Camera<T>, pc: Vec3<T>) -> [[T; 3]; 2] {
    let inv_z = T::one() / pc.z;
    let (lx, ly) = tangent_limits(cam);
    let tx = (pc.x * inv_z).max(-lx).min(lx);
    let ty = (pc.y * inv_z).max(-ly).min(ly);
    [
        [cam.fx * inv_z, T::zero(), -cam.fx * tx * inv_z],
        [T::zero(), cam.fy * inv_z, -cam.fy * ty * inv_z],
    ]
}

/// `T Σ Tᵀ + dilation · I` for the 2x3 matrix `T`.
#[inline]
pub(crate) fn project_covariance<T: Real>(t: &[[T; 3]; 2], cov: &Mat3<T>) -> Sym2<T> {
    let s = &cov.m;
    let mut ts = [[T::zero(); 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            ts[r][c] = t[r][0] * s[0][c] + t[r][1] * s[1][c] + t[r][2] * s[2][c];
        }
    }
    let dot = |a: &[T; 3], b: &[T; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let d = T::lit(COV2D_DILATION);
    Sym2::new(dot(&ts[0], &t[0]) + d, dot(&ts[0], &t[1]), dot(&ts[1], &t[1]) + d)
}

/// Degree-1 real SH basis values (without the constant) for a unit direction.
#[inline]
pub(crate) fn sh1_basis<T: Real>(dir: Vec3<T>) -> [T; 3] {
    let c1 = T::lit(SH_C1);
    [-c1 * dir.y, c1 * dir.z, -c1 * dir.x]
}

pub(crate) fn eval_color<T: Real>(g: &Gaussian<T>, sh_degree: u8, dir: Vec3<T>) -> Vec3<T> {
    let c0 = T::lit(SH_C0);
    let mut rgb = g.sh_dc.map(|v| v * c0 + T::lit(0.5));
    if sh_degree >= 1 {
        let basis = sh1_basis(dir);
        for (k, b) in basis.iter().enumerate() {
            rgb += g.sh_rest[k] * *b;
        }
    }
    rgb
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera<f64> {
        Camera {
            id: "c".into(),
            width: 64,
            height: 64,
            fx: 80.0,
            fy: 80.0,
            cx: 32.0,
            cy: 32.0,
            rotation: Mat3::identity(),
            translation: Vec3::zero(),
            near: 0.1,
            far: 100.0,
        }
    }

    fn iso(z: f64, s: f64) -> Gaussian<f64> {
        Gaussian::new(Vec3::new(0.0, 0.0, z), Vec3::splat(s), 0.8, Vec3::splat(0.5))
    }

    #[test]
    fn on_axis_isotropic_projects_to_principal_point() {
        let p = project_gaussian(&iso(2.0, 0.1), &cam()).unwrap();
        assert_eq!(p.mean2d, [32.0, 32.0]);
        assert!((p.cov2d.a - p.cov2d.c).abs() < 1e-12);
        assert!(p.cov2d.b.abs() < 1e-12);
        assert_eq!(p.depth, 2.0);
    }

    #[test]
    fn doubling_depth_quarters_footprint() {
        let d = COV2D_DILATION;
        let near = project_gaussian(&iso(2.0, 0.1), &cam()).unwrap();
        let far = project_gaussian(&iso(4.0, 0.1), &cam()).unwrap();
        // (f s / z)^2: 16 vs 4.
        assert!((near.cov2d.a - d - 16.0).abs() < 1e-9);
        assert!(((far.cov2d.a - d) / (near.cov2d.a - d) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_culled() {
        assert!(project_gaussian(&iso(-2.0, 0.1), &cam()).is_none());
        assert!(project_gaussian(&iso(0.05, 0.01), &cam()).is_none());
    }

    #[test]
    fn far_off_screen_is_culled() {
        let mut g = iso(2.0, 0.01);
        g.position.x = 10.0;
        assert!(project_gaussian(&g, &cam()).is_none());
    }
}
