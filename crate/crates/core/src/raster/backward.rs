use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::Result;
use crate::gaussian::{Gaussian, GaussianCloud, SH_C0, SH_C1};
use crate::image::Image;
use crate::math::{rotation_matrix_vjp, Mat3, Sym2, Vec3};
use crate::scalar::Real;

use super::forward::{composite_pixel, RasterState};
use super::project::{jacobian_times_view, tangent_limits, ProjectedGaussian};
use super::RenderOptions;

/// Gradients of a scalar loss with respect to every Gaussian parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOutput<T> {
    /// Per-Gaussian gradient, laid out like the parameters themselves.
    pub grads: Vec<Gaussian<T>>,
    /// Norm of the gradient with respect to the projected mean, in
    /// normalized device units (pixel gradient times half the image size).
    pub screen_grad_norm: Vec<T>,
    /// Whether the Gaussian survived culling for this view.
    pub observed: Vec<bool>,
}

/// Screen-space gradient of one projected Gaussian, accumulated over pixels.
#[derive(Debug, Clone, Copy, Default)]
struct ScreenGrad<T> {
    mean: [T; 2],
    /// `∂L/∂(a, b, c)` of the conic, `b` counted once.
    conic: [T; 3],
    color: [T; 3],
    alpha: T,
}

impl<T: Real> ScreenGrad<T> {
    fn zero() -> Self {
        Self {
            mean: [T::zero(); 2],
            conic: [T::zero(); 3],
            color: [T::zero(); 3],
            alpha: T::zero(),
        }
    }

    fn add(&mut self, o: &Self) {
        for i in 0..2 {
            self.mean[i] += o.mean[i];
        }
        for i in 0..3 {
            self.conic[i] += o.conic[i];
            self.color[i] += o.color[i];
        }
        self.alpha += o.alpha;
    }
}

/// Analytic gradient of `L` given `∂L/∂rgb` per pixel.
pub fn render_backward<T: Real>(
    cloud: &GaussianCloud<T>,
    cam: &Camera<T>,
    opts: &RenderOptions<'_, T>,
    d_rgb: &Image<T>,
) -> Result<BackwardOutput<T>> {
    let state = RasterState::build(cloud, cam, opts);
    render_backward_with_state(cloud, cam, opts, &state, d_rgb)
}

/// As [`render_backward`], reusing the state of the forward pass.
pub fn render_backward_with_state<T: Real>(
    cloud: &GaussianCloud<T>,
    cam: &Camera<T>,
    opts: &RenderOptions<'_, T>,
    state: &RasterState<T>,
    d_rgb: &Image<T>,
) -> Result<BackwardOutput<T>> {
    let expected = Image::<T>::filled(state.width, state.height, [T::zero(); 3]);
    expected.check_shape(d_rgb)?;

    let cutoff_sq = opts.cutoff_sigmas * opts.cutoff_sigmas;
    let half = T::lit(0.5);
    let bg = opts.background;

    let per_tile: Vec<Vec<ScreenGrad<T>>> = (0..state.tile_lists.len())
        .into_par_iter()
        .map(|tile| {
            let list = &state.tile_lists[tile];
            let mut buf = vec![ScreenGrad::zero(); list.len()];
            if list.is_empty() {
                return buf;
            }
            let (x0, y0, x1, y1) = state.tile_rect(tile);
            let mut stack: Vec<(usize, usize, T, T)> = Vec::new();
            for y in y0..y1 {
                for x in x0..x1 {
                    let g = d_rgb.pixels[(y * state.width + x) as usize];
                    let dl = Vec3::new(g[0], g[1], g[2]);
                    if dl.x == T::zero() && dl.y == T::zero() && dl.z == T::zero() {
                        continue;
                    }
                    let px = T::from_u32(x).unwrap() + half;
                    let py = T::from_u32(y).unwrap() + half;
                    stack.clear();
                    composite_pixel(state, list, px, py, cutoff_sq, |j, k, a, t| stack.push((j, k, a, t)));
                    let mut behind = bg;
                    for &(j, k, a, t) in stack.iter().rev() {
                        let p = &state.splats[k];
                        let slot = &mut buf[j];
                        let w = a * t;
                        slot.color[0] += dl.x * w;
                        slot.color[1] += dl.y * w;
                        slot.color[2] += dl.z * w;
                        let d_a = dl.dot(p.color - behind) * t;
                        behind = p.color * a + behind * (T::one() - a);

                        let gauss = a / p.alpha;
                        slot.alpha += d_a * gauss;
                        let d_power = d_a * a;
                        let dx = px - p.mean[0];
                        let dy = py - p.mean[1];
                        let [ca, cb, cc] = p.conic;
                        slot.mean[0] += d_power * (ca * dx + cb * dy);
                        slot.mean[1] += d_power * (cb * dx + cc * dy);
                        slot.conic[0] += d_power * (-half * dx * dx);
                        slot.conic[1] += d_power * (-dx * dy);
                        slot.conic[2] += d_power * (-half * dy * dy);
                    }
                }
            }
            buf
        })
        .collect();

    let mut screen = vec![ScreenGrad::zero(); state.projected.len()];
    for (tile, buf) in per_tile.iter().enumerate() {
        for (slot, &k) in buf.iter().zip(&state.tile_lists[tile]) {
            screen[k as usize].add(slot);
        }
    }

    let half_w = T::from_u32(state.width).unwrap() * half;
    let half_h = T::from_u32(state.height).unwrap() * half;
    let per_gaussian: Vec<(usize, Gaussian<T>, T)> = state
        .projected
        .par_iter()
        .zip(screen.par_iter())
        .map(|(p, s)| {
            let g = &cloud.gaussians[p.index];
            let grad = chain_to_parameters(g, p, s, cam, cloud.sh_degree);
            let norm = ((s.mean[0] * half_w).powi(2) + (s.mean[1] * half_h).powi(2)).sqrt();
            (p.index, grad, norm)
        })
        .collect();

    let n = cloud.len();
    let mut out = BackwardOutput {
        grads: vec![Gaussian::zeros(); n],
        screen_grad_norm: vec![T::zero(); n],
        observed: vec![false; n],
    };
    for (i, grad, norm) in per_gaussian {
        out.grads[i] = grad;
        out.screen_grad_norm[i] = norm;
        out.observed[i] = true;
    }
    Ok(out)
}

fn chain_to_parameters<T: Real>(
    g: &Gaussian<T>,
    p: &ProjectedGaussian<T>,
    s: &ScreenGrad<T>,
    cam: &Camera<T>,
    sh_degree: u8,
) -> Gaussian<T> {
    let mut out = Gaussian::zeros();
    let two = T::lit(2.0);
    let half = T::lit(0.5);

    // Opacity.
    let sig = p.alpha;
    out.opacity_logit = s.alpha * sig * (T::one() - sig);

    // Color, masked where the SH output was clamped.
    let mut d_raw = Vec3::zero();
    for ch in 0..3 {
        let r = p.color_raw[ch];
        if r >= T::zero() && r <= T::one() {
            d_raw[ch] = s.color[ch];
        }
    }
    out.sh_dc = d_raw * T::lit(SH_C0);
    let mut d_pos = Vec3::zero();
    if sh_degree >= 1 {
        let c1 = T::lit(SH_C1);
        let dir = p.view_dir;
        let basis = [-c1 * dir.y, c1 * dir.z, -c1 * dir.x];
        for (k, b) in basis.iter().enumerate() {
            out.sh_rest[k] = d_raw * *b;
        }
        let d_dir = Vec3::new(
            -c1 * d_raw.dot(g.sh_rest[2]),
            -c1 * d_raw.dot(g.sh_rest[0]),
            c1 * d_raw.dot(g.sh_rest[1]),
        );
        let v = g.position - cam.center();
        let len = v.norm();
        d_pos += (d_dir - dir * dir.dot(d_dir)) * (T::one() / len);
    }

    // Conic to 2D covariance: dM = -Q G Q with G the symmetric gradient.
    let g_q = Sym2::new(s.conic[0], half * s.conic[1], s.conic[2]);
    let sand = p.conic.sandwich(&g_q);
    let d_m = Sym2::new(-sand.a, -sand.b, -sand.c);
    let dm = [[d_m.a, d_m.b], [d_m.b, d_m.c]];

    let t = jacobian_times_view(cam, p.cam_point);
    let sig3 = &p.cov3d.m;

    // dΣ = Tᵀ dM T.
    let mut d_sigma = Mat3::zero();
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = T::zero();
            for a in 0..2 {
                for b in 0..2 {
                    acc += t[a][i] * dm[a][b] * t[b][j];
                }
            }
            d_sigma.m[i][j] = acc;
        }
    }

    // dT = 2 dM T Σ, dJ = dT Wᵀ.
    let mut ts = [[T::zero(); 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            ts[r][c] = t[r][0] * sig3[0][c] + t[r][1] * sig3[1][c] + t[r][2] * sig3[2][c];
        }
    }
    let mut d_t = [[T::zero(); 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            d_t[r][c] = two * (dm[r][0] * ts[0][c] + dm[r][1] * ts[1][c]);
        }
    }
    let w = &cam.rotation.m;
    let mut d_j = [[T::zero(); 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            d_j[r][c] = d_t[r][0] * w[c][0] + d_t[r][1] * w[c][1] + d_t[r][2] * w[c][2];
        }
    }

    // Camera-space point: through J and through the projected mean. A
    // clamped ray tangent is constant in x (or y) and scales as 1/z.
    let pc = p.cam_point;
    let inv_z = T::one() / pc.z;
    let inv_z2 = inv_z * inv_z;
    let (fx, fy) = (cam.fx, cam.fy);
    let (lx, ly) = tangent_limits(cam);
    let (ux, uy) = (pc.x * inv_z, pc.y * inv_z);
    let (dj02_dx, dj02_dz) = if ux.abs() > lx {
        (T::zero(), fx * lx.copysign(ux) * inv_z2)
    } else {
        (-fx * inv_z2, two * fx * ux * inv_z2)
    };
    let (dj12_dy, dj12_dz) = if uy.abs() > ly {
        (T::zero(), fy * ly.copysign(uy) * inv_z2)
    } else {
        (-fy * inv_z2, two * fy * uy * inv_z2)
    };
    let mut d_pc = Vec3::new(
        d_j[0][2] * dj02_dx,
        d_j[1][2] * dj12_dy,
        d_j[0][0] * (-fx * inv_z2) + d_j[0][2] * dj02_dz + d_j[1][1] * (-fy * inv_z2) + d_j[1][2] * dj12_dz,
    );
    d_pc.x += s.mean[0] * fx * inv_z;
    d_pc.y += s.mean[1] * fy * inv_z;
    d_pc.z += -s.mean[0] * fx * pc.x * inv_z2 - s.mean[1] * fy * pc.y * inv_z2;
    d_pos += cam.rotation.transpose().mul_vec(d_pc);
    out.position = d_pos;

    // Σ = M Mᵀ with M = R diag(s): dM = (dΣ + dΣᵀ) M.
    let Ok(rot) = g.rotation_matrix() else {
        return out;
    };
    let scale = g.scale();
    let sym = d_sigma.add(&d_sigma.transpose());
    let m = rot.matmul(&Mat3::diag(scale));
    let d_m3 = sym.matmul(&m);
    let mut d_rot = Mat3::zero();
    for k in 0..3 {
        let mut ds = T::zero();
        for r in 0..3 {
            ds += d_m3.m[r][k] * rot.m[r][k];
            d_rot.m[r][k] = d_m3.m[r][k] * scale[k];
        }
        out.log_scale[k] = ds * scale[k];
    }
    out.rotation = rotation_matrix_vjp(g.rotation, &d_rot);
    out
}
