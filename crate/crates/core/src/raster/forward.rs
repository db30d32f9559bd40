use rayon::prelude::*;

use crate::camera::Camera;
use crate::gaussian::GaussianCloud;
use crate::image::Image;
use crate::math::Vec3;
use crate::scalar::Real;

use super::project::{project_gaussian_with, ProjectedGaussian};
use super::{RenderOptions, TILE_SIZE, TRANSMITTANCE_EPS};

/// Output of a forward render.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage<T> {
    pub color: Image<T>,
    /// Per-pixel `1 − T_final`, row-major.
    pub alpha_accum: Vec<T>,
}

impl<T: Real> RenderedImage<T> {
    pub fn width(&self) -> u32 {
        self.color.width
    }

    pub fn height(&self) -> u32 {
        self.color.height
    }
}

/// Projection and binning results shared between the forward and backward
/// passes of one view.
#[derive(Debug, Clone)]
pub struct RasterState<T> {
    pub width: u32,
    pub height: u32,
    pub tiles_x: u32,
    pub tiles_y: u32,
    /// Visible Gaussians in front-to-back order (depth, then index).
    pub projected: Vec<ProjectedGaussian<T>>,
    /// Per tile, indices into `projected` in the same order.
    pub tile_lists: Vec<Vec<u32>>,
    /// Compact copy of the fields read per pixel, aligned with `projected`.
    pub(crate) splats: Vec<Splat<T>>,
    /// Number of cloud entries, for sizing gradient buffers.
    pub cloud_len: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Splat<T> {
    pub mean: [T; 2],
    /// Conic entries `a, b, c`.
    pub conic: [T; 3],
    pub alpha: T,
    pub color: Vec3<T>,
}

impl<T: Real> RasterState<T> {
    /// Projects, sorts, and bins every Gaussian of `cloud`.
    pub fn build(cloud: &GaussianCloud<T>, cam: &Camera<T>, opts: &RenderOptions<'_, T>) -> Self {
        let lowpass = opts.lowpass.filter(|f| f.variance.len() == cloud.len());
        let mut projected: Vec<ProjectedGaussian<T>> = cloud
            .gaussians
            .par_iter()
            .enumerate()
            .filter_map(|(i, g)| {
                let extra = lowpass.map_or(T::zero(), |f| f.variance[i]);
                project_gaussian_with(g, i, cam, cloud.sh_degree, extra, opts)
            })
            .collect();
        projected.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap_or(std::cmp::Ordering::Equal).then(a.index.cmp(&b.index)));

        let tiles_x = cam.width.div_ceil(TILE_SIZE);
        let tiles_y = cam.height.div_ceil(TILE_SIZE);
        let mut tile_lists = vec![Vec::new(); (tiles_x * tiles_y) as usize];
        let ts = T::from_u32(TILE_SIZE).unwrap();
        let clamp_tile = |v: T, n: u32| -> u32 {
            if !(v > T::zero()) {
                0
            } else {
                let t = (v / ts).floor().as_f64();
                if t >= f64::from(n - 1) {
                    n - 1
                } else {
                    t as u32
                }
            }
        };
        for (k, p) in projected.iter().enumerate() {
            let r = p.radius;
            let (x0, x1, y0, y1) = if r.is_finite() {
                let [mx, my] = p.mean2d;
                let w = T::from_u32(cam.width).unwrap();
                let h = T::from_u32(cam.height).unwrap();
                if mx + r < T::zero() || my + r < T::zero() || mx - r > w || my - r > h {
                    continue;
                }
                (clamp_tile(mx - r, tiles_x), clamp_tile(mx + r, tiles_x), clamp_tile(my - r, tiles_y), clamp_tile(my + r, tiles_y))
            } else {
                (0, tiles_x - 1, 0, tiles_y - 1)
            };
            for ty in y0..=y1 {
                for tx in x0..=x1 {
                    tile_lists[(ty * tiles_x + tx) as usize].push(k as u32);
                }
            }
        }
        let splats = projected
            .iter()
            .map(|p| Splat {
                mean: p.mean2d,
                conic: [p.conic.a, p.conic.b, p.conic.c],
                alpha: p.alpha,
                color: p.color,
            })
            .collect();
        Self {
            width: cam.width,
            height: cam.height,
            tiles_x,
            tiles_y,
            splats,
            projected,
            tile_lists,
            cloud_len: cloud.len(),
        }
    }

    /// Pixel rectangle `(x0, y0, x1, y1)` covered by a tile (exclusive end).
    pub(crate) fn tile_rect(&self, tile: usize) -> (u32, u32, u32, u32) {
        let tx = tile as u32 % self.tiles_x;
        let ty = tile as u32 / self.tiles_x;
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        (x0, y0, (x0 + TILE_SIZE).min(self.width), (y0 + TILE_SIZE).min(self.height))
    }
}

/// Gaussian falloff exponent at offset `(dx, dy)` = pixel − mean, or `None`
/// beyond the cutoff.
#[inline]
pub(crate) fn falloff_power<T: Real>(conic: &[T; 3], dx: T, dy: T, cutoff_sq: T) -> Option<T> {
    let maha = conic[0] * dx * dx + T::lit(2.0) * conic[1] * dx * dy + conic[2] * dy * dy;
    if maha > cutoff_sq || !(maha >= T::zero()) {
        return None;
    }
    Some(T::lit(-0.5) * maha)
}

/// Front-to-back compositing of one pixel, calling
/// `visit(slot, k, alpha, t_before)` for each contributing entry, where `slot`
/// is the position in `list` and `k` the index into `projected`. Returns the color sum (without background)
/// and the final transmittance.
#[inline]
pub(crate) fn composite_pixel<T: Real>(
    state: &RasterState<T>,
    list: &[u32],
    px: T,
    py: T,
    cutoff_sq: T,
    mut visit: impl FnMut(usize, usize, T, T),
) -> (Vec3<T>, T) {
    let eps = T::lit(TRANSMITTANCE_EPS);
    let mut t = T::one();
    let mut acc = Vec3::zero();
    for (slot, &k) in list.iter().enumerate() {
        let p = &state.splats[k as usize];
        let dx = px - p.mean[0];
        let dy = py - p.mean[1];
        let Some(power) = falloff_power(&p.conic, dx, dy, cutoff_sq) else {
            continue;
        };
        let a = p.alpha * power.exp();
        if a <= T::zero() {
            continue;
        }
        visit(slot, k as usize, a, t);
        acc += p.color * (a * t);
        t *= T::one() - a;
        if t < eps {
            break;
        }
    }
    (acc, t)
}

/// Composites a prepared state into an image.
pub fn rasterize<T: Real>(state: &RasterState<T>, opts: &RenderOptions<'_, T>) -> RenderedImage<T> {
    let cutoff_sq = opts.cutoff_sigmas * opts.cutoff_sigmas;
    let half = T::lit(0.5);
    let bg = opts.background;
    let tiles: Vec<Vec<(usize, [T; 3], T)>> = (0..state.tile_lists.len())
        .into_par_iter()
        .map(|tile| {
            let (x0, y0, x1, y1) = state.tile_rect(tile);
            let list = &state.tile_lists[tile];
            let mut out = Vec::with_capacity(((x1 - x0) * (y1 - y0)) as usize);
            for y in y0..y1 {
                for x in x0..x1 {
                    let px = T::from_u32(x).unwrap() + half;
                    let py = T::from_u32(y).unwrap() + half;
                    let (acc, t) = composite_pixel(state, list, px, py, cutoff_sq, |_, _, _, _| {});
                    let c = acc + bg * t;
                    let clamp = |v: T| v.max(T::zero()).min(T::one());
                    out.push((
                        (y * state.width + x) as usize,
                        [clamp(c.x), clamp(c.y), clamp(c.z)],
                        clamp(T::one() - t),
                    ));
                }
            }
            out
        })
        .collect();
    let n = state.width as usize * state.height as usize;
    let mut pixels = vec![[T::zero(); 3]; n];
    let mut alpha_accum = vec![T::zero(); n];
    for (idx, rgb, a) in tiles.into_iter().flatten() {
        pixels[idx] = rgb;
        alpha_accum[idx] = a;
    }
    RenderedImage {
        color: Image {
            width: state.width,
            height: state.height,
            pixels,
        },
        alpha_accum,
    }
}

/// Renders `cloud` from `cam`.
pub fn render<T: Real>(cloud: &GaussianCloud<T>, cam: &Camera<T>, opts: &RenderOptions<'_, T>) -> RenderedImage<T> {
    rasterize(&RasterState::build(cloud, cam, opts), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Gaussian;
    use crate::math::{Mat3, Quat};
    use proptest::prelude::*;

    fn cam(w: u32, h: u32) -> Camera<f64> {
        Camera {
            id: "c".into(),
            width: w,
            height: h,
            fx: 40.0 * f64::from(w) / 32.0,
            fy: 40.0 * f64::from(h) / 32.0,
            cx: f64::from(w) / 2.0,
            cy: f64::from(h) / 2.0,
            rotation: Mat3::identity(),
            translation: Vec3::zero(),
            near: 0.1,
            far: 100.0,
        }
    }

    #[test]
    fn empty_cloud_gives_background() {
        let bg = Vec3::new(0.2, 0.4, 0.6);
        let img = render(&GaussianCloud::<f64>::new(0), &cam(32, 32), &RenderOptions::new(bg));
        assert!(img.color.pixels.iter().all(|p| *p == [0.2, 0.4, 0.6]));
        assert!(img.alpha_accum.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn single_gaussian_center_pixel_matches_closed_form() {
        // Mean exactly at the center of pixel (16, 16).
        let z = 3.0;
        let pos = Vec3::new(0.5 * z / 40.0, 0.5 * z / 40.0, z);
        let rgb = Vec3::new(0.9, 0.1, 0.3);
        let g = Gaussian::new(pos, Vec3::splat(0.2), 0.7, rgb);
        let cloud = GaussianCloud::from_gaussians(vec![g], 0);
        let bg = Vec3::new(0.0, 0.5, 1.0);
        let img = render(&cloud, &cam(32, 32), &RenderOptions::new(bg));
        let a = 0.7;
        let px = img.color.get(16, 16);
        for c in 0..3 {
            let expected = a * rgb[c] + (1.0 - a) * bg[c];
            assert!((px[c] - expected).abs() < 1e-12, "{c}: {} vs {expected}", px[c]);
        }
        assert!((img.alpha_accum[16 * 32 + 16] - a).abs() < 1e-12);
    }

    #[test]
    fn opaque_front_hides_back() {
        let mut front = Gaussian::new(Vec3::new(0.0125 * 2.0, 0.0125 * 2.0, 2.0), Vec3::splat(0.5), 0.5, Vec3::splat(1.0));
        front.opacity_logit = 40.0;
        let back = Gaussian::new(Vec3::new(0.0125 * 5.0, 0.0125 * 5.0, 5.0), Vec3::splat(0.5), 0.9, Vec3::new(0.0, 1.0, 0.0));
        let with_back = GaussianCloud::from_gaussians(vec![back, front], 0);
        let without = GaussianCloud::from_gaussians(vec![front], 0);
        let opts = RenderOptions::new(Vec3::zero());
        let a = render(&with_back, &cam(32, 32), &opts).color.get(16, 16);
        let b = render(&without, &cam(32, 32), &opts).color.get(16, 16);
        for c in 0..3 {
            assert!((a[c] - b[c]).abs() < 1e-4);
        }
    }

    fn arb_cloud() -> impl Strategy<Value = Vec<Gaussian<f64>>> {
        prop::collection::vec(
            (
                (-1.0..1.0f64, -1.0..1.0f64, 2.0..6.0f64),
                (-3.0..-0.5f64, -3.0..-0.5f64, -3.0..-0.5f64),
                (0.1..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
                -3.0..3.0f64,
                (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64),
            )
                .prop_map(|(p, s, q, o, c)| Gaussian {
                    position: Vec3::new(p.0, p.1, p.2),
                    log_scale: Vec3::new(s.0, s.1, s.2),
                    rotation: Quat::new(q.0, q.1, q.2, q.3),
                    opacity_logit: o,
                    sh_dc: Vec3::new(c.0, c.1, c.2),
                    sh_rest: [Vec3::zero(); 3],
                }),
            0..12,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn outputs_bounded_and_permutation_invariant(gs in arb_cloud(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let opts = RenderOptions::new(Vec3::new(0.3, 0.6, 0.9));
            let cloud = GaussianCloud::from_gaussians(gs.clone(), 0);
            let img = render(&cloud, &cam(24, 20), &opts);
            for v in img.color.pixels.iter().flatten().chain(&img.alpha_accum) {
                prop_assert!((0.0..=1.0).contains(v));
            }
            let mut shuffled = gs;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let other = render(&GaussianCloud::from_gaussians(shuffled, 0), &cam(24, 20), &opts);
            for (a, b) in img.color.pixels.iter().flatten().zip(other.color.pixels.iter().flatten()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn compositing_order_is_resolution_independent() {
        // At matching sample points, a doubled-resolution render agrees.
        let gs = vec![
            Gaussian::new(Vec3::new(0.1, 0.0, 3.0), Vec3::new(0.3, 0.1, 0.2), 0.8, Vec3::new(1.0, 0.0, 0.0)),
            Gaussian::new(Vec3::new(-0.1, 0.05, 4.0), Vec3::new(0.2, 0.3, 0.2), 0.6, Vec3::new(0.0, 0.0, 1.0)),
        ];
        let cloud = GaussianCloud::from_gaussians(gs, 0);
        let opts = RenderOptions::new(Vec3::zero()).with_cutoff(f64::INFINITY);
        let lo = render(&cloud, &cam(32, 32), &opts);
        let mut hi_cam = cam(64, 64);
        // Shift the principal point so hi-res pixel 2i lands on lo-res pixel i.
        hi_cam.cx -= 0.5;
        hi_cam.cy -= 0.5;
        let hi = render(&cloud, &hi_cam, &opts);
        let lo_c = lo.color.get(12, 14);
        let hi_c = hi.color.get(24, 28);
        for c in 0..3 {
            assert!((lo_c[c] - hi_c[c]).abs() < 0.05);
        }
    }
}
