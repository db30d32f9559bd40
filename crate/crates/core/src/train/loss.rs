use crate::error::Result;
use crate::image::Image;
use crate::metrics::ssim_with_grad;
use crate::scalar::Real;

/// `(1 − λ)·L1 + λ·(1 − SSIM)` and its gradient with respect to `rendered`.
/// L1 is the mean absolute difference over pixels and channels.
pub fn loss<T: Real>(rendered: &Image<T>, target: &Image<T>, ssim_weight: T) -> Result<(T, Image<T>)> {
    rendered.check_shape(target)?;
    let n = T::from_usize_lossy(rendered.len() * 3);
    let l1_w = T::one() - ssim_weight;
    let mut l1 = T::zero();
    let mut grad = vec![[T::zero(); 3]; rendered.len()];
    for ((r, t), g) in rendered.pixels.iter().zip(&target.pixels).zip(grad.iter_mut()) {
        for c in 0..3 {
            let d = r[c] - t[c];
            l1 += d.abs();
            let sign = if d > T::zero() {
                T::one()
            } else if d < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            g[c] = l1_w * sign / n;
        }
    }
    let mut value = l1_w * l1 / n;
    if ssim_weight > T::zero() {
        let (s, ds) = ssim_with_grad(rendered, target)?;
        value += ssim_weight * (T::one() - s);
        for (g, d) in grad.iter_mut().zip(&ds) {
            for c in 0..3 {
                g[c] -= ssim_weight * d[c];
            }
        }
    }
    let grad = Image {
        width: rendered.width,
        height: rendered.height,
        pixels: grad,
    };
    Ok((value, grad))
}
