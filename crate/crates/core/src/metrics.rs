//! Image quality metrics.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Real;

/// Side length of the SSIM window.
pub const SSIM_WINDOW: usize = 11;
/// Standard deviation of the SSIM Gaussian window, in pixels.
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Peak signal-to-noise ratio in dB for a dynamic range of 1.
/// Identical images give `+∞`.
pub fn psnr<T: Real>(img: &Image<T>, reference: &Image<T>) -> Result<T> {
    img.check_shape(reference)?;
    if img.is_empty() {
        return Err(Error::param("PSNR of an empty image"));
    }
    let mse = mse(img, reference);
    if mse == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::lit(-10.0) * mse.log10())
}

fn mse<T: Real>(a: &Image<T>, b: &Image<T>) -> T {
    let sum: T = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]) * (p[c] - q[c])).sum::<T>())
        .sum();
    sum / T::from_usize_lossy(a.len() * 3)
}

/// Mean structural similarity over all fully contained 11x11 windows,
/// averaged over channels.
pub fn ssim<T: Real>(img: &Image<T>, reference: &Image<T>) -> Result<T> {
    Ok(ssim_impl(img, reference, false)?.0)
}

/// SSIM together with its gradient with respect to `img`.
pub fn ssim_with_grad<T: Real>(img: &Image<T>, reference: &Image<T>) -> Result<(T, Vec<[T; 3]>)> {
    ssim_impl(img, reference, true)
}

fn window<T: Real>() -> [T; SSIM_WINDOW] {
    let mut k = [T::zero(); SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    let raw: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            let v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            sum += v;
            v
        })
        .collect();
    for (dst, v) in k.iter_mut().zip(raw) {
        *dst = T::lit(v / sum);
    }
    k
}

/// Separable "valid" correlation: output is `(w-10) x (h-10)`.
fn filter_valid<T: Real>(src: &[T], w: usize, h: usize, k: &[T; SSIM_WINDOW]) -> Vec<T> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut tmp = vec![T::zero(); ow * h];
    for (row, dst) in src.chunks_exact(w).zip(tmp.chunks_exact_mut(ow)) {
        for (i, &kv) in k.iter().enumerate() {
            for (d, &s) in dst.iter_mut().zip(&row[i..i + ow]) {
                *d += kv * s;
            }
        }
    }
    let mut out = vec![T::zero(); ow * oh];
    for (y, dst) in out.chunks_exact_mut(ow).enumerate() {
        for (i, &kv) in k.iter().enumerate() {
            for (d, &s) in dst.iter_mut().zip(&tmp[(y + i) * ow..(y + i + 1) * ow]) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: scatters a `(w-10) x (h-10)` map back to `w x h`.
fn filter_valid_adjoint<T: Real>(src: &[T], w: usize, h: usize, k: &[T; SSIM_WINDOW]) -> Vec<T> {
    let ow = w + 1 - SSIM_WINDOW;
    let mut tmp = vec![T::zero(); ow * h];
    for (y, row) in src.chunks_exact(ow).enumerate() {
        for (i, &kv) in k.iter().enumerate() {
            for (d, &s) in tmp[(y + i) * ow..(y + i + 1) * ow].iter_mut().zip(row) {
                *d += kv * s;
            }
        }
    }
    let mut out = vec![T::zero(); w * h];
    for (row, dst) in tmp.chunks_exact(ow).zip(out.chunks_exact_mut(w)) {
        for (i, &kv) in k.iter().enumerate() {
            for (d, &s) in dst[i..i + ow].iter_mut().zip(row) {
                *d += kv * s;
            }
        }
    }
    out
}

fn ssim_impl<T: Real>(img: &Image<T>, reference: &Image<T>, want_grad: bool) -> Result<(T, Vec<[T; 3]>)> {
    img.check_shape(reference)?;
    let (w, h) = (img.width as usize, img.height as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::param(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let k = window::<T>();
    let c1 = T::lit(SSIM_K1 * SSIM_K1);
    let c2 = T::lit(SSIM_K2 * SSIM_K2);
    let two = T::lit(2.0);
    let n_win = (w + 1 - SSIM_WINDOW) * (h + 1 - SSIM_WINDOW);
    let norm = T::one() / T::from_usize_lossy(n_win * 3);

    let mut total = T::zero();
    let mut grad = if want_grad { vec![[T::zero(); 3]; w * h] } else { Vec::new() };
    for ch in 0..3 {
        let x = img.channel(ch);
        let y = reference.channel(ch);
        let xx: Vec<T> = x.iter().map(|v| *v * *v).collect();
        let yy: Vec<T> = y.iter().map(|v| *v * *v).collect();
        let xy: Vec<T> = x.iter().zip(&y).map(|(a, b)| *a * *b).collect();
        let mu_x = filter_valid(&x, w, h, &k);
        let mu_y = filter_valid(&y, w, h, &k);
        let e_xx = filter_valid(&xx, w, h, &k);
        let e_yy = filter_valid(&yy, w, h, &k);
        let e_xy = filter_valid(&xy, w, h, &k);

        let mut da = vec![T::zero(); if want_grad { n_win } else { 0 }];
        let mut db = da.clone();
        let mut dc = da.clone();
        for p in 0..n_win {
            let (mx, my) = (mu_x[p], mu_y[p]);
            let sxx = e_xx[p] - mx * mx;
            let syy = e_yy[p] - my * my;
            let sxy = e_xy[p] - mx * my;
            let n1 = two * mx * my + c1;
            let n2 = two * sxy + c2;
            let d1 = mx * mx + my * my + c1;
            let d2 = sxx + syy + c2;
            let s = n1 * n2 / (d1 * d2);
            total += s;
            if want_grad {
                let ds_dmx = two * my * n2 / (d1 * d2) - s * two * mx / d1;
                let ds_dsxx = -s / d2;
                let ds_dsxy = two * n1 / (d1 * d2);
                // Collected so that dS/dx_q = Σ_p w[q−p] (a_p + 2 x_q b_p + y_q c_p).
                da[p] = ds_dmx - two * ds_dsxx * mx - ds_dsxy * my;
                db[p] = ds_dsxx;
                dc[p] = ds_dsxy;
            }
        }
        if want_grad {
            let ga = filter_valid_adjoint(&da, w, h, &k);
            let gb = filter_valid_adjoint(&db, w, h, &k);
            let gc = filter_valid_adjoint(&dc, w, h, &k);
            for q in 0..w * h {
                grad[q][ch] = norm * (ga[q] + two * x[q] * gb[q] + y[q] * gc[q]);
            }
        }
    }
    Ok((total * norm, grad))
}
