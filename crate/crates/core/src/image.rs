//! Float RGB images and 8-bit PNG persistence.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major RGB image with linear float channels, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[T; 3]>,
}

impl<T: Real> Image<T> {
    pub fn filled(width: u32, height: u32, rgb: [T; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![rgb; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<[T; 3]>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::param(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [T; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn same_shape<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_shape<U>(&self, other: &Image<U>) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::param(format!(
                "image dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// One channel as a contiguous plane.
    pub fn channel(&self, c: usize) -> Vec<T> {
        self.pixels.iter().map(|p| p[c]).collect()
    }

    pub fn cast<U: Real>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|p| [U::lit(p[0].as_f64()), U::lit(p[1].as_f64()), U::lit(p[2].as_f64())])
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pixels.iter().flatten().all(|v| v.is_finite())
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let mut buf = image::RgbImage::new(self.width, self.height);
        for (dst, src) in buf.pixels_mut().zip(&self.pixels) {
            for c in 0..3 {
                let v = src[c].as_f64().clamp(0.0, 1.0);
                dst.0[c] = (v * 255.0).round() as u8;
            }
        }
        buf
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let scale = 1.0 / 255.0;
        Self {
            width: img.width(),
            height: img.height(),
            pixels: img
                .pixels()
                .map(|p| [0, 1, 2].map(|c| T::lit(f64::from(p.0[c]) * scale)))
                .collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb8().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        Ok(Self::from_rgb8(&img))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_roundtrip_quantizes_to_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = Image::from_pixels(2, 1, vec![[0.0f32, 0.5, 1.0], [0.2, 0.7, 0.9]]).unwrap();
        img.save_png(&path).unwrap();
        let back = Image::<f32>::load_png(&path).unwrap();
        assert!(img.same_shape(&back));
        for (a, b) in img.pixels.iter().flatten().zip(back.pixels.iter().flatten()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn pixel_count_is_checked() {
        assert!(Image::<f64>::from_pixels(2, 2, vec![[0.0; 3]; 3]).is_err());
    }
}
