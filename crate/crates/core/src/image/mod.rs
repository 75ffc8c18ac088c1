//! RGB images in `[0, 1]`, file I/O, resizing and quality metrics.

pub mod io;
mod metrics;
mod resize;

pub use io::{load_image, save_image};
pub use metrics::{mse, psnr, ssim, PSNR_CAP};
pub use resize::resize_bicubic;

use crate::error::{Error, Result};

/// Rec. 601 luma weights, used wherever a luminance is needed.
pub const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

#[inline]
pub fn luminance(px: [f32; 3]) -> f32 {
    LUMA[0] * px[0] + LUMA[1] * px[1] + LUMA[2] * px[2]
}

/// Row-major interleaved RGB image, sRGB-encoded, every value in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    /// Build from interleaved RGB values. Values are checked, not clamped.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image size {width}x{height} is empty")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::shape("image", &[height, width, 3], &[data.len()]));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Image { width, height, data })
    }

    /// Build from arbitrary reals, clamping into `[0, 1]`. NaN becomes 0.
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self> {
        for v in data.iter_mut() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f32; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Per-pixel luminance plane.
    pub fn luma(&self) -> Vec<f32> {
        self.pixels().map(luminance).collect()
    }

    pub fn mean_luminance(&self) -> f64 {
        self.pixels().map(|p| luminance(p) as f64).sum::<f64>() / (self.width * self.height) as f64
    }

    /// Apply `f` to every pixel and clamp the result.
    pub fn map_pixels(&self, mut f: impl FnMut([f32; 3]) -> [f32; 3]) -> Image {
        let mut data = Vec::with_capacity(self.data.len());
        for px in self.pixels() {
            let out = f(px);
            data.extend(out.iter().map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }));
        }
        Image {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Planar `[3, H, W]` copy, the layout the networks consume.
    pub fn to_planar(&self) -> Vec<f32> {
        let n = self.width * self.height;
        let mut out = vec![0.0; 3 * n];
        for (i, px) in self.pixels().enumerate() {
            out[i] = px[0];
            out[n + i] = px[1];
            out[2 * n + i] = px[2];
        }
        out
    }

    /// `eps * self + (1 - eps) * other`, the straight line between two images.
    pub fn interpolate(&self, other: &Image, eps: f32) -> Result<Image> {
        if self.dims() != other.dims() {
            return Err(Error::shape(
                "interpolate",
                &[self.height, self.width],
                &[other.height, other.width],
            ));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::invalid(format!("interpolation weight {eps} outside [0, 1]")));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (eps * a + (1.0 - eps) * b).clamp(0.0, 1.0))
            .collect();
        Ok(Image {
            width: self.width,
            height: self.height,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_bad_lengths() {
        assert!(Image::new(1, 1, vec![0.0, 0.5, 1.5]).is_err());
        assert!(Image::new(2, 1, vec![0.0; 3]).is_err());
        assert!(Image::new(0, 1, vec![]).is_err());
        assert!(Image::new(1, 1, vec![f32::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn interpolate_endpoints_and_midpoint() {
        let y = Image::filled(3, 2, [0.0; 3]).unwrap();
        let yp = Image::filled(3, 2, [1.0; 3]).unwrap();
        assert_eq!(y.interpolate(&yp, 1.0).unwrap(), y);
        assert_eq!(y.interpolate(&yp, 0.0).unwrap(), yp);
        let mid = y.interpolate(&yp, 0.5).unwrap();
        assert!(mid.data().iter().all(|&v| v == 0.5));
        let other = Image::filled(2, 2, [0.0; 3]).unwrap();
        assert!(y.interpolate(&other, 0.5).is_err());
    }

    #[test]
    fn planar_layout() {
        let img = Image::new(2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert_eq!(img.to_planar(), vec![0.1, 0.4, 0.2, 0.5, 0.3, 0.6]);
    }
}
