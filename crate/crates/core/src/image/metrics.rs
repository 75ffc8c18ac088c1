use super::Image;
use crate::error::{Error, Result};

/// PSNR reported for (near-)identical images.
pub const PSNR_CAP: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_dims(op: &'static str, a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() {
        let (aw, ah) = a.dims();
        let (bw, bh) = b.dims();
        return Err(Error::shape(op, &[ah, aw], &[bh, bw]));
    }
    Ok(())
}

/// Mean over all `H * W * 3` values of the squared difference.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_dims("mse", a, b)?;
    let total: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(total / a.data().len() as f64)
}

/// `10 log10(1 / mse)` for unit peak, capped at [`PSNR_CAP`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let m = mse(a, b)?;
    if m < 1e-10 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP))
}

fn gaussian_window(size: usize) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Separable weighted mean over every fully contained window.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Structural similarity on luminance: 11x11 Gaussian window (sigma 1.5,
/// shrunk to the image for tiny inputs), K1 = 0.01, K2 = 0.03, averaged
/// over all valid window positions.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_dims("ssim", a, b)?;
    let (w, h) = a.dims();
    let x: Vec<f64> = a.luma().into_iter().map(f64::from).collect();
    let y: Vec<f64> = b.luma().into_iter().map(f64::from).collect();
    let k = gaussian_window(SSIM_WINDOW.min(w).min(h));

    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mu_x = filter_valid(&x, w, h, &k);
    let mu_y = filter_valid(&y, w, h, &k);
    let e_xx = filter_valid(&xx, w, h, &k);
    let e_yy = filter_valid(&yy, w, h, &k);
    let e_xy = filter_valid(&xy, w, h, &k);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let sxx = e_xx[i] - mx * mx;
        let syy = e_yy[i] - my * my;
        let sxy = e_xy[i] - mx * my;
        let num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
        let den = (mx * mx + my * my + c1) * (sxx + syy + c2);
        total += num / den;
    }
    Ok(total / mu_x.len() as f64)
}
