use super::Image;
use crate::error::{Error, Result};

const CUBIC_A: f64 = -0.5;

/// Catmull-Rom cubic convolution kernel.
fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Per output sample: source indices (edge-clamped) and normalized weights.
struct Taps {
    index: Vec<usize>,
    weight: Vec<f32>,
    offsets: Vec<usize>,
}

impl Taps {
    fn new(src: usize, dst: usize) -> Self {
        let scale = src as f64 / dst as f64;
        // Widen the kernel when shrinking so every source pixel contributes.
        let stretch = scale.max(1.0);
        let support = 2.0 * stretch;
        let mut taps = Taps {
            index: Vec::new(),
            weight: Vec::new(),
            offsets: vec![0],
        };
        for i in 0..dst {
            let center = (i as f64 + 0.5) * scale;
            let lo = (center - support).floor() as isize;
            let hi = (center + support).ceil() as isize;
            let start = taps.weight.len();
            let mut total = 0.0;
            let mut ws = Vec::new();
            for j in lo..=hi {
                let w = cubic((j as f64 + 0.5 - center) / stretch);
                if w != 0.0 {
                    ws.push((j.clamp(0, src as isize - 1) as usize, w));
                    total += w;
                }
            }
            for (j, w) in ws {
                taps.index.push(j);
                taps.weight.push((w / total) as f32);
            }
            debug_assert!(taps.weight.len() > start);
            taps.offsets.push(taps.weight.len());
        }
        taps
    }

    fn get(&self, i: usize) -> impl Iterator<Item = (usize, f32)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.index[r.clone()].iter().copied().zip(self.weight[r].iter().copied())
    }
}

/// Separable Catmull-Rom (a = -0.5) resize with edge clamping; the kernel
/// is widened by the shrink factor when downsampling. Output is clamped
/// to `[0, 1]`.
pub fn resize_bicubic(image: &Image, new_w: usize, new_h: usize) -> Result<Image> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::invalid(format!("resize target {new_w}x{new_h} is empty")));
    }
    let (w, h) = image.dims();
    if (w, h) == (new_w, new_h) {
        return Ok(image.clone());
    }
    let src = image.data();
    let xt = Taps::new(w, new_w);
    let yt = Taps::new(h, new_h);

    let mut rows = vec![0.0f32; h * new_w * 3];
    for y in 0..h {
        let line = &src[y * w * 3..(y + 1) * w * 3];
        let out = &mut rows[y * new_w * 3..(y + 1) * new_w * 3];
        for x in 0..new_w {
            let mut acc = [0.0f32; 3];
            for (j, wt) in xt.get(x) {
                for c in 0..3 {
                    acc[c] += wt * line[j * 3 + c];
                }
            }
            out[x * 3..x * 3 + 3].copy_from_slice(&acc);
        }
    }

    let mut out = vec![0.0f32; new_h * new_w * 3];
    let stride = new_w * 3;
    for y in 0..new_h {
        let dst = &mut out[y * stride..(y + 1) * stride];
        for (j, wt) in yt.get(y) {
            let line = &rows[j * stride..(j + 1) * stride];
            for (d, &s) in dst.iter_mut().zip(line) {
                *d += wt * s;
            }
        }
    }
    Image::from_clamped(new_w, new_h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook bicubic: four taps around `(x + 0.5) * scale - 0.5`,
    /// edge-clamped, no kernel widening. Only valid for upsampling.
    fn oracle_upsample(img: &Image, nw: usize, nh: usize) -> Vec<f64> {
        let (w, h) = img.dims();
        let k = |t: f64| {
            let t = t.abs();
            let a = -0.5;
            if t <= 1.0 {
                (a + 2.0) * t.powi(3) - (a + 3.0) * t * t + 1.0
            } else if t < 2.0 {
                a * t.powi(3) - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
            } else {
                0.0
            }
        };
        let mut out = Vec::new();
        for y in 0..nh {
            for x in 0..nw {
                let sx = (x as f64 + 0.5) * w as f64 / nw as f64 - 0.5;
                let sy = (y as f64 + 0.5) * h as f64 / nh as f64 - 0.5;
                let (fx, fy) = (sx.floor() as isize, sy.floor() as isize);
                for c in 0..3 {
                    let mut acc = 0.0;
                    for j in fy - 1..=fy + 2 {
                        for i in fx - 1..=fx + 2 {
                            let px = img.pixel(i.clamp(0, w as isize - 1) as usize, j.clamp(0, h as isize - 1) as usize);
                            acc += k(sx - i as f64) * k(sy - j as f64) * px[c] as f64;
                        }
                    }
                    out.push(acc.clamp(0.0, 1.0));
                }
            }
        }
        out
    }

    #[test]
    fn kernel_interpolates() {
        assert_eq!(cubic(0.0), 1.0);
        assert_eq!(cubic(1.0), 0.0);
        assert_eq!(cubic(2.0), 0.0);
        assert!((cubic(0.5) - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_matches_oracle() {
        let img = Image::new(2, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let out = resize_bicubic(&img, 4, 4).unwrap();
        let want = oracle_upsample(&img, 4, 4);
        for (a, b) in out.data().iter().zip(&want) {
            assert!((*a as f64 - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn constants_preserved_both_ways() {
        let img = Image::filled(9, 7, [0.2, 0.6, 0.9]).unwrap();
        for (w, h) in [(3, 2), (20, 31), (9, 7), (1, 1)] {
            let out = resize_bicubic(&img, w, h).unwrap();
            for px in out.pixels() {
                for (a, b) in px.iter().zip([0.2, 0.6, 0.9]) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn same_size_is_identity_and_zero_is_rejected() {
        let img = Image::new(2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert_eq!(resize_bicubic(&img, 2, 1).unwrap(), img);
        assert!(resize_bicubic(&img, 0, 3).is_err());
    }

    #[test]
    fn overshoot_is_clamped() {
        let mut data = vec![0.0; 8 * 3];
        data[12..].iter_mut().for_each(|v| *v = 1.0);
        let img = Image::new(8, 1, data).unwrap();
        let out = resize_bicubic(&img, 37, 3).unwrap();
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
