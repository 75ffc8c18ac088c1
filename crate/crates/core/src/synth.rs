//! Procedural "photos" for experiments: each scene is a continuous function
//! of normalized coordinates, so it can be rendered at any resolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{luminance, Image};

/// Brightness factor of the toy source domain.
pub const DARKEN: f32 = 0.5;
/// Chroma factor of the toy source domain.
pub const DESATURATE: f32 = 0.7;

#[derive(Clone, Copy, Debug)]
struct Blob {
    cx: f32,
    cy: f32,
    rx: f32,
    ry: f32,
    color: [f32; 3],
}

#[derive(Clone, Copy, Debug)]
struct Wave {
    fx: f32,
    fy: f32,
    phase: f32,
    amp: f32,
}

#[derive(Clone, Debug)]
struct Scene {
    sky_top: [f32; 3],
    sky_bottom: [f32; 3],
    ground_near: [f32; 3],
    ground_far: [f32; 3],
    horizon: f32,
    tilt: f32,
    blobs: Vec<Blob>,
    waves: Vec<Wave>,
}

fn hsv(h: f32, s: f32, v: f32) -> [f32; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h6 % 2.0 - 1.0).abs());
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn lerp3(a: [f32; 3], b: [f32; 3], t: f32) -> [f32; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn smoothstep(lo: f32, hi: f32, x: f32) -> f32 {
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl Scene {
    fn random(rng: &mut ChaCha8Rng) -> Scene {
        let sky_hue = rng.gen_range(0.5..0.7);
        let warm = rng.gen_bool(0.3);
        let sky_top = hsv(sky_hue, rng.gen_range(0.45..0.8), rng.gen_range(0.65..0.9));
        let sky_bottom = if warm {
            hsv(rng.gen_range(0.02..0.12), rng.gen_range(0.35..0.6), rng.gen_range(0.8..0.95))
        } else {
            hsv(sky_hue, rng.gen_range(0.15..0.35), rng.gen_range(0.8..0.95))
        };
        let ground_hue = rng.gen_range(0.05..0.38);
        let ground_near = hsv(ground_hue, rng.gen_range(0.45..0.85), rng.gen_range(0.4..0.65));
        let ground_far = hsv(ground_hue + rng.gen_range(-0.05..0.05), rng.gen_range(0.3..0.6), rng.gen_range(0.55..0.8));
        let blobs = (0..rng.gen_range(2..6))
            .map(|_| Blob {
                cx: rng.gen_range(0.1..0.9),
                cy: rng.gen_range(0.2..0.9),
                rx: rng.gen_range(0.06..0.2),
                ry: rng.gen_range(0.06..0.2),
                color: hsv(rng.gen(), rng.gen_range(0.5..0.9), rng.gen_range(0.5..0.95)),
            })
            .collect();
        let waves = (0..3)
            .map(|_| Wave {
                fx: rng.gen_range(1.0..6.0),
                fy: rng.gen_range(1.0..6.0),
                phase: rng.gen_range(0.0..std::f32::consts::TAU),
                amp: rng.gen_range(0.02..0.06),
            })
            .collect();
        Scene {
            sky_top,
            sky_bottom,
            ground_near,
            ground_far,
            horizon: rng.gen_range(0.35..0.65),
            tilt: rng.gen_range(-0.1..0.1),
            blobs,
            waves,
        }
    }

    fn color(&self, u: f32, v: f32) -> [f32; 3] {
        let horizon = self.horizon + self.tilt * (u - 0.5);
        let mut c = if v < horizon {
            lerp3(self.sky_top, self.sky_bottom, (v / horizon).clamp(0.0, 1.0))
        } else {
            let t = ((v - horizon) / (1.0 - horizon).max(1e-3)).clamp(0.0, 1.0);
            let g = lerp3(self.ground_far, self.ground_near, t);
            let tex: f32 = self
                .waves
                .iter()
                .map(|w| w.amp * (std::f32::consts::TAU * (w.fx * u + w.fy * v) + w.phase).sin())
                .sum();
            g.map(|x| x + tex)
        };
        for b in &self.blobs {
            let d = (((u - b.cx) / b.rx).powi(2) + ((v - b.cy) / b.ry).powi(2)).sqrt();
            let a = 1.0 - smoothstep(0.7, 1.0, d);
            if a > 0.0 {
                let shade = 1.0 - 0.25 * ((v - b.cy) / b.ry).clamp(-1.0, 1.0);
                c = lerp3(c, b.color.map(|x| x * shade), a);
            }
        }
        c
    }
}

/// Deterministic family of scenes: scene `index` of generator `seed` is
/// always the same picture.
#[derive(Clone, Copy, Debug)]
pub struct SceneGenerator {
    seed: u64,
}

impl SceneGenerator {
    pub fn new(seed: u64) -> Self {
        SceneGenerator { seed }
    }

    /// Render scene `index` at `size x size` (one sample per pixel centre).
    pub fn render(&self, index: u64, size: usize) -> Image {
        self.render_rect(index, size, size)
    }

    pub fn render_rect(&self, index: u64, width: usize, height: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let scene = Scene::random(&mut rng);
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                let u = (x as f32 + 0.5) / width as f32;
                let v = (y as f32 + 0.5) / height as f32;
                data.extend(scene.color(u, v));
            }
        }
        Image::from_clamped(width, height, data).expect("positive size")
    }
}

/// Scale chroma around luminance by `chroma`, then brightness by `gain`.
pub fn degrade(image: &Image, gain: f32, chroma: f32) -> Image {
    image.map_pixels(|px| {
        let l = luminance(px);
        px.map(|v| (l + (v - l) * chroma) * gain)
    })
}

/// The toy source-domain distortion: darker and duller.
pub fn distort(image: &Image) -> Image {
    degrade(image, DARKEN, DESATURATE)
}
