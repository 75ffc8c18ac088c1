//! Separable neighborhood operators on single planes, edge-clamped.

fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Run `f` over every row, then every column, of a `w x h` plane.
fn separable(plane: &[f32], w: usize, h: usize, f: impl Fn(&[f32], &mut [f32])) -> Vec<f32> {
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        f(&plane[y * w..(y + 1) * w], &mut tmp[y * w..(y + 1) * w]);
    }
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    let mut out = vec![0.0; w * h];
    for x in 0..w {
        for y in 0..h {
            col[y] = tmp[y * w + x];
        }
        f(&col, &mut col_out);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    out
}

/// Gaussian blur with standard deviation `sigma`, truncated at 3 sigma.
pub fn gaussian_blur(plane: &[f32], w: usize, h: usize, sigma: f32) -> Vec<f32> {
    let half = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f32> = (-half..=half)
        .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f32 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    separable(plane, w, h, |src, dst| {
        let n = src.len();
        for (i, d) in dst.iter_mut().enumerate() {
            *d = taps
                .iter()
                .enumerate()
                .map(|(j, &t)| t * src[clamp_index(i as isize + j as isize - half, n)])
                .sum();
        }
    })
}

/// Mean over a `(2r+1)^2` window.
pub fn box_blur(plane: &[f32], w: usize, h: usize, radius: usize) -> Vec<f32> {
    let r = radius as isize;
    let norm = 1.0 / (2 * radius + 1) as f32;
    separable(plane, w, h, |src, dst| {
        let n = src.len();
        let mut acc: f32 = (-r..=r).map(|j| src[clamp_index(j, n)]).sum();
        for (i, d) in dst.iter_mut().enumerate() {
            *d = acc * norm;
            let i = i as isize;
            acc += src[clamp_index(i + r + 1, n)] - src[clamp_index(i - r, n)];
        }
    })
}

/// Minimum over a `(2r+1)^2` window.
pub fn min_filter(plane: &[f32], w: usize, h: usize, radius: usize) -> Vec<f32> {
    let r = radius as isize;
    separable(plane, w, h, |src, dst| {
        let n = src.len();
        for (i, d) in dst.iter_mut().enumerate() {
            let i = i as isize;
            *d = (i - r..=i + r)
                .map(|j| src[clamp_index(j, n)])
                .fold(f32::INFINITY, f32::min);
        }
    })
}
