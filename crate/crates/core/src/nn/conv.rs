//! im2col-based convolution kernels shared by the 2D and 1D layers.

use super::Real;

/// Geometry of one batched cross-correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    /// TF-style "same" padding: output is `ceil(in / stride)`, extra padding
    /// goes to the bottom/right.
    #[allow(clippy::too_many_arguments)]
    pub fn same(
        batch: usize,
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        kh: usize,
        kw: usize,
        stride: usize,
    ) -> Self {
        let out_h = h.div_ceil(stride);
        let out_w = w.div_ceil(stride);
        let pad_h = ((out_h - 1) * stride + kh).saturating_sub(h);
        let pad_w = ((out_w - 1) * stride + kw).saturating_sub(w);
        ConvGeom {
            batch,
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            stride,
            pad_top: pad_h / 2,
            pad_left: pad_w / 2,
            out_h,
            out_w,
        }
    }

    pub fn valid_1d(batch: usize, c_in: usize, len: usize, c_out: usize, k: usize) -> Self {
        ConvGeom {
            batch,
            c_in,
            h: 1,
            w: len,
            c_out,
            kh: 1,
            kw: k,
            stride: 1,
            pad_top: 0,
            pad_left: 0,
            out_h: 1,
            out_w: len + 1 - k,
        }
    }

    pub fn patch_len(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    pub fn out_pixels(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn columns(&self) -> usize {
        self.batch * self.out_pixels()
    }

    /// Input row for output row `oy` and kernel row `ki`, if inside the image.
    #[inline]
    fn src(&self, o: usize, k: usize, pad: usize, limit: usize) -> Option<usize> {
        (o * self.stride + k).checked_sub(pad).filter(|&i| i < limit)
    }

    /// Output columns `lo..hi` whose kernel tap `k` lands inside the row.
    #[inline]
    fn valid_cols(&self, k: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = self.pad_left.saturating_sub(k).div_ceil(s);
        let hi = (self.w + self.pad_left).saturating_sub(k).div_ceil(s).min(self.out_w);
        (lo.min(hi), hi)
    }
}

/// Unfold `input` (`[batch, c_in, h, w]`) into `[c_in*kh*kw, batch*out_h*out_w]`.
pub(crate) fn im2col<T: Real>(input: &[T], g: &ConvGeom) -> Vec<T> {
    let cols = g.columns();
    let ohw = g.out_pixels();
    let mut out = vec![T::zero(); g.patch_len() * cols];
    for ci in 0..g.c_in {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let (lo, hi) = g.valid_cols(kj);
                let row = (ci * g.kh + ki) * g.kw + kj;
                let dst_row = &mut out[row * cols..(row + 1) * cols];
                for n in 0..g.batch {
                    let plane = &input[(n * g.c_in + ci) * g.h * g.w..][..g.h * g.w];
                    let dst = &mut dst_row[n * ohw..(n + 1) * ohw];
                    for oy in 0..g.out_h {
                        let Some(iy) = g.src(oy, ki, g.pad_top, g.h) else {
                            continue;
                        };
                        let src_row = &plane[iy * g.w..(iy + 1) * g.w];
                        let dst_line = &mut dst[oy * g.out_w + lo..oy * g.out_w + hi];
                        let first = lo * g.stride + kj - g.pad_left;
                        for (d, &v) in dst_line.iter_mut().zip(src_row[first..].iter().step_by(g.stride)) {
                            *d = v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: scatter-add columns back into `[batch, c_in, h, w]`.
pub(crate) fn col2im_add<T: Real>(cols_buf: &[T], g: &ConvGeom, dinput: &mut [T]) {
    let cols = g.columns();
    let ohw = g.out_pixels();
    for ci in 0..g.c_in {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let (lo, hi) = g.valid_cols(kj);
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src_row = &cols_buf[row * cols..(row + 1) * cols];
                for n in 0..g.batch {
                    let plane = &mut dinput[(n * g.c_in + ci) * g.h * g.w..][..g.h * g.w];
                    let src = &src_row[n * ohw..(n + 1) * ohw];
                    for oy in 0..g.out_h {
                        let Some(iy) = g.src(oy, ki, g.pad_top, g.h) else {
                            continue;
                        };
                        let dst_row = &mut plane[iy * g.w..(iy + 1) * g.w];
                        let src_line = &src[oy * g.out_w + lo..oy * g.out_w + hi];
                        let first = lo * g.stride + kj - g.pad_left;
                        for (d, &s) in dst_row[first..].iter_mut().step_by(g.stride).zip(src_line) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }
}

/// Forward pass; returns the output in `[batch, c_out, out_h, out_w]` layout
/// plus the unfolded input for reuse in the backward pass.
pub(crate) fn forward<T: Real>(input: &[T], weight: &[T], bias: &[T], g: &ConvGeom) -> (Vec<T>, Vec<T>) {
    let cols = im2col(input, g);
    let n_cols = g.columns();
    let mut mat = vec![T::zero(); g.c_out * n_cols];
    T::gemm(
        false,
        false,
        g.c_out,
        n_cols,
        g.patch_len(),
        T::one(),
        weight,
        &cols,
        T::zero(),
        &mut mat,
    );
    let ohw = g.out_pixels();
    let mut out = vec![T::zero(); g.batch * g.c_out * ohw];
    for co in 0..g.c_out {
        let b = bias[co];
        for n in 0..g.batch {
            let src = &mat[co * n_cols + n * ohw..][..ohw];
            let dst = &mut out[(n * g.c_out + co) * ohw..][..ohw];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = s + b;
            }
        }
    }
    (out, cols)
}

pub(crate) struct ConvGrads<T> {
    pub input: Option<Vec<T>>,
    pub weight: Option<Vec<T>>,
    pub bias: Option<Vec<T>>,
}

pub(crate) fn backward<T: Real>(
    dout: &[T],
    cols: &[T],
    weight: &[T],
    g: &ConvGeom,
    want: [bool; 3],
) -> ConvGrads<T> {
    let [want_input, want_weight, want_bias] = want;
    let n_cols = g.columns();
    let ohw = g.out_pixels();
    let mut dmat = vec![T::zero(); g.c_out * n_cols];
    for co in 0..g.c_out {
        for n in 0..g.batch {
            let src = &dout[(n * g.c_out + co) * ohw..][..ohw];
            dmat[co * n_cols + n * ohw..][..ohw].copy_from_slice(src);
        }
    }
    let weight_grad = want_weight.then(|| {
        let mut dw = vec![T::zero(); g.c_out * g.patch_len()];
        T::gemm(
            false,
            true,
            g.c_out,
            g.patch_len(),
            n_cols,
            T::one(),
            &dmat,
            cols,
            T::zero(),
            &mut dw,
        );
        dw
    });
    let bias_grad = want_bias.then(|| {
        (0..g.c_out)
            .map(|co| dmat[co * n_cols..(co + 1) * n_cols].iter().copied().sum())
            .collect()
    });
    let input_grad = want_input.then(|| {
        let mut dcols = vec![T::zero(); g.patch_len() * n_cols];
        T::gemm(
            true,
            false,
            g.patch_len(),
            n_cols,
            g.c_out,
            T::one(),
            weight,
            &dmat,
            T::zero(),
            &mut dcols,
        );
        let mut dx = vec![T::zero(); g.batch * g.c_in * g.h * g.w];
        col2im_add(&dcols, g, &mut dx);
        dx
    });
    ConvGrads {
        input: input_grad,
        weight: weight_grad,
        bias: bias_grad,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_geometry() {
        let g = ConvGeom::same(1, 3, 64, 64, 8, 5, 5, 2);
        assert_eq!((g.out_h, g.out_w), (32, 32));
        assert_eq!((g.pad_top, g.pad_left), (1, 1));
        let g = ConvGeom::same(1, 1, 3, 3, 1, 3, 3, 1);
        assert_eq!((g.out_h, g.pad_top), (3, 1));
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let g = ConvGeom::same(2, 2, 5, 4, 1, 3, 3, 2);
        let x: Vec<f64> = (0..2 * 2 * 5 * 4).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let y: Vec<f64> = (0..g.patch_len() * g.columns()).map(|i| ((i * 3) % 13) as f64 - 6.0).collect();
        let ax = im2col(&x, &g);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut aty = vec![0.0; x.len()];
        col2im_add(&y, &g, &mut aty);
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
