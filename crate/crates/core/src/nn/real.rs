use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the engine can run on. Training uses `f32`, gradient checks `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    /// Short type name used in diagnostics.
    const NAME: &'static str;

    /// `c = alpha * op(a) * op(b) + beta * c` on row-major buffers, where
    /// `op(a)` is `m x k` and `op(b)` is `k x n`. With `trans_a` the buffer
    /// `a` holds `k x m`; with `trans_b` the buffer `b` holds `n x k`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        trans_a: bool,
        trans_b: bool,
        m: usize,
        n: usize,
        k: usize,
        alpha: Self,
        a: &[Self],
        b: &[Self],
        beta: Self,
        c: &mut [Self],
    );

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

fn strides(trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize) -> [isize; 4] {
    let (rsa, csa) = if trans_a { (1, m) } else { (k, 1) };
    let (rsb, csb) = if trans_b { (1, k) } else { (n, 1) };
    [rsa as isize, csa as isize, rsb as isize, csb as isize]
}

macro_rules! impl_real {
    ($t:ty, $name:literal, $kernel:path) => {
        impl Real for $t {
            const NAME: &'static str = $name;

            fn gemm(
                trans_a: bool,
                trans_b: bool,
                m: usize,
                n: usize,
                k: usize,
                alpha: Self,
                a: &[Self],
                b: &[Self],
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k, "gemm: lhs buffer too small");
                assert!(b.len() >= k * n, "gemm: rhs buffer too small");
                assert!(c.len() >= m * n, "gemm: output buffer too small");
                if m == 0 || n == 0 {
                    return;
                }
                if k == 0 {
                    for v in c[..m * n].iter_mut() {
                        *v = if beta == 0.0 { 0.0 } else { *v * beta };
                    }
                    return;
                }
                let [rsa, csa, rsb, csb] = strides(trans_a, trans_b, m, n, k);
                // SAFETY: the asserts above bound every index the kernel touches
                // given these strides, and `c` does not alias `a` or `b`.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_real!(f32, "f32", matrixmultiply::sgemm);
impl_real!(f64, "f64", matrixmultiply::dgemm);
