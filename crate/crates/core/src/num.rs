//! Scalar abstraction over `f32`/`f64` with a shared GEMM entry point.
//!
//! Training runs in `f32`; oracles and gradient checks run the same code
//! paths in `f64`. Matrix products dispatch to `matrixmultiply`, which
//! selects SIMD kernels at runtime.

use ndarray::{ArrayView2, ArrayViewMut2, NdFloat};

/// Float scalar usable by every layer and loss in this crate.
pub trait Scalar: NdFloat + Send + Sync + 'static {
    /// c = alpha * a . b + beta * c, row-major views.
    fn gemm(
        alpha: Self,
        a: &ArrayView2<Self>,
        b: &ArrayView2<Self>,
        beta: Self,
        c: &mut ArrayViewMut2<Self>,
    );

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm(
                alpha: Self,
                a: &ArrayView2<Self>,
                b: &ArrayView2<Self>,
                beta: Self,
                c: &mut ArrayViewMut2<Self>,
            ) {
                let (m, k) = a.dim();
                let (k2, n) = b.dim();
                assert_eq!(k, k2, "gemm inner dimensions differ: {k} vs {k2}");
                assert_eq!(c.dim(), (m, n), "gemm output shape mismatch");
                let (rsa, csa) = (a.strides()[0], a.strides()[1]);
                let (rsb, csb) = (b.strides()[0], b.strides()[1]);
                let (rsc, csc) = (c.strides()[0], c.strides()[1]);
                unsafe {
                    $gemm(
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
                        rsc,
                        csc,
                    );
                }
            }

            fn from_f64(v: f64) -> Self {
                v as $t
            }

            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// a . b into a fresh row-major array.
pub fn matmul<F: Scalar>(a: &ArrayView2<F>, b: &ArrayView2<F>) -> ndarray::Array2<F> {
    let mut out = ndarray::Array2::zeros((a.dim().0, b.dim().1));
    F::gemm(F::one(), a, b, F::zero(), &mut out.view_mut());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gemm_matches_manual_product() {
        let a = array![[1.0f32, 2.0], [3.0, 4.0]];
        let b = array![[5.0f32, 6.0], [7.0, 8.0]];
        let c = matmul(&a.view(), &b.view());
        assert_eq!(c, array![[19.0, 22.0], [43.0, 50.0]]);
    }

    #[test]
    fn gemm_accumulates_with_beta_one() {
        let a = array![[1.0f64, 0.0], [0.0, 1.0]];
        let b = array![[2.0f64, 0.0], [0.0, 2.0]];
        let mut c = array![[1.0f64, 1.0], [1.0, 1.0]];
        f64::gemm(1.0, &a.view(), &b.view(), 1.0, &mut c.view_mut());
        assert_eq!(c, array![[3.0, 1.0], [1.0, 3.0]]);
    }

    #[test]
    fn gemm_accepts_transposed_views() {
        let a = array![[1.0f32, 2.0], [3.0, 4.0]];
        let b = array![[5.0f32, 6.0], [7.0, 8.0]];
        let c = matmul(&a.t(), &b.view());
        assert_eq!(c, array![[26.0, 30.0], [38.0, 44.0]]);
    }
}
