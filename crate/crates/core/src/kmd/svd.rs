use faer::Mat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `m = u diag(sigma) v^H`, singular values descending.
pub(crate) struct ThinSvd<T: nalgebra::Scalar> {
    pub u: DMatrix<T>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<T>,
}

pub(crate) trait SvdScalar: nalgebra::Scalar + Copy + faer::traits::ComplexField {
    fn real_part(self) -> f64;
}

impl SvdScalar for f64 {
    fn real_part(self) -> f64 {
        self
    }
}

impl SvdScalar for Complex64 {
    fn real_part(self) -> f64 {
        self.re
    }
}

pub(crate) fn thin_svd<T: SvdScalar>(m: &DMatrix<T>) -> Option<ThinSvd<T>> {
    let (rows, cols) = m.shape();
    let a = Mat::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = a.thin_svd();
    clear_upper_simd_state();
    let svd = svd.ok()?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let r = s.nrows();
    Some(ThinSvd {
        u: DMatrix::from_fn(rows, r, |i, j| u[(i, j)]),
        sigma: DVector::from_fn(r, |i, _| s[i].real_part()),
        v: DMatrix::from_fn(cols, r, |i, j| v[(i, j)]),
    })
}

/// faer's wide-vector kernels can leave the upper halves of the vector
/// registers dirty, after which every SSE instruction (libm's `ln` and `exp`
/// among them) pays a state-transition stall.
fn clear_upper_simd_state() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: the instruction is available, as checked above.
        unsafe { std::arch::x86_64::_mm256_zeroupper() }
    }
}
