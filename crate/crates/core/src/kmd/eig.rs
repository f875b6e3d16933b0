//! Eigenpairs of small dense real matrices.
//!
//! Eigenvalues come from the real Schur form; eigenvectors from shifted
//! inverse iteration on the complexified matrix. Complex eigenvalues are
//! emitted as adjacent conjugate pairs (positive imaginary part first) whose
//! vectors are exact conjugates of each other.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub(crate) struct EigenPair {
    pub value: Complex64,
    /// Unit-norm eigenvector, phase fixed so its largest entry is real positive.
    pub vector: DVector<Complex64>,
    /// True for the second member of a conjugate pair.
    pub is_conjugate_of_previous: bool,
}

const INVERSE_ITERATIONS: usize = 3;

pub(crate) fn eigenpairs(a: &DMatrix<f64>) -> Vec<EigenPair> {
    let r = a.nrows();
    if r == 0 {
        return Vec::new();
    }
    let values = Schur::new(a.clone()).complex_eigenvalues();

    // Group conjugate pairs deterministically: real values as they come,
    // complex values keyed by their upper-half-plane member.
    let norm = a.norm();
    let scale = if norm > 0.0 { norm } else { 1.0 };
    let mut reals = Vec::new();
    let mut uppers = Vec::new();
    for v in values.iter() {
        if v.im.abs() <= 1e-14 * scale {
            reals.push(Complex64::new(v.re, 0.0));
        } else if v.im > 0.0 {
            uppers.push(*v);
        }
    }

    let ac = a.map(|x| Complex64::new(x, 0.0));
    let mut out = Vec::with_capacity(r);
    for lambda in reals {
        let vector = inverse_iteration(&ac, lambda, scale);
        out.push(EigenPair {
            value: lambda,
            vector,
            is_conjugate_of_previous: false,
        });
    }
    for lambda in uppers {
        let vector = inverse_iteration(&ac, lambda, scale);
        let conj = vector.map(|z| z.conj());
        out.push(EigenPair {
            value: lambda,
            vector,
            is_conjugate_of_previous: false,
        });
        out.push(EigenPair {
            value: lambda.conj(),
            vector: conj,
            is_conjugate_of_previous: true,
        });
    }
    out
}

fn inverse_iteration(a: &DMatrix<Complex64>, lambda: Complex64, scale: f64) -> DVector<Complex64> {
    let r = a.nrows();
    let mut x = DVector::from_fn(r, |i, _| Complex64::new(1.0 + i as f64 / r as f64, 0.0));
    normalize(&mut x);
    let mut shift = 1e-10 * scale;
    for _ in 0..8 {
        let mut shifted = a.clone();
        let mu = lambda + Complex64::new(shift, 0.0);
        for i in 0..r {
            shifted[(i, i)] -= mu;
        }
        let lu = shifted.lu();
        let mut ok = true;
        let mut y = x.clone();
        for _ in 0..INVERSE_ITERATIONS {
            match lu.solve(&y) {
                Some(next) if next.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                    y = next;
                    if !normalize(&mut y) {
                        ok = false;
                        break;
                    }
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            fix_phase(&mut y);
            return y;
        }
        shift *= 10.0;
    }
    fix_phase(&mut x);
    x
}

fn normalize(x: &mut DVector<Complex64>) -> bool {
    let n = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 && n.is_finite() {
        x.iter_mut().for_each(|z| *z /= n);
        true
    } else {
        false
    }
}

fn fix_phase(x: &mut DVector<Complex64>) {
    let mut best = 0;
    for (i, z) in x.iter().enumerate() {
        if z.norm() > x[best].norm() * (1.0 + 1e-12) {
            best = i;
        }
    }
    let pivot = x[best];
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        x.iter_mut().for_each(|z| *z *= phase);
        x[best] = Complex64::new(x[best].re, 0.0);
    }
}
