//! Minimal complex dense linear algebra on split real/imaginary planes.
//!
//! Activations and filters in the spectral domain are complex, but the fast
//! real GEMM kernel underneath [`ndarray::linalg::general_mat_mul`] only
//! handles `f64`. A [`CMat`] stores the real and imaginary parts as two real
//! matrices so that one complex product expands into four real products, each
//! of which hits the optimized kernel. Conjugate-transposed operands are
//! expressed through [`Op::H`], which costs nothing beyond sign flips and
//! transposed views.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};

/// Dense complex matrix split into real and imaginary planes of equal shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub re: Array2<f64>,
    pub im: Array2<f64>,
}

/// How an operand enters a product: as-is or conjugate-transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    N,
    H,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> CMat {
        CMat {
            re: Array2::zeros((rows, cols)),
            im: Array2::zeros((rows, cols)),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.re.nrows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.re.ncols()
    }

    /// Frobenius inner product of the underlying real representation,
    /// `sum(re*re' + im*im')`.
    pub fn real_dot(&self, other: &CMat) -> f64 {
        let r: f64 = self
            .re
            .iter()
            .zip(other.re.iter())
            .map(|(a, b)| a * b)
            .sum();
        let i: f64 = self
            .im
            .iter()
            .zip(other.im.iter())
            .map(|(a, b)| a * b)
            .sum();
        r + i
    }

    pub fn scaled(&self, s: f64) -> CMat {
        CMat {
            re: &self.re * s,
            im: &self.im * s,
        }
    }
}

/// Effective view of an operand under its op: `(re_view, im_view, im_sign)`
/// where the operand equals `re + i * im_sign * im` elementwise.
fn operand<'a>(a: &'a CMat, op: Op) -> (ArrayView2<'a, f64>, ArrayView2<'a, f64>, f64) {
    match op {
        Op::N => (a.re.view(), a.im.view(), 1.0),
        Op::H => (a.re.t(), a.im.t(), -1.0),
    }
}

/// `c = alpha * op_a(a) * op_b(b) + beta * c` over the complex field.
pub fn cgemm(alpha: f64, a: &CMat, ta: Op, b: &CMat, tb: Op, beta: f64, c: &mut CMat) {
    let (ar, ai, sa) = operand(a, ta);
    let (br, bi, sb) = operand(b, tb);
    // (ar + i sa ai)(br + i sb bi)
    //   = (ar br - sa sb ai bi) + i (sa ai br + sb ar bi)
    general_mat_mul(alpha, &ar, &br, beta, &mut c.re);
    general_mat_mul(-alpha * sa * sb, &ai, &bi, 1.0, &mut c.re);
    general_mat_mul(alpha * sa, &ai, &br, beta, &mut c.im);
    general_mat_mul(alpha * sb, &ar, &bi, 1.0, &mut c.im);
}

/// Product of a real matrix with a complex one: `c = a * b`, discarding `c`'s
/// previous contents.
pub fn rcgemm(a: &ArrayView2<'_, f64>, b: &CMat, c: &mut CMat) {
    general_mat_mul(1.0, a, &b.re, 0.0, &mut c.re);
    general_mat_mul(1.0, a, &b.im, 0.0, &mut c.im);
}

/// Real part of the product of two complex matrices, `re(a * b)`.
pub fn cgemm_real_part(a: &CMat, b: &CMat, out: &mut Array2<f64>) {
    general_mat_mul(1.0, &a.re, &b.re, 0.0, out);
    general_mat_mul(-1.0, &a.im, &b.im, 1.0, out);
}
