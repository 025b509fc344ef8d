//! Complex-plane kernels over real tensors.
//!
//! A row of even width `d` holds `d/2` complex numbers: the first half are
//! the real parts, the second half the imaginary parts. Rotating a node
//! representation by a relation is an element-wise complex product with a
//! unit-modulus vector; inverting a relation is conjugation.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Read-only complex interpretation of a tensor with even column count.
#[derive(Debug, Clone, Copy)]
pub struct ComplexView<'a> {
    tensor: &'a Tensor,
    half: usize,
}

impl<'a> ComplexView<'a> {
    pub fn new(tensor: &'a Tensor) -> Result<Self> {
        let cols = tensor.cols();
        if !cols.is_multiple_of(2) {
            return Err(Error::OddDimension(cols));
        }
        Ok(Self { tensor, half: cols / 2 })
    }

    /// Number of complex entries per row.
    pub fn width(&self) -> usize {
        self.half
    }

    pub fn rows(&self) -> usize {
        self.tensor.rows()
    }

    pub fn re(&self, row: usize, k: usize) -> f64 {
        self.tensor.get(row, k)
    }

    pub fn im(&self, row: usize, k: usize) -> f64 {
        self.tensor.get(row, self.half + k)
    }

    pub fn modulus(&self, row: usize, k: usize) -> f64 {
        self.re(row, k).hypot(self.im(row, k))
    }
}

/// Row index into a tensor that is either full height or a broadcast row.
#[inline]
pub(crate) fn bcast_row(t: &Tensor, r: usize) -> usize {
    if t.rows() == 1 {
        0
    } else {
        r
    }
}

pub(crate) fn check_broadcast(op: &'static str, x: &Tensor, y: &Tensor) -> Result<()> {
    if x.cols() != y.cols() || (y.rows() != x.rows() && y.rows() != 1) {
        return Err(Error::Shape {
            op,
            left: x.shape(),
            right: y.shape(),
        });
    }
    Ok(())
}

/// Per-entry complex product `x ∘ y`. `y` may be a single row, in which case
/// it multiplies every row of `x`.
pub fn complex_hadamard(x: &Tensor, y: &Tensor) -> Result<Tensor> {
    let xv = ComplexView::new(x)?;
    ComplexView::new(y)?;
    check_broadcast("complex_hadamard", x, y)?;
    let half = xv.width();
    let mut out = Tensor::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let xr = x.row(r);
        let yr = y.row(bcast_row(y, r));
        let o = out.row_mut(r);
        for k in 0..half {
            let (a, b) = (xr[k], xr[half + k]);
            let (c, d) = (yr[k], yr[half + k]);
            o[k] = a * c - b * d;
            o[half + k] = a * d + b * c;
        }
    }
    Ok(out)
}

/// Negates the imaginary half.
pub fn complex_conjugate(x: &Tensor) -> Result<Tensor> {
    let half = ComplexView::new(x)?.width();
    let mut out = x.clone();
    for r in 0..x.rows() {
        for v in &mut out.row_mut(r)[half..] {
            *v = -*v;
        }
    }
    Ok(out)
}

/// Divides each complex entry by `max(|z|, eps)`.
pub fn complex_unit_normalize(x: &Tensor, eps: f64) -> Result<Tensor> {
    let half = ComplexView::new(x)?.width();
    let mut out = x.clone();
    for r in 0..x.rows() {
        let row = out.row_mut(r);
        for k in 0..half {
            let m = row[k].hypot(row[half + k]).max(eps);
            row[k] /= m;
            row[half + k] /= m;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: &[f64], im: &[f64]) -> Tensor {
        let mut v = re.to_vec();
        v.extend_from_slice(im);
        Tensor::row_vector(v)
    }

    #[test]
    fn one_is_the_identity() {
        let y = c(&[0.3, -1.2], &[2.0, 0.5]);
        let one = c(&[1.0, 1.0], &[0.0, 0.0]);
        assert_eq!(complex_hadamard(&one, &y).unwrap(), y);
    }

    #[test]
    fn i_times_i() {
        let i = c(&[0.0], &[1.0]);
        assert_eq!(complex_hadamard(&i, &i).unwrap(), c(&[-1.0], &[0.0]));
    }

    #[test]
    fn conjugate_negates_imaginary_half_and_is_an_involution() {
        let x = c(&[1.0, 2.0], &[3.0, -4.0]);
        let cx = complex_conjugate(&x).unwrap();
        assert_eq!(cx, c(&[1.0, 2.0], &[-3.0, 4.0]));
        assert_eq!(complex_conjugate(&cx).unwrap(), x);
    }

    #[test]
    fn normalize_three_four_five() {
        let out = complex_unit_normalize(&c(&[3.0], &[4.0]), 1e-12).unwrap();
        assert!((out.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((out.get(0, 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn normalize_guards_zero() {
        let out = complex_unit_normalize(&c(&[0.0], &[0.0]), 1e-12).unwrap();
        assert_eq!(out, c(&[0.0], &[0.0]));
    }

    #[test]
    fn odd_width_is_rejected() {
        let x = Tensor::zeros(1, 3);
        assert!(matches!(complex_hadamard(&x, &x), Err(Error::OddDimension(3))));
        assert!(complex_conjugate(&x).is_err());
    }

    #[test]
    fn broadcast_row() {
        let x = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let i = c(&[0.0], &[1.0]);
        let out = complex_hadamard(&x, &i).unwrap();
        assert_eq!(out.row(0), &[0.0, 1.0]);
        assert_eq!(out.row(1), &[-1.0, 0.0]);
    }
}
