//! Plain (untaped) numeric kernels shared by the tape and by evaluation code.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Softmax with max subtraction.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean over rows of `-log softmax(row)[label]`.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    if logits.rows() != labels.len() {
        return Err(Error::invalid(format!(
            "cross_entropy: {} rows but {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if logits.rows() == 0 {
        return Err(Error::invalid("cross_entropy over an empty batch"));
    }
    let classes = logits.cols();
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let row = logits.row(r);
        total += log_sum_exp(row) - row[label];
    }
    Ok(total / labels.len() as f64)
}

pub fn column_sums(x: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(1, x.cols());
    for r in 0..x.rows() {
        for (o, v) in out.data_mut().iter_mut().zip(x.row(r)) {
            *o += v;
        }
    }
    out
}

pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetric_pair() {
        assert_eq!(softmax(&[2.5, 2.5]), vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_closed_form() {
        let p = softmax(&[0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_large_inputs_do_not_overflow() {
        // exact: p1 = 1 / (1 + e^{-0.1})
        let p = softmax(&[1000.0, 1000.1]);
        assert!(p.iter().all(|v| v.is_finite()));
        let expected = 1.0 / (1.0 + (-0.1f64).exp());
        assert!((p[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_confident_and_uniform() {
        let confident = Tensor::from_rows(&[vec![50.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!(cross_entropy(&confident, &[0]).unwrap() < 1e-9);
        let uniform = Tensor::zeros(3, 4);
        let l = cross_entropy(&uniform, &[0, 1, 3]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_matches_per_row_formula() {
        let logits = Tensor::from_rows(&[
            vec![0.3, -1.2, 2.0, 0.1],
            vec![-0.7, 0.4, 0.4, 1.9],
            vec![1.1, 1.0, -3.0, 0.0],
        ])
        .unwrap();
        let labels = [2, 0, 1];
        let mut expected = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = logits.row(r);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            expected += -(row[y].exp() / z).ln();
        }
        expected /= 3.0;
        assert!((cross_entropy(&logits, &labels).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn cross_entropy_bad_label() {
        assert!(cross_entropy(&Tensor::zeros(1, 4), &[7]).is_err());
    }
}
