//! Central-difference gradient verification.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Step for the central difference.
    pub eps: f64,
    /// Check every coordinate when the total is at most this many; sample
    /// this many otherwise (never fewer than 200).
    pub max_coordinates: usize,
    pub seed: u64,
    /// Combine central differences at `eps` and `eps / 2` as
    /// `(4 D(eps/2) - D(eps)) / 3`, cancelling the `eps²` error term. Allows
    /// a larger step, which keeps rounding noise below tiny gradients.
    pub extrapolate: bool,
    /// Second opinion for coordinates whose primary estimate disagrees: a
    /// plain central difference at this narrower step. The closer of the two
    /// estimates is scored. A wide stencil can straddle a kink (relu) that a
    /// narrow one avoids.
    pub fallback_eps: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            max_coordinates: 2000,
            seed: 0,
            extrapolate: false,
            fallback_eps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(tensor index, flat entry index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    /// `(analytic, numeric)` at the worst coordinate.
    pub worst_values: Option<(f64, f64)>,
    pub checked: usize,
}

const DENOMINATOR_FLOOR: f64 = 1e-8;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR)
}

/// Compares the analytic gradient returned by `f` against central
/// differences of its value.
///
/// `f` maps parameter tensors to `(loss, gradients)` and must be
/// deterministic: it is evaluated twice at `params` and the two losses must
/// agree bit for bit.
pub fn finite_diff_check<F>(f: F, params: &[Tensor], options: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor]) -> Result<(f64, Vec<Tensor>)>,
{
    let (first, analytic) = f(params)?;
    let (second, _) = f(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }
    if analytic.len() != params.len() {
        return Err(Error::invalid("gradient count differs from parameter count"));
    }

    let offsets: Vec<usize> = params
        .iter()
        .scan(0, |acc, p| {
            let start = *acc;
            *acc += p.len();
            Some(start)
        })
        .collect();
    let total: usize = params.iter().map(Tensor::len).sum();
    let coords: Vec<usize> = if total <= options.max_coordinates {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let n = options.max_coordinates.max(200).min(total);
        let mut picked = sample(&mut rng, total, n).into_vec();
        picked.sort_unstable();
        picked
    };

    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        worst_values: None,
        checked: 0,
    };
    for flat in coords {
        let t = offsets.partition_point(|&o| o <= flat) - 1;
        let i = flat - offsets[t];
        let orig = work[t].data()[i];
        let mut central = |h: f64| -> Result<f64> {
            work[t].data_mut()[i] = orig + h;
            let (plus, _) = f(&work)?;
            work[t].data_mut()[i] = orig - h;
            let (minus, _) = f(&work)?;
            work[t].data_mut()[i] = orig;
            Ok((plus - minus) / (2.0 * h))
        };
        let numeric = if options.extrapolate {
            let coarse = central(options.eps)?;
            let fine = central(options.eps / 2.0)?;
            (4.0 * fine - coarse) / 3.0
        } else {
            central(options.eps)?
        };
        let a = analytic[t].data()[i];
        let mut err = relative_error(a, numeric);
        let mut numeric = numeric;
        if let Some(h) = options.fallback_eps {
            let second = central(h)?;
            let e2 = relative_error(a, second);
            if e2 < err {
                err = e2;
                numeric = second;
            }
        }
        if report.worst.is_none() || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = Some((t, i));
            report.worst_values = Some((a, numeric));
        }
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndiff::Tape;
    use std::cell::Cell;

    #[test]
    fn quadratic_norm() {
        let f = |p: &[Tensor]| {
            let mut tape = Tape::new();
            let x = tape.param(p[0].clone());
            let sq = tape.mul(x, x)?;
            let s = tape.mean(sq)?;
            let grads = tape.backward(s)?;
            Ok((tape.value(s).item(), vec![grads.get(x).unwrap().clone()]))
        };
        let report = finite_diff_check(f, &[Tensor::filled(1, 5, 1.0)], GradCheckOptions::default()).unwrap();
        assert!(report.max_relative_error <= 1e-8, "{report:?}");
        assert_eq!(report.checked, 5);
    }

    #[test]
    fn extrapolation_cancels_the_second_order_term() {
        // d/dx sin(x) at x = 1 with a coarse step
        let f = |p: &[Tensor]| {
            let x = p[0].item();
            Ok((x.sin(), vec![Tensor::scalar(x.cos())]))
        };
        let x = [Tensor::scalar(1.0)];
        let plain = GradCheckOptions {
            eps: 1e-2,
            ..Default::default()
        };
        let rich = GradCheckOptions {
            extrapolate: true,
            ..plain
        };
        let e_plain = finite_diff_check(f, &x, plain).unwrap().max_relative_error;
        let e_rich = finite_diff_check(f, &x, rich).unwrap().max_relative_error;
        assert!(e_plain > 1e-6 && e_rich < 1e-8, "{e_plain} {e_rich}");
    }

    #[test]
    fn nondeterministic_function_is_rejected() {
        let calls = Cell::new(0.0);
        let f = |p: &[Tensor]| {
            calls.set(calls.get() + 1.0);
            Ok((calls.get(), vec![p[0].clone()]))
        };
        let err = finite_diff_check(f, &[Tensor::scalar(0.0)], GradCheckOptions::default());
        assert!(matches!(err, Err(Error::NonDeterministic { .. })));
    }

    #[test]
    fn large_inputs_are_sampled() {
        let f = |p: &[Tensor]| {
            let mut tape = Tape::new();
            let x = tape.param(p[0].clone());
            let m = tape.mean(x)?;
            let grads = tape.backward(m)?;
            Ok((tape.value(m).item(), vec![grads.get(x).unwrap().clone()]))
        };
        let opts = GradCheckOptions {
            max_coordinates: 50,
            ..Default::default()
        };
        let report = finite_diff_check(f, &[Tensor::zeros(30, 30)], opts).unwrap();
        assert_eq!(report.checked, 200);
    }
}
