use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar trust value per level, used for the absolute error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelScale(pub Vec<f64>);

impl LevelScale {
    /// `{0.1, 0.4, 0.7, 0.9}` for the four levels; evenly spaced on
    /// `[0.1, 0.9]` for other relation counts.
    pub fn for_relations(num_relations: usize) -> Self {
        match num_relations {
            4 => Self(vec![0.1, 0.4, 0.7, 0.9]),
            1 => Self(vec![0.5]),
            n => Self((0..n).map(|i| 0.1 + 0.8 * i as f64 / (n - 1) as f64).collect()),
        }
    }

    pub fn value(&self, level: usize) -> f64 {
        self.0[level]
    }
}

/// Per-class confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ClassCounts {
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

pub fn class_counts(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<Vec<ClassCounts>> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![ClassCounts::default(); num_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= num_classes || p >= num_classes {
            return Err(Error::invalid(format!("class outside 0..{num_classes}")));
        }
        if t == p {
            counts[t].tp += 1;
        } else {
            counts[p].fp += 1;
            counts[t].fn_ += 1;
        }
    }
    Ok(counts)
}

/// F1 over pooled counts. With one label per item this equals accuracy.
pub fn micro_f1(counts: &[ClassCounts]) -> f64 {
    let pooled = counts.iter().fold(ClassCounts::default(), |acc, c| ClassCounts {
        tp: acc.tp + c.tp,
        fp: acc.fp + c.fp,
        fn_: acc.fn_ + c.fn_,
    });
    pooled.f1()
}

pub fn accuracy(truth: &[usize], predicted: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth.iter().zip(predicted).filter(|(t, p)| t == p).count();
    hits as f64 / truth.len() as f64
}

pub fn mean_absolute_error(truth: &[usize], predicted: &[usize], scale: &LevelScale) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let total: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(&t, &p)| (scale.value(t) - scale.value(p)).abs())
        .sum();
    total / truth.len() as f64
}

/// Test-set scores for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub micro_f1: f64,
    pub mae: f64,
    pub per_class_f1: Vec<f64>,
    pub num_test: usize,
    /// Training loss per epoch; empty for a standalone evaluation.
    pub loss_history: Vec<f64>,
    /// Wall-clock seconds of the run; zero for a standalone evaluation.
    pub runtime_secs: f64,
}

impl Metrics {
    /// Copy without the wall-clock field, for run-to-run comparisons.
    pub fn without_runtime(&self) -> Self {
        Self {
            runtime_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn compute(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self> {
        let counts = class_counts(truth, predicted, num_classes)?;
        Ok(Self {
            micro_f1: micro_f1(&counts),
            mae: mean_absolute_error(truth, predicted, &LevelScale::for_relations(num_classes)),
            per_class_f1: counts.iter().map(ClassCounts::f1).collect(),
            num_test: truth.len(),
            loss_history: Vec::new(),
            runtime_secs: 0.0,
        })
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// `74.4%±0.1%`.
pub fn format_percent(mean: f64, std: f64) -> String {
    format!("{:.1}%±{:.1}%", 100.0 * mean, 100.0 * std)
}

/// `0.081±0.001`.
pub fn format_plain(mean: f64, std: f64) -> String {
    format!("{mean:.3}±{std:.3}")
}
