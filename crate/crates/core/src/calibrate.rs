//! Feature-agnostic recalibration via temperature scaling.
//!
//! Works from probabilities directly: dividing log-probabilities by T
//! differs from dividing logits by T only by a per-item constant shift,
//! which the renormalization cancels. The temperature is fit by
//! minimizing mean negative log-likelihood on a tuning split with a
//! golden-section search on log T.

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, PredictionRecord, PROB_FLOOR};
use crate::error::Result;

pub const TEMPERATURE_MIN: f64 = 0.01;
pub const TEMPERATURE_MAX: f64 = 100.0;

/// Absolute convergence tolerance of the search, in log T.
const LOG_T_TOLERANCE: f64 = 1e-4;

/// NLL spread below which the objective is treated as flat.
const FLATNESS_EPS: f64 = 1e-12;

/// How the temperature fit terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    /// Interior minimum found by the search.
    #[default]
    Converged,
    /// The optimum sits at a search bound; the data pushes T outside
    /// [0.01, 100].
    AtBound,
    /// NLL does not depend on T (e.g. all rows uniform); T = 1 returned.
    Flat,
}

/// A fitted temperature: probabilities are rescaled through the
/// normalized exponential of log p / T. T = 1 is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureScaler {
    pub temperature: f64,
    pub fit_nll: f64,
    #[serde(default)]
    pub fit_iterations: usize,
    #[serde(default)]
    pub status: FitStatus,
}

impl TemperatureScaler {
    /// The identity scaler (T = 1), with NLL unknown.
    pub fn identity() -> Self {
        TemperatureScaler {
            temperature: 1.0,
            fit_nll: f64::NAN,
            fit_iterations: 0,
            status: FitStatus::Converged,
        }
    }
}

/// Rescale one probability vector: softmax(log p / T).
pub fn rescale_probabilities(scores: &[f64], temperature: f64) -> Vec<f64> {
    let logs: Vec<f64> = scores
        .iter()
        .map(|&p| p.clamp(PROB_FLOOR, 1.0).ln() / temperature)
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

pub(crate) fn rescale_dataset(data: &LabeledDataset, temperature: f64) -> LabeledDataset {
    let records: Vec<PredictionRecord> = data
        .records
        .iter()
        .map(|r| {
            let scores = rescale_probabilities(&r.scores, temperature);
            // T > 0 preserves the argmax, so the prediction is carried over
            // and only its confidence is recomputed.
            let confidence = scores[r.predicted_label];
            PredictionRecord {
                id: r.id.clone(),
                scores,
                true_label: r.true_label,
                predicted_label: r.predicted_label,
                confidence,
            }
        })
        .collect();
    LabeledDataset {
        name: data.name.clone(),
        kind: data.kind,
        num_classes: data.num_classes,
        records,
    }
}

/// Mean negative log-likelihood of the true labels under temperature T.
pub fn mean_nll(data: &LabeledDataset, temperature: f64) -> f64 {
    let total: f64 = data
        .records
        .iter()
        .map(|r| {
            let logs: Vec<f64> = r
                .scores
                .iter()
                .map(|&p| p.clamp(PROB_FLOOR, 1.0).ln() / temperature)
                .collect();
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum: f64 = logs.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            max + log_sum - logs[r.true_label]
        })
        .sum();
    total / data.len() as f64
}

/// Fit a temperature on a tuning split by golden-section search on
/// log T over [log 0.01, log 100] to absolute tolerance 1e-4.
///
/// A final check compares the interior optimum against both bounds and
/// T = 1, so the returned NLL never exceeds the NLL at T = 1. Datasets
/// whose NLL does not vary with T at all come back as T = 1, flagged.
pub fn fit_temperature(tune: &LabeledDataset) -> Result<TemperatureScaler> {
    let nll_at = |log_t: f64| mean_nll(tune, log_t.exp());

    let probes = [0.01, 0.1, 1.0, 10.0, 100.0].map(|t: f64| nll_at(t.ln()));
    let spread = probes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - probes.iter().copied().fold(f64::INFINITY, f64::min);
    if spread <= FLATNESS_EPS {
        return Ok(TemperatureScaler {
            temperature: 1.0,
            fit_nll: mean_nll(tune, 1.0),
            fit_iterations: 0,
            status: FitStatus::Flat,
        });
    }

    let lo = TEMPERATURE_MIN.ln();
    let hi = TEMPERATURE_MAX.ln();
    let invphi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - invphi * (b - a);
    let mut x2 = a + invphi * (b - a);
    let mut f1 = nll_at(x1);
    let mut f2 = nll_at(x2);
    let mut iterations = 0;
    while b - a > LOG_T_TOLERANCE {
        iterations += 1;
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = nll_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = nll_at(x2);
        }
    }
    let interior = 0.5 * (a + b);

    // Guard against boundary minima and make NLL(T) <= NLL(1) structural.
    let mut best = interior;
    let mut best_nll = nll_at(interior);
    let identity_nll = nll_at(0.0);
    if identity_nll < best_nll {
        best = 0.0;
        best_nll = identity_nll;
    }
    // A bound that ties the best is reported as the optimum: at a tie
    // the likelihood cannot separate them, which happens when the
    // objective flattens out toward that bound.
    for bound in [hi, lo] {
        let bound_nll = nll_at(bound);
        if bound_nll <= best_nll {
            best = bound;
            best_nll = bound_nll;
        }
    }
    let (temperature, status) = if best == lo {
        (TEMPERATURE_MIN, FitStatus::AtBound)
    } else if best == hi {
        (TEMPERATURE_MAX, FitStatus::AtBound)
    } else {
        (best.exp(), FitStatus::Converged)
    };
    Ok(TemperatureScaler {
        temperature,
        fit_nll: best_nll,
        fit_iterations: iterations,
        status,
    })
}

/// Rescale every record through the fitted temperature. Predictions are
/// unchanged; confidences are recomputed from the rescaled scores.
pub fn apply_temperature(scaler: &TemperatureScaler, data: &LabeledDataset) -> LabeledDataset {
    rescale_dataset(data, scaler.temperature)
}
