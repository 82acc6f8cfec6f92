//! Cost specs and the value of a selective classification outcome.
//!
//! Value is the average per-item payoff of the workflow: rejected items
//! earn the rejection value, accepted correct ones the correct value,
//! accepted wrong ones the entry of the error-cost matrix for their
//! (true, predicted) pair. The baseline (reject everything) sits at 0
//! for the uniform and binary variants.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::threshold::ThresholdPolicy;

/// Cost/value parameters of the selective workflow.
///
/// `Uniform` and `BinaryAsymmetric` fix the rejection value at 0 and the
/// correct-prediction value at 1, measuring everything per unit of
/// correct-prediction value. `Full` spells out all three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    /// Every error destroys `k` units of correct-prediction value.
    Uniform { k: f64 },
    /// Binary costs split by error type relative to a declared positive
    /// class: false positives cost `k_fp`, false negatives `k_fn`.
    #[serde(rename = "binary")]
    BinaryAsymmetric {
        k_fp: f64,
        k_fn: f64,
        positive_class: usize,
    },
    /// Explicit rejection value, correct value, and a K x K error-cost
    /// matrix indexed (true class, predicted class) with zero diagonal.
    Full {
        v_r: f64,
        v_c: f64,
        v_w: Vec<Vec<f64>>,
    },
}

impl CostSpec {
    pub fn uniform(k: f64) -> Self {
        CostSpec::Uniform { k }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CostSpec::Uniform { k } => {
                if !k.is_finite() || *k < 0.0 {
                    return Err(Error::invalid(format!("k must be finite and >= 0, got {k}")));
                }
            }
            CostSpec::BinaryAsymmetric {
                k_fp,
                k_fn,
                positive_class,
            } => {
                for (name, k) in [("k_fp", k_fp), ("k_fn", k_fn)] {
                    if !k.is_finite() || *k < 0.0 {
                        return Err(Error::invalid(format!(
                            "{name} must be finite and >= 0, got {k}"
                        )));
                    }
                }
                if *positive_class > 1 {
                    return Err(Error::invalid(format!(
                        "positive_class must be 0 or 1, got {positive_class}"
                    )));
                }
            }
            CostSpec::Full { v_r, v_c, v_w } => {
                if !v_r.is_finite() || !v_c.is_finite() {
                    return Err(Error::invalid("v_r and v_c must be finite".to_string()));
                }
                let k = v_w.len();
                if k < 2 {
                    return Err(Error::invalid("v_w must be at least 2x2".to_string()));
                }
                for (i, row) in v_w.iter().enumerate() {
                    if row.len() != k {
                        return Err(Error::invalid(format!(
                            "v_w row {i} has {} entries, expected {k}",
                            row.len()
                        )));
                    }
                    if row[i] != 0.0 {
                        return Err(Error::invalid(format!(
                            "v_w diagonal must be exactly zero, v_w[{i}][{i}] = {}",
                            row[i]
                        )));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::invalid(format!("v_w row {i} has non-finite entry")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Check the spec applies to a dataset/outcome with this class count.
    pub fn check_classes(&self, num_classes: usize) -> Result<()> {
        match self {
            CostSpec::Uniform { .. } => Ok(()),
            CostSpec::BinaryAsymmetric { .. } => {
                if num_classes == 2 {
                    Ok(())
                } else {
                    Err(Error::ClassMismatch {
                        expected: 2,
                        found: num_classes,
                    })
                }
            }
            CostSpec::Full { v_w, .. } => {
                if v_w.len() == num_classes {
                    Ok(())
                } else {
                    Err(Error::ClassMismatch {
                        expected: v_w.len(),
                        found: num_classes,
                    })
                }
            }
        }
    }
}

/// Counts from applying a threshold policy to a dataset: how much was
/// rejected and the confusion matrix over what was accepted
/// (rows = true class, columns = predicted class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectiveOutcome {
    pub total: usize,
    pub rejected: usize,
    pub confusion: Vec<Vec<u64>>,
    /// Rejection rate: rejected / total.
    pub rho: f64,
    /// Accuracy among accepted items; 0 when everything was rejected
    /// (by convention, never multiplied into value at zero coverage).
    pub alpha: f64,
    pub rejected_all: bool,
}

impl SelectiveOutcome {
    pub fn accepted(&self) -> usize {
        self.total - self.rejected
    }

    pub fn num_classes(&self) -> usize {
        self.confusion.len()
    }

    fn correct(&self) -> u64 {
        (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum()
    }
}

/// One evaluated point: the cost spec, the policy, and the resulting
/// rejection rate, accepted accuracy, and value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuePoint {
    pub spec: CostSpec,
    pub policy: ThresholdPolicy,
    pub rho: f64,
    pub alpha: f64,
    pub value: f64,
}

/// Apply a policy to a dataset: accept at or above the applicable
/// cutoff, accumulate the confusion matrix over accepted items only.
pub fn outcome_of(data: &LabeledDataset, policy: &ThresholdPolicy) -> Result<SelectiveOutcome> {
    policy.validate()?;
    if !policy.class_compatible(data.num_classes) {
        return Err(Error::ClassMismatch {
            expected: data.num_classes,
            found: match policy {
                ThresholdPolicy::PerPredictedClass { taus } => taus.len(),
                ThresholdPolicy::Global { .. } => unreachable!(),
            },
        });
    }
    let k = data.num_classes;
    let mut confusion = vec![vec![0u64; k]; k];
    let mut rejected = 0usize;
    for record in &data.records {
        if policy.accepts(record) {
            confusion[record.true_label][record.predicted_label] += 1;
        } else {
            rejected += 1;
        }
    }
    let total = data.len();
    let accepted = total - rejected;
    let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
    Ok(SelectiveOutcome {
        total,
        rejected,
        confusion,
        rho: rejected as f64 / total as f64,
        alpha: correct as f64 / accepted.max(1) as f64,
        rejected_all: accepted == 0,
    })
}

/// Average value per item of a selective outcome under a cost spec.
pub fn value_of(outcome: &SelectiveOutcome, spec: &CostSpec) -> Result<f64> {
    spec.validate()?;
    spec.check_classes(outcome.num_classes())?;
    let total = outcome.total as f64;
    let rho = outcome.rho;
    let accepted = outcome.accepted();
    match spec {
        CostSpec::Uniform { k } => {
            if accepted == 0 {
                return Ok(0.0);
            }
            let alpha = outcome.correct() as f64 / accepted as f64;
            Ok((1.0 - rho) * (alpha - k * (1.0 - alpha)))
        }
        CostSpec::BinaryAsymmetric {
            k_fp,
            k_fn,
            positive_class,
        } => {
            if accepted == 0 {
                return Ok(0.0);
            }
            let pos = *positive_class;
            let neg = 1 - pos;
            let tp = outcome.confusion[pos][pos];
            let tn = outcome.confusion[neg][neg];
            let fp = outcome.confusion[neg][pos];
            let fn_ = outcome.confusion[pos][neg];
            Ok(((tp + tn) as f64 - k_fp * fp as f64 - k_fn * fn_ as f64) / total)
        }
        CostSpec::Full { v_r, v_c, v_w } => {
            if accepted == 0 {
                return Ok(rho * v_r);
            }
            let alpha = outcome.correct() as f64 / accepted as f64;
            let mut weighted_wrong = 0.0;
            for (i, row) in outcome.confusion.iter().enumerate() {
                for (j, &count) in row.iter().enumerate() {
                    if count > 0 {
                        weighted_wrong += count as f64 * v_w[i][j];
                    }
                }
            }
            Ok(rho * v_r + (1.0 - rho) * (alpha * v_c + weighted_wrong / accepted as f64))
        }
    }
}

/// Apply a policy and price the outcome in one step.
pub fn value_at(
    data: &LabeledDataset,
    spec: &CostSpec,
    policy: &ThresholdPolicy,
) -> Result<ValuePoint> {
    let outcome = outcome_of(data, policy)?;
    let value = value_of(&outcome, spec)?;
    Ok(ValuePoint {
        spec: spec.clone(),
        policy: policy.clone(),
        rho: outcome.rho,
        alpha: outcome.alpha,
        value,
    })
}
