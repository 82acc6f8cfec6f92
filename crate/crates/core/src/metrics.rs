//! Calibration diagnostics.
//!
//! Besides the usual confidence-binned expected calibration error, this
//! module bins the other way around: draw many fixed-size item sets,
//! compute each set's accuracy and mean confidence, and bucket the sets
//! by accuracy. With sample size n there are exactly n+1 accuracy
//! levels. The residual of a bucket is its mean confidence minus its
//! accuracy; aggregating |residual| over buckets (plain or
//! mass-weighted) gives the accuracy-binned calibration error. Note
//! that larger sample sizes concentrate bucket mass toward the overall
//! mean accuracy, so aggregates are comparable only at a fixed n.
//!
//! Sample j draws from an RNG stream derived from (seed, j), so reports
//! are bit-identical regardless of run or thread count. Feature-level
//! slicing is done by passing pre-partitioned datasets and comparing
//! reports; nothing here extracts features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{value_at, CostSpec};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::threshold::{empirical_threshold, theoretical_threshold, SearchMode};

/// Mean computed as first + mean(x - first): exact when every input is
/// the same value, which keeps constant-confidence reports exact.
fn shifted_mean(values: &[f64]) -> f64 {
    let shift = values[0];
    let deviations: f64 = values.iter().map(|v| v - shift).sum();
    shift + deviations / values.len() as f64
}

// ---------------------------------------------------------------------------
// Confidence-binned ECE
// ---------------------------------------------------------------------------

/// One confidence bin over (lo, hi].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EceBin {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
    pub mean_confidence: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EceReport {
    pub num_bins: usize,
    pub bins: Vec<EceBin>,
    /// Mass-weighted |accuracy - mean confidence| over occupied bins.
    pub ece: f64,
}

impl EceReport {
    /// CSV rows, one per bin: `lo,hi,mass,mean_conf,accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lo,hi,mass,mean_conf,accuracy\n");
        for bin in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                bin.lo, bin.hi, bin.mass, bin.mean_confidence, bin.accuracy
            ));
        }
        out
    }
}

/// Confidence-binned expected calibration error with equal-width bins
/// over (0, 1]: confidence c lands in bin ceil(c * num_bins). Empty
/// bins carry zero mass and are excluded from the sum.
pub fn ece(data: &LabeledDataset, num_bins: usize) -> Result<EceReport> {
    if num_bins == 0 {
        return Err(Error::invalid("ece needs at least one bin"));
    }
    let mut confidences: Vec<Vec<f64>> = vec![Vec::new(); num_bins];
    let mut correct = vec![0usize; num_bins];
    for record in &data.records {
        let bin = (record.confidence * num_bins as f64).ceil() as usize;
        let bin = bin.clamp(1, num_bins) - 1;
        confidences[bin].push(record.confidence);
        if record.is_correct() {
            correct[bin] += 1;
        }
    }
    let total = data.len() as f64;
    let mut bins = Vec::with_capacity(num_bins);
    let mut ece_sum = 0.0;
    for b in 0..num_bins {
        let count = confidences[b].len();
        let (mass, mean_confidence, accuracy) = if count == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let mass = count as f64 / total;
            let mean_confidence = shifted_mean(&confidences[b]);
            let accuracy = correct[b] as f64 / count as f64;
            ece_sum += mass * (accuracy - mean_confidence).abs();
            (mass, mean_confidence, accuracy)
        };
        bins.push(EceBin {
            lo: b as f64 / num_bins as f64,
            hi: (b + 1) as f64 / num_bins as f64,
            mass,
            mean_confidence,
            accuracy,
        });
    }
    Ok(EceReport {
        num_bins,
        bins,
        ece: ece_sum,
    })
}

// ---------------------------------------------------------------------------
// Accuracy-binned resampling
// ---------------------------------------------------------------------------

/// Per-sample statistics: number of correct predictions and mean
/// confidence of one drawn item set. Sample j uses an RNG stream
/// derived deterministically from (seed, j); aggregation happens
/// sequentially in sample order afterwards, so results are independent
/// of thread count.
fn resample_stats(
    data: &LabeledDataset,
    sample_size: usize,
    num_samples: usize,
    seed: u64,
) -> Vec<(usize, f64)> {
    let records = &data.records;
    (0..num_samples)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let picks = rand::seq::index::sample(&mut rng, records.len(), sample_size);
            let mut confidences = Vec::with_capacity(sample_size);
            let mut correct = 0usize;
            for idx in picks.iter() {
                let record = &records[idx];
                confidences.push(record.confidence);
                if record.is_correct() {
                    correct += 1;
                }
            }
            (correct, shifted_mean(&confidences))
        })
        .collect()
}

fn check_resample_args(data: &LabeledDataset, n: usize, num_samples: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if num_samples == 0 {
        return Err(Error::invalid("need at least 1 sample"));
    }
    if n > data.len() {
        return Err(Error::invalid(format!(
            "sample size {n} exceeds dataset size {}",
            data.len()
        )));
    }
    Ok(())
}

/// One accuracy level a = j/n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbeceBin {
    /// Accuracy level of this bucket.
    pub a: f64,
    /// Number of samples that landed here.
    pub count: u64,
    /// Fraction of samples that landed here.
    pub mass: f64,
    /// Mean over samples of the sample mean confidence (0 if empty).
    pub mean_confidence: f64,
    /// mean_confidence - a (0 if empty).
    pub residual: f64,
}

/// Accuracy-binned calibration report over `num_samples` resampled item
/// sets of size `sample_size` each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbeceReport {
    pub sample_size: usize,
    pub num_samples: usize,
    pub seed: u64,
    /// Exactly sample_size + 1 bins, occupied or not.
    pub bins: Vec<AbeceBin>,
    /// Sum of |residual| over occupied bins.
    pub abece_sum: f64,
    /// Mass-weighted sum of |residual|.
    pub abece_weighted: f64,
}

impl AbeceReport {
    /// CSV rows, one per bin: `a,mass,mean_conf,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,mass,mean_conf,residual\n");
        for bin in &self.bins {
            out.push_str(&format!(
                "{},{},{},{}\n",
                bin.a, bin.mass, bin.mean_confidence, bin.residual
            ));
        }
        out
    }
}

/// Accuracy-binned expected calibration error: draw `num_samples` item
/// sets of `sample_size` distinct records each, bucket them by sample
/// accuracy, and report mean confidence and residual per bucket.
pub fn abece(
    data: &LabeledDataset,
    sample_size: usize,
    num_samples: usize,
    seed: u64,
) -> Result<AbeceReport> {
    check_resample_args(data, sample_size, num_samples)?;
    let stats = resample_stats(data, sample_size, num_samples, seed);
    let mut per_level: Vec<Vec<f64>> = vec![Vec::new(); sample_size + 1];
    for &(correct, mean_conf) in &stats {
        per_level[correct].push(mean_conf);
    }
    let mut bins = Vec::with_capacity(sample_size + 1);
    let mut abece_sum = 0.0;
    let mut abece_weighted = 0.0;
    for (level, values) in per_level.iter().enumerate() {
        let a = level as f64 / sample_size as f64;
        let count = values.len() as u64;
        let (mass, mean_confidence, residual) = if values.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            let mass = count as f64 / num_samples as f64;
            let mean_confidence = shifted_mean(values);
            let residual = mean_confidence - a;
            abece_sum += residual.abs();
            abece_weighted += mass * residual.abs();
            (mass, mean_confidence, residual)
        };
        bins.push(AbeceBin {
            a,
            count,
            mass,
            mean_confidence,
            residual,
        });
    }
    Ok(AbeceReport {
        sample_size,
        num_samples,
        seed,
        bins,
        abece_sum,
        abece_weighted,
    })
}

/// Joint distribution of (sample accuracy, sample mean confidence) over
/// the same resampling scheme as [`abece`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDensity {
    pub sample_size: usize,
    pub num_samples: usize,
    pub seed: u64,
    pub conf_bins: usize,
    /// The n+1 accuracy levels j/n.
    pub accuracy_levels: Vec<f64>,
    /// conf_bins + 1 equal-width edges over [0, 1].
    pub confidence_edges: Vec<f64>,
    /// Integer sample counts, indexed [accuracy level][confidence bin].
    pub counts: Vec<Vec<u64>>,
    /// counts / num_samples.
    pub mass: Vec<Vec<f64>>,
}

impl JointDensity {
    /// Marginal over confidence: mass per accuracy level, computed from
    /// integer counts so it matches [`abece`] bin masses exactly.
    pub fn accuracy_marginal(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|row| row.iter().sum::<u64>() as f64 / self.num_samples as f64)
            .collect()
    }

    /// Marginal over accuracy: a histogram of sample mean confidences.
    pub fn confidence_marginal(&self) -> Vec<f64> {
        (0..self.conf_bins)
            .map(|b| {
                self.counts.iter().map(|row| row[b]).sum::<u64>() as f64
                    / self.num_samples as f64
            })
            .collect()
    }

    /// CSV rows, one per grid cell: `a,conf_lo,conf_hi,mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,conf_lo,conf_hi,mass\n");
        for (level, row) in self.mass.iter().enumerate() {
            for (b, &mass) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    self.accuracy_levels[level],
                    self.confidence_edges[b],
                    self.confidence_edges[b + 1],
                    mass
                ));
            }
        }
        out
    }
}

/// Resample as in [`abece`] and drop each sample into one
/// (accuracy level, confidence bin) cell with mass 1/num_samples.
pub fn joint_density(
    data: &LabeledDataset,
    sample_size: usize,
    num_samples: usize,
    conf_bins: usize,
    seed: u64,
) -> Result<JointDensity> {
    check_resample_args(data, sample_size, num_samples)?;
    if conf_bins == 0 {
        return Err(Error::invalid("need at least one confidence bin"));
    }
    let stats = resample_stats(data, sample_size, num_samples, seed);
    let mut counts = vec![vec![0u64; conf_bins]; sample_size + 1];
    for &(correct, mean_conf) in &stats {
        let bin = ((mean_conf * conf_bins as f64).floor() as usize).min(conf_bins - 1);
        counts[correct][bin] += 1;
    }
    let mass = counts
        .iter()
        .map(|row| {
            row.iter()
                .map(|&c| c as f64 / num_samples as f64)
                .collect()
        })
        .collect();
    Ok(JointDensity {
        sample_size,
        num_samples,
        seed,
        conf_bins,
        accuracy_levels: (0..=sample_size)
            .map(|j| j as f64 / sample_size as f64)
            .collect(),
        confidence_edges: (0..=conf_bins).map(|b| b as f64 / conf_bins as f64).collect(),
        counts,
        mass,
    })
}

// ---------------------------------------------------------------------------
// Calibration gain
// ---------------------------------------------------------------------------

/// Threshold rule used when pricing the two sides of a gain comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainRule {
    Theoretical,
    Empirical,
}

/// Value difference between two models that make the same predictions:
/// whatever `after` gains over `before` comes purely from better
/// confidence scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGain {
    pub spec: CostSpec,
    pub rule: GainRule,
    pub value_before: f64,
    pub value_after: f64,
    /// value_after - value_before.
    pub gain: f64,
    /// Whether every item's top prediction agrees between the two
    /// datasets. The gain is only a pure calibration effect when true.
    pub argmax_equal: bool,
}

/// Compare the value of two datasets over the same items under the
/// chosen threshold rule.
///
/// Both datasets must contain the same ids with the same true labels
/// (matched by id, order-independent). With the empirical rule each
/// side's threshold is tuned on `tune` when given, otherwise on itself.
pub fn calibration_gain(
    before: &LabeledDataset,
    after: &LabeledDataset,
    spec: &CostSpec,
    rule: GainRule,
    tune: Option<&LabeledDataset>,
) -> Result<CalibrationGain> {
    if before.len() != after.len() {
        return Err(Error::DatasetMismatch(format!(
            "{} vs {} records",
            before.len(),
            after.len()
        )));
    }
    let after_by_id: std::collections::HashMap<&str, &crate::dataset::PredictionRecord> =
        after.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut argmax_equal = true;
    for record in &before.records {
        let Some(twin) = after_by_id.get(record.id.as_str()) else {
            return Err(Error::DatasetMismatch(format!(
                "id {:?} missing from the second dataset",
                record.id
            )));
        };
        if twin.true_label != record.true_label {
            return Err(Error::DatasetMismatch(format!(
                "id {:?} has different true labels ({} vs {})",
                record.id, record.true_label, twin.true_label
            )));
        }
        if twin.predicted_label != record.predicted_label {
            argmax_equal = false;
        }
    }
    let policy_for = |data: &LabeledDataset| -> Result<crate::threshold::ThresholdPolicy> {
        match rule {
            GainRule::Theoretical => theoretical_threshold(spec),
            GainRule::Empirical => {
                let basis = tune.unwrap_or(data);
                Ok(empirical_threshold(basis, spec, SearchMode::Global)?.policy)
            }
        }
    };
    let value_before = value_at(before, spec, &policy_for(before)?)?.value;
    let value_after = value_at(after, spec, &policy_for(after)?)?.value;
    Ok(CalibrationGain {
        spec: spec.clone(),
        rule,
        value_before,
        value_after,
        gain: value_after - value_before,
        argmax_equal,
    })
}
