//! Accept/reject threshold policies.
//!
//! Two ways to pick a cutoff: the closed form implied by a cost spec
//! under perfect calibration, and empirical search over the tuning
//! split's observed confidences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{self, CostSpec};
use crate::dataset::{LabeledDataset, PredictionRecord};
use crate::error::{Error, Result};

/// A threshold strictly above any confidence; encodes "reject everything".
pub const REJECT_ALL_TAU: f64 = 1.0 + 1e-6;

/// Confidence cutoff(s) defining the selector: accept a record iff its
/// confidence is at or above the threshold for its predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    Global { tau: f64 },
    #[serde(rename = "per_class")]
    PerPredictedClass { taus: Vec<f64> },
}

impl ThresholdPolicy {
    pub fn global(tau: f64) -> Self {
        ThresholdPolicy::Global { tau }
    }

    pub fn reject_all() -> Self {
        ThresholdPolicy::Global { tau: REJECT_ALL_TAU }
    }

    /// Every threshold must lie in [0, 1 + 1e-6].
    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t.is_finite() && (0.0..=REJECT_ALL_TAU).contains(&t);
        let valid = match self {
            ThresholdPolicy::Global { tau } => ok(*tau),
            ThresholdPolicy::PerPredictedClass { taus } => {
                !taus.is_empty() && taus.iter().all(|&t| ok(t))
            }
        };
        if valid {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "thresholds must lie in [0, {REJECT_ALL_TAU}]: {self:?}"
            )))
        }
    }

    pub fn class_compatible(&self, num_classes: usize) -> bool {
        match self {
            ThresholdPolicy::Global { .. } => true,
            ThresholdPolicy::PerPredictedClass { taus } => taus.len() == num_classes,
        }
    }

    /// The selector: accept iff confidence >= the applicable threshold.
    /// Acceptance at equality.
    pub fn accepts(&self, record: &PredictionRecord) -> bool {
        match self {
            ThresholdPolicy::Global { tau } => record.confidence >= *tau,
            ThresholdPolicy::PerPredictedClass { taus } => {
                record.confidence >= taus[record.predicted_label]
            }
        }
    }

    /// The single threshold, when there is one.
    pub fn scalar_tau(&self) -> Option<f64> {
        match self {
            ThresholdPolicy::Global { tau } => Some(*tau),
            ThresholdPolicy::PerPredictedClass { .. } => None,
        }
    }

    /// A one-number summary for tabular output: the global threshold,
    /// or the strictest per-class threshold.
    pub fn summary_tau(&self) -> f64 {
        match self {
            ThresholdPolicy::Global { tau } => *tau,
            ThresholdPolicy::PerPredictedClass { taus } => {
                taus.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}

/// Break-even threshold for one error cost under perfect calibration:
/// accepting at confidence c has expected payoff c - k(1 - c), which is
/// nonnegative iff c >= k / (k + 1).
fn break_even(k: f64) -> f64 {
    k / (k + 1.0)
}

/// The threshold implied by the cost spec when confidence is assumed
/// perfectly calibrated.
///
/// Uniform costs give a single cutoff k/(k+1). Binary asymmetric costs
/// give one cutoff per predicted class, using the cost of the error that
/// a wrong prediction of that class incurs: a wrong positive prediction
/// is a false positive, a wrong negative prediction a false negative.
/// Full matrices have no closed form without class priors; use
/// [`empirical_threshold`].
pub fn theoretical_threshold(spec: &CostSpec) -> Result<ThresholdPolicy> {
    spec.validate()?;
    match spec {
        CostSpec::Uniform { k } => Ok(ThresholdPolicy::Global { tau: break_even(*k) }),
        CostSpec::BinaryAsymmetric {
            k_fp,
            k_fn,
            positive_class,
        } => {
            let mut taus = vec![0.0; 2];
            taus[*positive_class] = break_even(*k_fp);
            taus[1 - *positive_class] = break_even(*k_fn);
            Ok(ThresholdPolicy::PerPredictedClass { taus })
        }
        CostSpec::Full { .. } => Err(Error::UnsupportedSpec(
            "full value matrix has no closed-form threshold; use empirical search".into(),
        )),
    }
}

/// How empirical search parameterizes the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    Global,
    PerClass,
}

/// Outcome of an empirical threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearchResult {
    pub policy: ThresholdPolicy,
    /// Value of `policy` on the tuning data, recomputed via
    /// [`cost::value_at`].
    pub tune_value: f64,
    pub candidates_evaluated: usize,
}

/// Candidate cutoffs for a set of confidences: 0, each distinct observed
/// confidence, and reject-everything. Value as a function of tau is
/// piecewise constant with breakpoints only at observed confidences, so
/// this set covers every achievable acceptance set.
fn candidate_taus(confidences: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut taus: Vec<f64> = confidences.collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    if taus.first() != Some(&0.0) {
        taus.insert(0, 0.0);
    }
    taus.push(REJECT_ALL_TAU);
    taus
}

/// Running counts while sweeping the acceptance set; value is computed
/// with the same arithmetic as `cost::value_of`.
struct Tally {
    total: usize,
    accepted: usize,
    correct: usize,
    // Binary error-type counts relative to the positive class.
    tp: usize,
    tn: usize,
    fp: usize,
    fn_: usize,
    // Running sum of V_w entries over accepted items.
    weighted_wrong: f64,
}

impl Tally {
    fn new(total: usize) -> Self {
        Tally {
            total,
            accepted: 0,
            correct: 0,
            tp: 0,
            tn: 0,
            fp: 0,
            fn_: 0,
            weighted_wrong: 0.0,
        }
    }

    fn add(&mut self, record: &PredictionRecord, spec: &CostSpec) {
        self.accepted += 1;
        if record.is_correct() {
            self.correct += 1;
        }
        match spec {
            CostSpec::Uniform { .. } => {}
            CostSpec::BinaryAsymmetric { positive_class, .. } => {
                let pos = *positive_class;
                match (record.true_label == pos, record.predicted_label == pos) {
                    (true, true) => self.tp += 1,
                    (false, false) => self.tn += 1,
                    (false, true) => self.fp += 1,
                    (true, false) => self.fn_ += 1,
                }
            }
            CostSpec::Full { v_w, .. } => {
                self.weighted_wrong += v_w[record.true_label][record.predicted_label];
            }
        }
    }

    fn value(&self, spec: &CostSpec) -> f64 {
        let total = self.total as f64;
        let rho = (self.total - self.accepted) as f64 / total;
        match spec {
            CostSpec::Uniform { k } => {
                if self.accepted == 0 {
                    return 0.0;
                }
                let alpha = self.correct as f64 / self.accepted as f64;
                (1.0 - rho) * (alpha - k * (1.0 - alpha))
            }
            CostSpec::BinaryAsymmetric { k_fp, k_fn, .. } => {
                if self.accepted == 0 {
                    return 0.0;
                }
                ((self.tp + self.tn) as f64 - k_fp * self.fp as f64 - k_fn * self.fn_ as f64)
                    / total
            }
            CostSpec::Full { v_r, v_c, .. } => {
                if self.accepted == 0 {
                    return rho * v_r;
                }
                let alpha = self.correct as f64 / self.accepted as f64;
                rho * v_r + (1.0 - rho) * (alpha * v_c + self.weighted_wrong / self.accepted as f64)
            }
        }
    }
}

/// Value at every candidate tau for a fixed record set, by sweeping the
/// candidates from strictest to loosest and adding records as they
/// clear the cutoff. Returns values aligned with `candidates`
/// (ascending order).
fn sweep_values(records: &[&PredictionRecord], candidates: &[f64], spec: &CostSpec) -> Vec<f64> {
    let mut by_conf: Vec<&PredictionRecord> = records.to_vec();
    by_conf.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut tally = Tally::new(records.len());
    let mut next = 0;
    let mut values = vec![0.0; candidates.len()];
    for (slot, &tau) in candidates.iter().enumerate().rev() {
        while next < by_conf.len() && by_conf[next].confidence >= tau {
            tally.add(by_conf[next], spec);
            next += 1;
        }
        values[slot] = tally.value(spec);
    }
    values
}

/// Scan candidates in ascending order keeping the strictly best value,
/// so ties resolve toward the smallest threshold (maximal coverage).
fn argmax_smallest_tau(candidates: &[f64], values: &[f64]) -> (f64, f64) {
    let mut best = 0;
    for i in 1..candidates.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    (candidates[best], values[best])
}

/// Find the confidence cutoff(s) maximizing value on the tuning split.
///
/// Global mode evaluates every candidate cutoff exhaustively. Per-class
/// mode starts from the global optimum and coordinate-ascends one
/// predicted class at a time, in index order, until a full sweep makes
/// no move; moves that tie on value are taken only toward a smaller
/// threshold. Both modes are deterministic.
pub fn empirical_threshold(
    tune: &LabeledDataset,
    spec: &CostSpec,
    mode: SearchMode,
) -> Result<ThresholdSearchResult> {
    spec.validate()?;
    spec.check_classes(tune.num_classes)?;
    let refs: Vec<&PredictionRecord> = tune.records.iter().collect();
    let candidates = candidate_taus(tune.records.iter().map(|r| r.confidence));
    let values = sweep_values(&refs, &candidates, spec);
    let (tau, _) = argmax_smallest_tau(&candidates, &values);
    let mut evaluated = candidates.len();
    let policy = match mode {
        SearchMode::Global => ThresholdPolicy::Global { tau },
        SearchMode::PerClass => {
            let (taus, extra) = per_class_ascent(tune, spec, tau)?;
            evaluated += extra;
            ThresholdPolicy::PerPredictedClass { taus }
        }
    };
    let tune_value = cost::value_at(tune, spec, &policy)?.value;
    Ok(ThresholdSearchResult {
        policy,
        tune_value,
        candidates_evaluated: evaluated,
    })
}

fn per_class_ascent(
    tune: &LabeledDataset,
    spec: &CostSpec,
    start_tau: f64,
) -> Result<(Vec<f64>, usize)> {
    let k = tune.num_classes;
    let mut per_class: Vec<Vec<f64>> = (0..k)
        .map(|class| {
            candidate_taus(
                tune.records
                    .iter()
                    .filter(|r| r.predicted_label == class)
                    .map(|r| r.confidence),
            )
        })
        .collect();
    // Candidate evaluation is independent per tau; keep results in
    // candidate order so the tie-break is identical to a sequential scan.
    let mut taus = vec![start_tau; k];
    let mut evaluated = 0;
    let mut current = eval_policy(tune, spec, &taus)?;
    evaluated += 1;
    loop {
        let mut moved = false;
        for class in 0..k {
            let options = std::mem::take(&mut per_class[class]);
            let scored: Vec<(f64, f64)> = options
                .par_iter()
                .map(|&cand| {
                    let mut trial = taus.clone();
                    trial[class] = cand;
                    eval_policy(tune, spec, &trial).map(|v| (cand, v))
                })
                .collect::<Result<Vec<_>>>()?;
            evaluated += scored.len();
            per_class[class] = options;
            let mut best_tau = taus[class];
            let mut best_value = current;
            for &(cand, value) in &scored {
                if value > best_value || (value == best_value && cand < best_tau) {
                    best_tau = cand;
                    best_value = value;
                }
            }
            if best_tau != taus[class] {
                taus[class] = best_tau;
                current = best_value;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    Ok((taus, evaluated))
}

fn eval_policy(tune: &LabeledDataset, spec: &CostSpec, taus: &[f64]) -> Result<f64> {
    let policy = ThresholdPolicy::PerPredictedClass { taus: taus.to_vec() };
    Ok(cost::value_at(tune, spec, &policy)?.value)
}
