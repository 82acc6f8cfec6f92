//! Synthetic prediction datasets with exactly known structure.
//!
//! Impulse datasets put all confidence mass on a few point masses with
//! exact per-component accuracy (correctness is a deterministic quota,
//! not sampled), which makes closed-form value oracles exact.
//! `generate_calibrated` draws continuous, perfectly calibrated data
//! for calibration tests. Class count is a parameter (default 10 in the
//! stock models) so low point-mass confidences stay representable.

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use crate::calibrate::rescale_dataset;
use crate::dataset::{derive_prediction, LabeledDataset, PredictionRecord, ScoreKind};
use crate::error::{Error, Result};

/// One point mass: a fraction of the dataset emitted at a fixed top
/// confidence with a fixed accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseComponent {
    pub weight: f64,
    pub confidence: f64,
    pub accuracy: f64,
}

/// Specification of an impulse dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSpec {
    pub components: Vec<ImpulseComponent>,
    pub num_classes: usize,
    pub items: usize,
    pub seed: u64,
}

impl ImpulseSpec {
    /// Constant confidence 0.6, accuracy 0.6.
    pub fn m1(items: usize, seed: u64) -> Self {
        ImpulseSpec {
            components: vec![ImpulseComponent {
                weight: 1.0,
                confidence: 0.6,
                accuracy: 0.6,
            }],
            num_classes: 10,
            items,
            seed,
        }
    }

    /// Half at confidence/accuracy 0.9, half at 0.1 (overall accuracy 0.5).
    pub fn m2(items: usize, seed: u64) -> Self {
        ImpulseSpec {
            components: vec![
                ImpulseComponent { weight: 0.5, confidence: 0.9, accuracy: 0.9 },
                ImpulseComponent { weight: 0.5, confidence: 0.1, accuracy: 0.1 },
            ],
            num_classes: 10,
            items,
            seed,
        }
    }

    /// Half at confidence/accuracy 0.9, half at 0.3 (overall accuracy 0.6).
    pub fn m3(items: usize, seed: u64) -> Self {
        ImpulseSpec {
            components: vec![
                ImpulseComponent { weight: 0.5, confidence: 0.9, accuracy: 0.9 },
                ImpulseComponent { weight: 0.5, confidence: 0.3, accuracy: 0.3 },
            ],
            num_classes: 10,
            items,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("impulse spec needs at least one component"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("impulse spec needs at least 2 classes"));
        }
        if self.items < self.components.len() {
            return Err(Error::invalid(format!(
                "{} items cannot realize {} components",
                self.items,
                self.components.len()
            )));
        }
        let uniform = 1.0 / self.num_classes as f64;
        let mut weight_sum = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            if !(0.0..=1.0).contains(&c.weight) {
                return Err(Error::invalid(format!("component {i}: weight {}", c.weight)));
            }
            // Top confidence cannot sit below uniform; equality allowed.
            if c.confidence < uniform || c.confidence > 1.0 {
                return Err(Error::invalid(format!(
                    "component {i}: confidence {} outside [{uniform}, 1]",
                    c.confidence
                )));
            }
            if !(0.0..=1.0).contains(&c.accuracy) {
                return Err(Error::invalid(format!(
                    "component {i}: accuracy {}",
                    c.accuracy
                )));
            }
            weight_sum += c.weight;
        }
        if (weight_sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {weight_sum}, not 1")));
        }
        Ok(())
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Generate an impulse dataset.
///
/// Component item counts are realized by rounding half-up with the last
/// component absorbing the remainder. Within a component exactly
/// round(accuracy * count) items are correct; wrong items get a seeded
/// pseudo-random other class. Deterministic given the seed.
pub fn generate_impulse(spec: &ImpulseSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let k = spec.num_classes;
    let mut counts: Vec<usize> = spec
        .components
        .iter()
        .take(spec.components.len() - 1)
        .map(|c| round_half_up(c.weight * spec.items as f64))
        .collect();
    let assigned: usize = counts.iter().sum();
    let Some(remainder) = spec.items.checked_sub(assigned) else {
        return Err(Error::invalid(
            "component weights round above the item count",
        ));
    };
    counts.push(remainder);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.items);
    let mut next_id = 0usize;
    for (component, &count) in spec.components.iter().zip(&counts) {
        let correct_quota = round_half_up(component.accuracy * count as f64).min(count);
        let off_mass = (1.0 - component.confidence) / (k - 1) as f64;
        for slot in 0..count {
            let peak = rng.gen_range(0..k);
            let mut scores = vec![off_mass; k];
            scores[peak] = component.confidence;
            let (predicted, confidence) = derive_prediction(&scores);
            let true_label = if slot < correct_quota {
                predicted
            } else {
                let mut other = rng.gen_range(0..k - 1);
                if other >= predicted {
                    other += 1;
                }
                other
            };
            records.push(PredictionRecord {
                id: format!("{next_id:06}"),
                scores,
                true_label,
                predicted_label: predicted,
                confidence,
            });
            next_id += 1;
        }
    }
    LabeledDataset::new("impulse", ScoreKind::Probabilities, k, records)
}

/// Draw a perfectly calibrated dataset: each item's probability vector
/// comes from a symmetric Dirichlet with the given concentration and
/// its true label is then drawn from that vector, so expected accuracy
/// conditioned on the scores equals the scores.
pub fn generate_calibrated(
    items: usize,
    num_classes: usize,
    concentration: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if items == 0 {
        return Err(Error::invalid("need at least one item"));
    }
    if num_classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if !(concentration.is_finite() && concentration > 0.0) {
        return Err(Error::invalid(format!(
            "concentration must be positive, got {concentration}"
        )));
    }
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::invalid(format!("bad concentration: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(items);
    for i in 0..items {
        let mut scores: Vec<f64> = (0..num_classes).map(|_| gamma.sample(&mut rng)).collect();
        let sum: f64 = scores.iter().sum();
        if sum <= 0.0 {
            scores = vec![1.0 / num_classes as f64; num_classes];
        } else {
            for s in &mut scores {
                *s /= sum;
            }
        }
        let u: f64 = rng.gen();
        let mut cumulative = 0.0;
        let mut true_label = num_classes - 1;
        for (class, &p) in scores.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                true_label = class;
                break;
            }
        }
        let (predicted_label, confidence) = derive_prediction(&scores);
        records.push(PredictionRecord {
            id: format!("{i:06}"),
            scores,
            true_label,
            predicted_label,
            confidence,
        });
    }
    LabeledDataset::new("calibrated", ScoreKind::Probabilities, num_classes, records)
}

/// Push a dataset through the temperature map (softmax of log p / T),
/// leaving labels untouched. Creates known miscalibration: T < 1
/// sharpens (overconfident), T > 1 flattens (underconfident).
pub fn distort(data: &LabeledDataset, temperature: f64) -> LabeledDataset {
    assert!(
        temperature.is_finite() && temperature > 0.0,
        "distortion temperature must be positive, got {temperature}"
    );
    rescale_dataset(data, temperature)
}
