//! Cost-aware evaluation of classifiers deployed with a reject option.
//!
//! A classifier that can abstain is worth more or less depending on how
//! costly its errors are. This crate takes prediction logs plus a cost
//! model and computes the value of the resulting workflow, the
//! accept/reject thresholds that maximize it (closed-form or tuned),
//! temperature-scaling recalibration, calibration diagnostics binned by
//! confidence or by accuracy, and value-curve comparisons across models.
//!
//! ```
//! use selval::cost::{value_at, CostSpec};
//! use selval::synth::{generate_impulse, ImpulseSpec};
//! use selval::threshold::theoretical_threshold;
//!
//! let data = generate_impulse(&ImpulseSpec::m1(1000, 7)).unwrap();
//! let spec = CostSpec::uniform(1.0);
//! let policy = theoretical_threshold(&spec).unwrap();
//! let point = value_at(&data, &spec, &policy).unwrap();
//! assert!((point.value - 0.2).abs() < 1e-9);
//! ```

pub mod calibrate;
pub mod cost;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod synth;
pub mod threshold;

pub use calibrate::{apply_temperature, fit_temperature, TemperatureScaler};
pub use cost::{outcome_of, value_at, value_of, CostSpec, SelectiveOutcome, ValuePoint};
pub use dataset::{
    load_dataset, save_dataset, split_check, LabeledDataset, PredictionRecord, ScoreKind,
};
pub use error::{Error, Result};
pub use harness::{run_compare, run_curve, CompareReport, CurveConfig, Rule, ValueCurve};
pub use metrics::{abece, calibration_gain, ece, joint_density, AbeceReport, EceReport};
pub use synth::{distort, generate_calibrated, generate_impulse, ImpulseSpec};
pub use threshold::{
    empirical_threshold, theoretical_threshold, SearchMode, ThresholdPolicy,
    ThresholdSearchResult,
};
