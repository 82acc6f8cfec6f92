//! The end-to-end evaluation flow: value curves over a cost grid under
//! several threshold rules, optional recalibration first, and
//! multi-model comparison.
//!
//! For each cost factor on the grid a policy is derived per rule and
//! priced on the test split. Empirical rules re-tune the threshold at
//! every grid point. Grid points may be evaluated in parallel; results
//! are assembled in grid order so output is deterministic.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{apply_temperature, fit_temperature};
use crate::cost::{value_at, CostSpec};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::threshold::{
    empirical_threshold, theoretical_threshold, SearchMode, ThresholdPolicy,
};

/// How the threshold for each grid point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Break-even cutoff k/(k+1) applied to the test split.
    Theoretical,
    /// Cutoff tuned on the tune split, applied to the test split.
    EmpiricalTune,
    /// Cutoff tuned on the test split itself: the achievable upper bound.
    EmpiricalTest,
    /// A caller-supplied fixed cutoff.
    Fixed,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Rule::Theoretical => "theoretical",
            Rule::EmpiricalTune => "empirical_tune",
            Rule::EmpiricalTest => "empirical_test",
            Rule::Fixed => "fixed",
        };
        f.write_str(name)
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theoretical" => Ok(Rule::Theoretical),
            "empirical_tune" => Ok(Rule::EmpiricalTune),
            "empirical_test" => Ok(Rule::EmpiricalTest),
            "fixed" => Ok(Rule::Fixed),
            other => Err(Error::invalid(format!(
                "unknown rule {other:?}; expected theoretical, empirical_tune, empirical_test, or fixed"
            ))),
        }
    }
}

/// Binary asymmetric sweep regimes: hold the false-positive cost at 1
/// while the false-negative cost follows the grid, or move both together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KfpMode {
    #[serde(rename = "fixed_1")]
    Fixed1,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricConfig {
    pub k_fp_mode: KfpMode,
    #[serde(default = "default_positive_class")]
    pub positive_class: usize,
}

fn default_positive_class() -> usize {
    1
}

fn default_k_max() -> f64 {
    10.0
}

fn default_k_step() -> f64 {
    0.25
}

fn default_rules() -> Vec<Rule> {
    vec![Rule::Theoretical]
}

/// Configuration of a curve run; mirrors the JSON accepted by
/// `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub k_step: f64,
    pub rules: Vec<Rule>,
    pub calibrate_first: bool,
    pub fixed_tau: Option<f64>,
    pub asymmetric: Option<AsymmetricConfig>,
    pub empirical_mode: SearchMode,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            k_min: 0.0,
            k_max: default_k_max(),
            k_step: default_k_step(),
            rules: default_rules(),
            calibrate_first: false,
            fixed_tau: None,
            asymmetric: None,
            empirical_mode: SearchMode::Global,
        }
    }
}

impl CurveConfig {
    pub fn validate(&self, has_tune: bool) -> Result<()> {
        if !(self.k_min.is_finite() && self.k_max.is_finite() && self.k_min <= self.k_max) {
            return Err(Error::invalid(format!(
                "bad k range [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if !(self.k_step.is_finite() && self.k_step > 0.0) {
            return Err(Error::invalid(format!("k_step must be > 0, got {}", self.k_step)));
        }
        if self.rules.is_empty() {
            return Err(Error::invalid("no rules requested"));
        }
        if self.rules.contains(&Rule::EmpiricalTune) && !has_tune {
            return Err(Error::invalid(
                "rule empirical_tune requires a tune dataset",
            ));
        }
        if self.calibrate_first && !has_tune {
            return Err(Error::invalid("calibrate_first requires a tune dataset"));
        }
        if self.rules.contains(&Rule::Fixed) && self.fixed_tau.is_none() {
            return Err(Error::invalid("rule fixed requires fixed_tau"));
        }
        if let Some(tau) = self.fixed_tau {
            ThresholdPolicy::global(tau).validate()?;
        }
        if let Some(asym) = &self.asymmetric {
            if asym.positive_class > 1 {
                return Err(Error::invalid(format!(
                    "positive_class must be 0 or 1, got {}",
                    asym.positive_class
                )));
            }
        }
        Ok(())
    }

    /// Grid points k_min, k_min + step, ... up to and including k_max
    /// (within a half-ulp-scale slack so exact endpoints survive float
    /// accumulation).
    pub fn k_grid(&self) -> Vec<f64> {
        let mut grid = Vec::new();
        let mut i = 0u32;
        loop {
            let k = self.k_min + f64::from(i) * self.k_step;
            if k > self.k_max + self.k_step * 1e-9 {
                break;
            }
            grid.push(k);
            i += 1;
        }
        grid
    }

    /// The cost spec evaluated at one grid point.
    pub fn spec_for(&self, k: f64) -> CostSpec {
        match &self.asymmetric {
            None => CostSpec::Uniform { k },
            Some(asym) => {
                let k_fp = match asym.k_fp_mode {
                    KfpMode::Fixed1 => 1.0,
                    KfpMode::Equal => k,
                };
                CostSpec::BinaryAsymmetric {
                    k_fp,
                    k_fn: k,
                    positive_class: asym.positive_class,
                }
            }
        }
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: f64,
    pub policy: ThresholdPolicy,
    pub rho: f64,
    pub alpha: f64,
    pub value: f64,
}

/// Run metadata carried alongside the points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub tune: Option<String>,
    pub test: String,
    pub calibrated: bool,
    pub temperature: Option<f64>,
    pub seed: Option<u64>,
}

/// Value as a function of the cost factor, for one model under one rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCurve {
    pub model: String,
    pub rule: Rule,
    pub points: Vec<CurvePoint>,
    pub meta: CurveMeta,
}

fn policy_for(
    rule: Rule,
    spec: &CostSpec,
    tune: Option<&LabeledDataset>,
    test: &LabeledDataset,
    config: &CurveConfig,
) -> Result<ThresholdPolicy> {
    match rule {
        Rule::Theoretical => theoretical_threshold(spec),
        Rule::EmpiricalTune => {
            let tune = tune.ok_or_else(|| {
                Error::invalid("rule empirical_tune requires a tune dataset")
            })?;
            Ok(empirical_threshold(tune, spec, config.empirical_mode)?.policy)
        }
        Rule::EmpiricalTest => {
            Ok(empirical_threshold(test, spec, config.empirical_mode)?.policy)
        }
        Rule::Fixed => {
            let tau = config
                .fixed_tau
                .ok_or_else(|| Error::invalid("rule fixed requires fixed_tau"))?;
            Ok(ThresholdPolicy::global(tau))
        }
    }
}

fn rule_points(
    rule: Rule,
    tune: Option<&LabeledDataset>,
    test: &LabeledDataset,
    config: &CurveConfig,
) -> Result<Vec<CurvePoint>> {
    config
        .k_grid()
        .into_par_iter()
        .map(|k| {
            let spec = config.spec_for(k);
            let policy = policy_for(rule, &spec, tune, test, config)?;
            let point = value_at(test, &spec, &policy)?;
            Ok(CurvePoint {
                k,
                policy: point.policy,
                rho: point.rho,
                alpha: point.alpha,
                value: point.value,
            })
        })
        .collect()
}

/// Evaluate one tune/test pair: one curve per requested rule.
///
/// With `calibrate_first` a temperature is fit on the tune split and
/// applied to both splits before any thresholding.
pub fn run_curve(
    tune: Option<&LabeledDataset>,
    test: &LabeledDataset,
    config: &CurveConfig,
) -> Result<Vec<ValueCurve>> {
    config.validate(tune.is_some())?;
    if let Some(tune) = tune {
        if tune.num_classes != test.num_classes {
            return Err(Error::ClassMismatch {
                expected: test.num_classes,
                found: tune.num_classes,
            });
        }
    }
    let mut temperature = None;
    let (tune_owned, test_owned);
    let (tune_ref, test_ref): (Option<&LabeledDataset>, &LabeledDataset) =
        if config.calibrate_first {
            let tune = tune.expect("validated above");
            let scaler = fit_temperature(tune)?;
            temperature = Some(scaler.temperature);
            tune_owned = apply_temperature(&scaler, tune);
            test_owned = apply_temperature(&scaler, test);
            (Some(&tune_owned), &test_owned)
        } else {
            (tune, test)
        };
    let meta = CurveMeta {
        tune: tune.map(|d| d.name.clone()),
        test: test.name.clone(),
        calibrated: config.calibrate_first,
        temperature,
        seed: None,
    };
    config
        .rules
        .iter()
        .map(|&rule| {
            Ok(ValueCurve {
                model: test.name.clone(),
                rule,
                points: rule_points(rule, tune_ref, test_ref, config)?,
                meta: meta.clone(),
            })
        })
        .collect()
}

/// Pointwise mean of several curves for the same rule and grid. Values,
/// coverage, and accepted accuracy are averaged; the per-pair policies
/// are summarized by the mean of their scalar summaries.
pub fn average_curves(curves: &[ValueCurve]) -> Result<ValueCurve> {
    let Some(first) = curves.first() else {
        return Err(Error::invalid("nothing to average"));
    };
    for curve in &curves[1..] {
        if curve.rule != first.rule {
            return Err(Error::invalid("cannot average curves under different rules"));
        }
        if curve.points.len() != first.points.len()
            || curve
                .points
                .iter()
                .zip(&first.points)
                .any(|(a, b)| a.k != b.k)
        {
            return Err(Error::invalid("cannot average curves over different grids"));
        }
    }
    let n = curves.len() as f64;
    let points = first
        .points
        .iter()
        .enumerate()
        .map(|(i, base)| {
            let mean = |get: &dyn Fn(&CurvePoint) -> f64| {
                curves.iter().map(|c| get(&c.points[i])).sum::<f64>() / n
            };
            CurvePoint {
                k: base.k,
                policy: ThresholdPolicy::global(mean(&|p| p.policy.summary_tau())),
                rho: mean(&|p| p.rho),
                alpha: mean(&|p| p.alpha),
                value: mean(&|p| p.value),
            }
        })
        .collect();
    Ok(ValueCurve {
        model: "average".into(),
        rule: first.rule,
        points,
        meta: first.meta.clone(),
    })
}

/// Serialize curves as CSV: `model,rule,k,tau,rho,alpha,value`, fixed
/// 6-decimal formatting. Per-class policies report their strictest
/// threshold in the tau column; the JSON form keeps the full policy.
pub fn curves_to_csv(curves: &[ValueCurve]) -> String {
    let mut out = String::from("model,rule,k,tau,rho,alpha,value\n");
    for curve in curves {
        for p in &curve.points {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                curve.model,
                curve.rule,
                p.k,
                p.policy.summary_tau(),
                p.rho,
                p.alpha,
                p.value
            ));
        }
    }
    out
}

/// One model's inputs for a comparison run.
#[derive(Debug, Clone)]
pub struct ModelData {
    pub name: String,
    pub tune: Option<LabeledDataset>,
    pub test: LabeledDataset,
}

/// Per-model row of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareModelRow {
    pub name: String,
    /// Accuracy on the test split (k = 0, tau = 0).
    pub accuracy: f64,
    /// Value at each grid k, aligned with `ks`.
    pub values: Vec<f64>,
}

/// Accuracy-vs-value leaderboard over a shared cost grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rule: Rule,
    pub ks: Vec<f64>,
    pub models: Vec<CompareModelRow>,
    pub best_by_accuracy: String,
    /// Winner by value at each grid k.
    pub best_by_value: Vec<String>,
    /// True wherever best-by-value differs from best-by-accuracy.
    pub crossovers: Vec<bool>,
}

/// Evaluate several models on the same grid and flag every cost factor
/// where the value winner differs from the accuracy winner. Ties break
/// by model name order.
pub fn run_compare(models: &[ModelData], config: &CurveConfig) -> Result<CompareReport> {
    if models.len() < 2 {
        return Err(Error::invalid("compare needs at least two models"));
    }
    let k = models[0].test.num_classes;
    for m in models {
        if m.test.num_classes != k {
            return Err(Error::ClassMismatch {
                expected: k,
                found: m.test.num_classes,
            });
        }
    }
    let rule = *config.rules.first().unwrap_or(&Rule::Theoretical);
    let has_tune = models.iter().all(|m| m.tune.is_some());
    config.validate(has_tune)?;
    let ks = config.k_grid();
    let rows = models
        .iter()
        .map(|m| {
            let points = rule_points(rule, m.tune.as_ref(), &m.test, config)?;
            Ok(CompareModelRow {
                name: m.name.clone(),
                accuracy: m.test.accuracy(),
                values: points.into_iter().map(|p| p.value).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Ties break toward the lexicographically smallest name.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].name.cmp(&rows[b].name));
    let best_by = |metric: &dyn Fn(usize) -> f64| -> String {
        let mut best = order[0];
        for &i in &order[1..] {
            if metric(i) > metric(best) {
                best = i;
            }
        }
        rows[best].name.clone()
    };
    let best_by_accuracy = best_by(&|i| rows[i].accuracy);
    let best_by_value: Vec<String> = (0..ks.len())
        .map(|j| best_by(&|i| rows[i].values[j]))
        .collect();
    let crossovers = best_by_value
        .iter()
        .map(|name| *name != best_by_accuracy)
        .collect();
    Ok(CompareReport {
        rule,
        ks,
        models: rows,
        best_by_accuracy,
        best_by_value,
        crossovers,
    })
}

impl CompareReport {
    /// Markdown table: one row per model, columns for accuracy and the
    /// value at k in {1, 2, 4, 8, 10} (restricted to grid points).
    pub fn to_markdown(&self) -> String {
        let mut cols: Vec<usize> = [1.0, 2.0, 4.0, 8.0, 10.0]
            .iter()
            .filter_map(|want| {
                self.ks.iter().position(|k| (k - want).abs() < 1e-9)
            })
            .collect();
        if cols.is_empty() {
            cols = (0..self.ks.len()).collect();
        }
        let mut out = String::from("| model | accuracy |");
        for &c in &cols {
            out.push_str(&format!(" V(k={}) |", self.ks[c]));
        }
        out.push('\n');
        out.push_str("|---|---|");
        for _ in &cols {
            out.push_str("---|");
        }
        out.push('\n');
        for row in &self.models {
            out.push_str(&format!("| {} | {:.3} |", row.name, row.accuracy));
            for &c in &cols {
                out.push_str(&format!(" {:.3} |", row.values[c]));
            }
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&format!("best by accuracy: {}\n", self.best_by_accuracy));
        let flagged: Vec<String> = self
            .ks
            .iter()
            .zip(&self.crossovers)
            .filter(|(_, &x)| x)
            .map(|(k, _)| format!("{k}"))
            .collect();
        if flagged.is_empty() {
            out.push_str("value agrees with accuracy at every k\n");
        } else {
            out.push_str(&format!(
                "value winner differs from accuracy winner at k = {}\n",
                flagged.join(", ")
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_impulse, ImpulseSpec};

    fn m(spec: ImpulseSpec, name: &str) -> LabeledDataset {
        let mut d = generate_impulse(&spec).unwrap();
        d.name = name.into();
        d
    }

    #[test]
    fn default_grid_is_41_points() {
        let grid = CurveConfig::default().k_grid();
        assert_eq!(grid.len(), 41);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[40], 10.0);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn theoretical_curve_matches_closed_form() {
        let data = m(ImpulseSpec::m1(1000, 1), "m1");
        let config = CurveConfig::default();
        let curves = run_curve(Some(&data), &data, &config).unwrap();
        assert_eq!(curves.len(), 1);
        let curve = &curves[0];
        for p in &curve.points {
            let expected = if p.k <= 1.5 { 0.6 - 0.4 * p.k } else { 0.0 };
            assert!(
                (p.value - expected).abs() < 1e-9,
                "k={}: {} vs {expected}",
                p.k,
                p.value
            );
        }
        // k = 0 means tau = 0 and the value is plain accuracy.
        assert_eq!(curve.points[0].value, data.accuracy());
    }

    #[test]
    fn empirical_test_dominates_every_rule() {
        let tune = m(ImpulseSpec::m2(600, 2), "tune");
        let test = m(ImpulseSpec::m2(600, 4), "test");
        let config = CurveConfig {
            rules: vec![
                Rule::Theoretical,
                Rule::EmpiricalTune,
                Rule::EmpiricalTest,
                Rule::Fixed,
            ],
            fixed_tau: Some(0.7),
            ..CurveConfig::default()
        };
        let curves = run_curve(Some(&tune), &test, &config).unwrap();
        let by_rule = |r: Rule| curves.iter().find(|c| c.rule == r).unwrap();
        let upper = by_rule(Rule::EmpiricalTest);
        for rule in [Rule::Theoretical, Rule::EmpiricalTune, Rule::Fixed] {
            for (a, b) in by_rule(rule).points.iter().zip(&upper.points) {
                assert!(
                    b.value >= a.value - 1e-12,
                    "rule {rule} beat empirical_test at k={}",
                    a.k
                );
            }
        }
    }

    #[test]
    fn theoretical_curve_non_increasing_for_calibrated_impulses() {
        let data = m(ImpulseSpec::m3(1000, 5), "m3");
        let curves = run_curve(None, &data, &CurveConfig::default()).unwrap();
        for w in curves[0].points.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
    }

    #[test]
    fn calibrate_first_requires_tune() {
        let data = m(ImpulseSpec::m1(100, 6), "m1");
        let config = CurveConfig { calibrate_first: true, ..CurveConfig::default() };
        assert!(run_curve(None, &data, &config).is_err());
        assert!(run_curve(Some(&data), &data, &config).is_ok());
    }

    #[test]
    fn curve_output_is_deterministic() {
        let tune = m(ImpulseSpec::m2(400, 7), "tune");
        let test = m(ImpulseSpec::m3(400, 8), "test");
        let config = CurveConfig {
            rules: vec![Rule::Theoretical, Rule::EmpiricalTune],
            ..CurveConfig::default()
        };
        let a = curves_to_csv(&run_curve(Some(&tune), &test, &config).unwrap());
        let b = curves_to_csv(&run_curve(Some(&tune), &test, &config).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("model,rule,k,tau,rho,alpha,value\n"));
    }

    #[test]
    fn asymmetric_grid_uses_binary_specs() {
        let config = CurveConfig {
            asymmetric: Some(AsymmetricConfig {
                k_fp_mode: KfpMode::Fixed1,
                positive_class: 1,
            }),
            ..CurveConfig::default()
        };
        match config.spec_for(4.0) {
            CostSpec::BinaryAsymmetric { k_fp, k_fn, positive_class } => {
                assert_eq!(k_fp, 1.0);
                assert_eq!(k_fn, 4.0);
                assert_eq!(positive_class, 1);
            }
            other => panic!("expected binary spec, got {other:?}"),
        }
        let equal = CurveConfig {
            asymmetric: Some(AsymmetricConfig {
                k_fp_mode: KfpMode::Equal,
                positive_class: 0,
            }),
            ..CurveConfig::default()
        };
        match equal.spec_for(4.0) {
            CostSpec::BinaryAsymmetric { k_fp, k_fn, .. } => {
                assert_eq!(k_fp, 4.0);
                assert_eq!(k_fn, 4.0);
            }
            other => panic!("expected binary spec, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_curve_runs_end_to_end() {
        let mut spec = ImpulseSpec::m2(400, 11);
        spec.num_classes = 2;
        // With K=2 a 0.1-confidence component is unrepresentable; move it.
        spec.components[1].confidence = 0.55;
        spec.components[1].accuracy = 0.55;
        let data = m(spec, "bin");
        let config = CurveConfig {
            asymmetric: Some(AsymmetricConfig {
                k_fp_mode: KfpMode::Fixed1,
                positive_class: 1,
            }),
            ..CurveConfig::default()
        };
        let curves = run_curve(None, &data, &config).unwrap();
        assert_eq!(curves[0].points.len(), 41);
        for p in &curves[0].points {
            assert!(p.value.is_finite());
        }
    }

    #[test]
    fn compare_flags_value_crossover() {
        let models = vec![
            ModelData {
                name: "m1".into(),
                tune: None,
                test: m(ImpulseSpec::m1(1000, 1), "m1"),
            },
            ModelData {
                name: "m2".into(),
                tune: None,
                test: m(ImpulseSpec::m2(1000, 2), "m2"),
            },
            ModelData {
                name: "m3".into(),
                tune: None,
                test: m(ImpulseSpec::m3(1000, 3), "m3"),
            },
        ];
        let report = run_compare(&models, &CurveConfig::default()).unwrap();
        // m1 and m3 tie on accuracy 0.6; name order picks m1.
        assert_eq!(report.best_by_accuracy, "m1");
        // At k = 0 value equals accuracy, so no crossover there.
        assert_eq!(report.best_by_value[0], "m1");
        assert!(!report.crossovers[0]);
        // At k = 4 the split models win on value.
        let at4 = report.ks.iter().position(|&k| k == 4.0).unwrap();
        assert!(report.crossovers[at4]);
        assert_ne!(report.best_by_value[at4], "m1");
        let md = report.to_markdown();
        assert!(md.contains("| model | accuracy |"), "{md}");
        assert!(md.contains("V(k=4)"), "{md}");
    }

    #[test]
    fn compare_identical_models_never_cross() {
        let a = m(ImpulseSpec::m1(500, 4), "a");
        let b = m(ImpulseSpec::m1(500, 4), "b");
        let models = vec![
            ModelData { name: "a".into(), tune: None, test: a },
            ModelData { name: "b".into(), tune: None, test: b },
        ];
        let report = run_compare(&models, &CurveConfig::default()).unwrap();
        assert!(report.crossovers.iter().all(|&x| !x));
    }

    #[test]
    fn compare_needs_two_models() {
        let models = vec![ModelData {
            name: "solo".into(),
            tune: None,
            test: m(ImpulseSpec::m1(100, 5), "solo"),
        }];
        assert!(run_compare(&models, &CurveConfig::default()).is_err());
    }

    #[test]
    fn averaging_requires_matching_grids() {
        let a = m(ImpulseSpec::m1(200, 6), "a");
        let b = m(ImpulseSpec::m3(200, 7), "b");
        let config = CurveConfig::default();
        let ca = run_curve(None, &a, &config).unwrap().remove(0);
        let cb = run_curve(None, &b, &config).unwrap().remove(0);
        let avg = average_curves(&[ca.clone(), cb.clone()]).unwrap();
        assert_eq!(avg.model, "average");
        for ((pa, pb), pm) in ca.points.iter().zip(&cb.points).zip(&avg.points) {
            assert!((pm.value - 0.5 * (pa.value + pb.value)).abs() < 1e-12);
        }
        let short = CurveConfig { k_max: 5.0, ..CurveConfig::default() };
        let cc = run_curve(None, &a, &short).unwrap().remove(0);
        assert!(average_curves(&[ca, cc]).is_err());
    }

    #[test]
    fn config_json_roundtrip_with_defaults() {
        let parsed: CurveConfig =
            serde_json::from_str(r#"{"rules":["theoretical","empirical_tune"],"k_max":4.0}"#)
                .unwrap();
        assert_eq!(parsed.k_min, 0.0);
        assert_eq!(parsed.k_max, 4.0);
        assert_eq!(parsed.k_step, 0.25);
        assert_eq!(parsed.rules, vec![Rule::Theoretical, Rule::EmpiricalTune]);
        assert!(!parsed.calibrate_first);
    }
}
