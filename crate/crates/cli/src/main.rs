//! selval: evaluate classifiers as selective classifiers from their
//! prediction logs.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 I/O error.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use selval::calibrate::{apply_temperature, fit_temperature, TemperatureScaler};
use selval::cost::{value_at, CostSpec};
use selval::dataset::{load_dataset, write_jsonl, LabeledDataset, ScoreKind};
use selval::error::Error as CoreError;
use selval::harness::{
    average_curves, curves_to_csv, run_compare, run_curve, AsymmetricConfig, CurveConfig,
    KfpMode, ModelData, Rule, ValueCurve,
};
use selval::metrics::{abece, calibration_gain, ece, joint_density, GainRule};
use selval::synth::{generate_calibrated, generate_impulse, ImpulseComponent, ImpulseSpec};
use selval::threshold::{
    empirical_threshold, theoretical_threshold, SearchMode, ThresholdPolicy,
};

#[derive(Parser)]
#[command(name = "selval", version, about = "Cost-aware evaluation of selective classifiers")]
struct Cli {
    /// Output format (default: short human-readable form).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Probabilities,
    Logits,
}

impl From<KindArg> for ScoreKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Probabilities => ScoreKind::Probabilities,
            KindArg::Logits => ScoreKind::Logits,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    Theoretical,
    EmpiricalTune,
    EmpiricalTest,
    Fixed,
}

impl From<RuleArg> for Rule {
    fn from(rule: RuleArg) -> Self {
        match rule {
            RuleArg::Theoretical => Rule::Theoretical,
            RuleArg::EmpiricalTune => Rule::EmpiricalTune,
            RuleArg::EmpiricalTest => Rule::EmpiricalTest,
            RuleArg::Fixed => Rule::Fixed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Global,
    PerClass,
}

impl From<ModeArg> for SearchMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Global => SearchMode::Global,
            ModeArg::PerClass => SearchMode::PerClass,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AsymArg {
    #[value(name = "fixed_1")]
    Fixed1,
    Equal,
}

/// Shared flags for commands that read prediction logs.
#[derive(Args)]
struct LoadArgs {
    /// Interpret raw scores as probabilities or logits.
    #[arg(long, value_enum, default_value_t = KindArg::Probabilities)]
    kind: KindArg,

    /// Expected number of classes (inferred from the data when omitted).
    #[arg(long)]
    num_classes: Option<usize>,
}

impl LoadArgs {
    fn load(&self, path: &Path) -> Result<LabeledDataset, CliError> {
        Ok(load_dataset(path, self.kind.into(), self.num_classes)?)
    }
}

/// Cost model flags: a uniform --k, a binary --k-fp/--k-fn pair, or a
/// full spec as inline JSON.
#[derive(Args)]
struct CostArgs {
    /// Uniform error cost k.
    #[arg(long)]
    k: Option<f64>,

    /// Binary false-positive cost (requires --k-fn).
    #[arg(long)]
    k_fp: Option<f64>,

    /// Binary false-negative cost (requires --k-fp).
    #[arg(long)]
    k_fn: Option<f64>,

    /// Positive class index for binary costs.
    #[arg(long, default_value_t = 1)]
    positive_class: usize,

    /// Cost spec as inline JSON, e.g. '{"kind":"uniform","k":4.0}'.
    #[arg(long)]
    spec: Option<String>,
}

impl CostArgs {
    fn resolve(&self) -> Result<CostSpec, CliError> {
        let spec = if let Some(json) = &self.spec {
            serde_json::from_str(json)
                .map_err(|e| CliError::Usage(format!("bad --spec JSON: {e}")))?
        } else if let Some(k) = self.k {
            CostSpec::Uniform { k }
        } else if let (Some(k_fp), Some(k_fn)) = (self.k_fp, self.k_fn) {
            CostSpec::BinaryAsymmetric {
                k_fp,
                k_fn,
                positive_class: self.positive_class,
            }
        } else {
            return Err(CliError::Usage(
                "specify a cost model: --k, --k-fp with --k-fn, or --spec".into(),
            ));
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one (cost, rule) point on a dataset.
    Value {
        /// Dataset to price (the test split).
        #[arg(long)]
        data: PathBuf,
        /// Tuning split for --rule empirical-tune.
        #[arg(long)]
        tune: Option<PathBuf>,
        #[command(flatten)]
        cost: CostArgs,
        #[arg(long, value_enum, default_value_t = RuleArg::Theoretical)]
        rule: RuleArg,
        /// Fixed cutoff for --rule fixed.
        #[arg(long)]
        tau: Option<f64>,
        /// Empirical search mode.
        #[arg(long, value_enum, default_value_t = ModeArg::Global)]
        mode: ModeArg,
        #[command(flatten)]
        load: LoadArgs,
    },

    /// Value curves over a cost grid, one curve per rule.
    Curve {
        /// Test split.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Tuning split.
        #[arg(long)]
        tune: Option<PathBuf>,
        /// Additional TUNE:TEST path pairs (repeatable).
        #[arg(long = "pair")]
        pairs: Vec<String>,
        /// Comma-separated rules: theoretical,empirical_tune,empirical_test,fixed.
        #[arg(long)]
        rules: Option<String>,
        #[arg(long)]
        k_min: Option<f64>,
        #[arg(long)]
        k_max: Option<f64>,
        #[arg(long)]
        k_step: Option<f64>,
        /// Fit a temperature on the tune split and apply it to both
        /// splits before thresholding.
        #[arg(long)]
        calibrate_first: bool,
        /// Cutoff for the fixed rule.
        #[arg(long)]
        fixed_tau: Option<f64>,
        /// Binary asymmetric sweep: hold k_fp at 1 or move both costs.
        #[arg(long, value_enum)]
        asymmetric: Option<AsymArg>,
        /// Positive class for --asymmetric.
        #[arg(long, default_value_t = 1)]
        positive_class: usize,
        /// Empirical search mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// JSON file mirroring the curve configuration; explicit flags
        /// override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Average values pointwise across all pairs (thresholds stay
        /// per-pair; the tau column becomes their mean).
        #[arg(long)]
        average: bool,
        /// Override the model name (single pair only).
        #[arg(long)]
        model_name: Option<String>,
        #[command(flatten)]
        load: LoadArgs,
    },

    /// Accuracy-vs-value leaderboard across models.
    Compare {
        /// NAME=[TUNE:]TEST, repeatable (at least twice).
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long, value_enum, default_value_t = RuleArg::Theoretical)]
        rule: RuleArg,
        #[arg(long)]
        k_min: Option<f64>,
        #[arg(long)]
        k_max: Option<f64>,
        #[arg(long)]
        k_step: Option<f64>,
        #[command(flatten)]
        load: LoadArgs,
    },

    /// Print the theoretical threshold, or tune one empirically.
    Threshold {
        #[command(flatten)]
        cost: CostArgs,
        /// Tune on a dataset instead of using the closed form.
        #[arg(long)]
        empirical: bool,
        /// Tuning split for --empirical.
        #[arg(long)]
        tune: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Global)]
        mode: ModeArg,
        #[command(flatten)]
        load: LoadArgs,
    },

    /// Fit, save, load, and apply a temperature scaler.
    Calibrate {
        /// Tuning split to fit on.
        #[arg(long)]
        tune: Option<PathBuf>,
        /// Load a previously saved scaler instead of fitting.
        #[arg(long)]
        scaler: Option<PathBuf>,
        /// Save the scaler as JSON.
        #[arg(long)]
        save: Option<PathBuf>,
        /// Apply the scaler to this dataset and emit the rescaled JSONL.
        #[arg(long)]
        apply: Option<PathBuf>,
        #[command(flatten)]
        load: LoadArgs,
    },

    /// Confidence-binned expected calibration error.
    Ece {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[command(flatten)]
        load: LoadArgs,
    },

    /// Accuracy-binned calibration error over resampled item sets.
    Abece {
        #[arg(long)]
        data: PathBuf,
        /// Items per sample (n).
        #[arg(long, default_value_t = 20)]
        sample_size: usize,
        /// Number of samples (N).
        #[arg(long, default_value_t = 1000)]
        num_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        load: LoadArgs,
    },

    /// Joint (accuracy, mean confidence) density over resampled sets.
    Density {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 20)]
        sample_size: usize,
        #[arg(long, default_value_t = 1000)]
        num_samples: usize,
        #[arg(long, default_value_t = 20)]
        conf_bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        load: LoadArgs,
    },

    /// Value gained between two models making identical predictions.
    Gain {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[command(flatten)]
        cost: CostArgs,
        /// theoretical or empirical threshold rule.
        #[arg(long, default_value = "theoretical")]
        rule: String,
        /// Tuning split for the empirical rule.
        #[arg(long)]
        tune: Option<PathBuf>,
        #[command(flatten)]
        load: LoadArgs,
    },

    /// Emit a synthetic dataset as JSONL.
    Synth {
        /// m1, m2, m3, calibrated, or custom (with --component).
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 1000)]
        items: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of classes.
        #[arg(long, default_value_t = 10)]
        classes: usize,
        /// Dirichlet concentration for --model calibrated.
        #[arg(long, default_value_t = 0.5)]
        concentration: f64,
        /// Impulse component WEIGHT:CONFIDENCE:ACCURACY for --model
        /// custom (repeatable).
        #[arg(long = "component")]
        components: Vec<String>,
        /// Dataset name override.
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Debug)]
enum CliError {
    Core(CoreError),
    Usage(String),
    Write(PathBuf, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Write(path, e) => write!(f, "writing {}: {e}", path.display()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(CoreError::Io { .. }) | CliError::Write(..) => 2,
            _ => 1,
        }
    }
}

/// Where and how to emit results.
struct Out {
    format: Option<Format>,
    output: Option<PathBuf>,
}

impl Out {
    fn write(&self, content: &str) -> Result<(), CliError> {
        match &self.output {
            Some(path) => {
                fs::write(path, content).map_err(|e| CliError::Write(path.clone(), e))
            }
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                lock.write_all(content.as_bytes())
                    .and_then(|()| lock.flush())
                    .map_err(|e| CliError::Write(PathBuf::from("<stdout>"), e))
            }
        }
    }

    /// Emit in the requested format; `None` entries mean the format is
    /// not supported for this command.
    fn emit(
        &self,
        human: String,
        json: Option<String>,
        csv: Option<String>,
        md: Option<String>,
    ) -> Result<(), CliError> {
        let content = match self.format {
            None => Some(human),
            Some(Format::Json) => json,
            Some(Format::Csv) => csv,
            Some(Format::Md) => md,
        };
        match content {
            Some(mut text) => {
                if !text.ends_with('\n') {
                    text.push('\n');
                }
                self.write(&text)
            }
            None => Err(CliError::Usage(format!(
                "format {:?} is not supported by this command",
                self.format.unwrap()
            ))),
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialization")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = Out {
        format: cli.format,
        output: cli.output.clone(),
    };
    match run(cli.command, &out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command, out: &Out) -> Result<(), CliError> {
    match command {
        Command::Value { data, tune, cost, rule, tau, mode, load } => {
            cmd_value(out, &data, tune.as_deref(), &cost, rule, tau, mode, &load)
        }
        Command::Curve {
            test,
            tune,
            pairs,
            rules,
            k_min,
            k_max,
            k_step,
            calibrate_first,
            fixed_tau,
            asymmetric,
            positive_class,
            mode,
            config,
            average,
            model_name,
            load,
        } => {
            let config = build_config(
                config.as_deref(),
                rules.as_deref(),
                k_min,
                k_max,
                k_step,
                calibrate_first,
                fixed_tau,
                asymmetric,
                positive_class,
                mode,
            )?;
            cmd_curve(out, test.as_deref(), tune.as_deref(), &pairs, &config, average, model_name, &load)
        }
        Command::Compare { models, rule, k_min, k_max, k_step, load } => {
            let mut config = CurveConfig { rules: vec![rule.into()], ..CurveConfig::default() };
            if let Some(v) = k_min {
                config.k_min = v;
            }
            if let Some(v) = k_max {
                config.k_max = v;
            }
            if let Some(v) = k_step {
                config.k_step = v;
            }
            cmd_compare(out, &models, &config, &load)
        }
        Command::Threshold { cost, empirical, tune, mode, load } => {
            cmd_threshold(out, &cost, empirical, tune.as_deref(), mode, &load)
        }
        Command::Calibrate { tune, scaler, save, apply, load } => cmd_calibrate(
            out,
            tune.as_deref(),
            scaler.as_deref(),
            save.as_deref(),
            apply.as_deref(),
            &load,
        ),
        Command::Ece { data, bins, load } => {
            let data = load.load(&data)?;
            let report = ece(&data, bins)?;
            out.emit(
                format!("ece {} over {} bins", report.ece, report.num_bins),
                Some(to_json(&report)),
                Some(report.to_csv()),
                None,
            )
        }
        Command::Abece { data, sample_size, num_samples, seed, load } => {
            let data = load.load(&data)?;
            let report = abece(&data, sample_size, num_samples, seed)?;
            out.emit(
                format!(
                    "abece_sum {} abece_weighted {} (n={}, samples={}, seed={})",
                    report.abece_sum,
                    report.abece_weighted,
                    report.sample_size,
                    report.num_samples,
                    report.seed
                ),
                Some(to_json(&report)),
                Some(report.to_csv()),
                None,
            )
        }
        Command::Density { data, sample_size, num_samples, conf_bins, seed, load } => {
            let data = load.load(&data)?;
            let density = joint_density(&data, sample_size, num_samples, conf_bins, seed)?;
            out.emit(
                format!(
                    "{} accuracy levels x {} confidence bins over {} samples (seed={})",
                    density.accuracy_levels.len(),
                    density.conf_bins,
                    density.num_samples,
                    density.seed
                ),
                Some(to_json(&density)),
                Some(density.to_csv()),
                None,
            )
        }
        Command::Gain { before, after, cost, rule, tune, load } => {
            let spec = cost.resolve()?;
            let rule = match rule.as_str() {
                "theoretical" => GainRule::Theoretical,
                "empirical" => GainRule::Empirical,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown gain rule {other:?}; expected theoretical or empirical"
                    )))
                }
            };
            let before = load.load(&before)?;
            let after = load.load(&after)?;
            let tune = tune.as_deref().map(|p| load.load(p)).transpose()?;
            let gain = calibration_gain(&before, &after, &spec, rule, tune.as_ref())?;
            out.emit(
                format!(
                    "gain {:.6} (before {:.6} -> after {:.6}), argmax_equal {}",
                    gain.gain, gain.value_before, gain.value_after, gain.argmax_equal
                ),
                Some(to_json(&gain)),
                None,
                None,
            )
        }
        Command::Synth { model, items, seed, classes, concentration, components, name } => {
            cmd_synth(out, &model, items, seed, classes, concentration, &components, name)
        }
    }
}

fn policy_for_rule(
    rule: RuleArg,
    spec: &CostSpec,
    data: &LabeledDataset,
    tune: Option<&LabeledDataset>,
    tau: Option<f64>,
    mode: ModeArg,
) -> Result<ThresholdPolicy, CliError> {
    match rule {
        RuleArg::Theoretical => Ok(theoretical_threshold(spec)?),
        RuleArg::EmpiricalTune => {
            let tune = tune.ok_or_else(|| {
                CliError::Usage("--rule empirical-tune requires --tune".into())
            })?;
            Ok(empirical_threshold(tune, spec, mode.into())?.policy)
        }
        RuleArg::EmpiricalTest => Ok(empirical_threshold(data, spec, mode.into())?.policy),
        RuleArg::Fixed => {
            let tau =
                tau.ok_or_else(|| CliError::Usage("--rule fixed requires --tau".into()))?;
            let policy = ThresholdPolicy::global(tau);
            policy.validate()?;
            Ok(policy)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_value(
    out: &Out,
    data: &Path,
    tune: Option<&Path>,
    cost: &CostArgs,
    rule: RuleArg,
    tau: Option<f64>,
    mode: ModeArg,
    load: &LoadArgs,
) -> Result<(), CliError> {
    let spec = cost.resolve()?;
    let data = load.load(data)?;
    let tune = tune.map(|p| load.load(p)).transpose()?;
    let policy = policy_for_rule(rule, &spec, &data, tune.as_ref(), tau, mode)?;
    let point = value_at(&data, &spec, &policy)?;
    let k_column = match &spec {
        CostSpec::Uniform { k } => Some(*k),
        CostSpec::BinaryAsymmetric { k_fn, .. } => Some(*k_fn),
        CostSpec::Full { .. } => None,
    };
    let csv = k_column.map(|k| {
        let rule: Rule = rule.into();
        format!(
            "model,rule,k,tau,rho,alpha,value\n{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            data.name,
            rule,
            k,
            point.policy.summary_tau(),
            point.rho,
            point.alpha,
            point.value
        )
    });
    out.emit(format!("{:.6}", point.value), Some(to_json(&point)), csv, None)
}

#[allow(clippy::too_many_arguments)]
fn build_config(
    config_path: Option<&Path>,
    rules: Option<&str>,
    k_min: Option<f64>,
    k_max: Option<f64>,
    k_step: Option<f64>,
    calibrate_first: bool,
    fixed_tau: Option<f64>,
    asymmetric: Option<AsymArg>,
    positive_class: usize,
    mode: Option<ModeArg>,
) -> Result<CurveConfig, CliError> {
    let mut config = match config_path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CoreError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?
        }
        None => CurveConfig::default(),
    };
    if let Some(rules) = rules {
        config.rules = rules
            .split(',')
            .map(|r| r.trim().parse::<Rule>())
            .collect::<Result<Vec<_>, _>>()?;
    }
    if let Some(v) = k_min {
        config.k_min = v;
    }
    if let Some(v) = k_max {
        config.k_max = v;
    }
    if let Some(v) = k_step {
        config.k_step = v;
    }
    if calibrate_first {
        config.calibrate_first = true;
    }
    if let Some(tau) = fixed_tau {
        config.fixed_tau = Some(tau);
    }
    if let Some(asym) = asymmetric {
        config.asymmetric = Some(AsymmetricConfig {
            k_fp_mode: match asym {
                AsymArg::Fixed1 => KfpMode::Fixed1,
                AsymArg::Equal => KfpMode::Equal,
            },
            positive_class,
        });
    }
    if let Some(mode) = mode {
        config.empirical_mode = mode.into();
    }
    Ok(config)
}

#[allow(clippy::too_many_arguments)]
fn cmd_curve(
    out: &Out,
    test: Option<&Path>,
    tune: Option<&Path>,
    pairs: &[String],
    config: &CurveConfig,
    average: bool,
    model_name: Option<String>,
    load: &LoadArgs,
) -> Result<(), CliError> {
    let mut loaded: Vec<(Option<LabeledDataset>, LabeledDataset)> = Vec::new();
    if let Some(test) = test {
        let tune = tune.map(|p| load.load(p)).transpose()?;
        loaded.push((tune, load.load(test)?));
    } else if tune.is_some() {
        return Err(CliError::Usage("--tune given without --test".into()));
    }
    for pair in pairs {
        let (tune_path, test_path) = pair
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("--pair {pair:?} is not TUNE:TEST")))?;
        loaded.push((Some(load.load(Path::new(tune_path))?), load.load(Path::new(test_path))?));
    }
    if loaded.is_empty() {
        return Err(CliError::Usage("supply --test or at least one --pair".into()));
    }
    if let Some(name) = model_name {
        if loaded.len() != 1 {
            return Err(CliError::Usage(
                "--model-name only applies to a single dataset pair".into(),
            ));
        }
        loaded[0].1.name = name;
    }
    let mut per_pair: Vec<Vec<ValueCurve>> = Vec::new();
    for (tune, test) in &loaded {
        per_pair.push(run_curve(tune.as_ref(), test, config)?);
    }
    let curves: Vec<ValueCurve> = if average && per_pair.len() > 1 {
        let mut averaged = Vec::new();
        for (i, _) in config.rules.iter().enumerate() {
            let group: Vec<ValueCurve> =
                per_pair.iter().map(|curves| curves[i].clone()).collect();
            averaged.push(average_curves(&group)?);
        }
        averaged
    } else {
        per_pair.into_iter().flatten().collect()
    };
    let csv = curves_to_csv(&curves);
    out.emit(csv.clone(), Some(to_json(&curves)), Some(csv), None)
}

fn cmd_compare(
    out: &Out,
    model_args: &[String],
    config: &CurveConfig,
    load: &LoadArgs,
) -> Result<(), CliError> {
    let mut models = Vec::new();
    for arg in model_args {
        let (name, paths) = arg
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--model {arg:?} is not NAME=[TUNE:]TEST")))?;
        let (tune, test) = match paths.split_once(':') {
            Some((tune, test)) => (Some(load.load(Path::new(tune))?), load.load(Path::new(test))?),
            None => (None, load.load(Path::new(paths))?),
        };
        models.push(ModelData { name: name.to_string(), tune, test });
    }
    let report = run_compare(&models, config)?;
    let mut csv = String::from("model,accuracy,k,value\n");
    for row in &report.models {
        for (k, value) in report.ks.iter().zip(&row.values) {
            csv.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                row.name, row.accuracy, k, value
            ));
        }
    }
    out.emit(
        report.to_markdown(),
        Some(to_json(&report)),
        Some(csv),
        Some(report.to_markdown()),
    )
}

fn cmd_threshold(
    out: &Out,
    cost: &CostArgs,
    empirical: bool,
    tune: Option<&Path>,
    mode: ModeArg,
    load: &LoadArgs,
) -> Result<(), CliError> {
    let spec = cost.resolve()?;
    if empirical {
        let tune = tune.ok_or_else(|| CliError::Usage("--empirical requires --tune".into()))?;
        let tune = load.load(tune)?;
        let result = empirical_threshold(&tune, &spec, mode.into())?;
        let human = match &result.policy {
            ThresholdPolicy::Global { tau } => format!(
                "tau {tau} (tune value {:.6}, {} candidates)",
                result.tune_value, result.candidates_evaluated
            ),
            ThresholdPolicy::PerPredictedClass { taus } => {
                let mut lines: Vec<String> = taus
                    .iter()
                    .enumerate()
                    .map(|(class, tau)| format!("class {class}: tau {tau}"))
                    .collect();
                lines.push(format!(
                    "tune value {:.6}, {} candidates",
                    result.tune_value, result.candidates_evaluated
                ));
                lines.join("\n")
            }
        };
        out.emit(human, Some(to_json(&result)), None, None)
    } else {
        let policy = theoretical_threshold(&spec)?;
        let human = match &policy {
            ThresholdPolicy::Global { tau } => format!("{tau}"),
            ThresholdPolicy::PerPredictedClass { taus } => taus
                .iter()
                .enumerate()
                .map(|(class, tau)| format!("class {class}: tau {tau}"))
                .collect::<Vec<_>>()
                .join("\n"),
        };
        out.emit(human, Some(to_json(&policy)), None, None)
    }
}

fn cmd_calibrate(
    out: &Out,
    tune: Option<&Path>,
    scaler_path: Option<&Path>,
    save: Option<&Path>,
    apply: Option<&Path>,
    load: &LoadArgs,
) -> Result<(), CliError> {
    let scaler: TemperatureScaler = match (scaler_path, tune) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|source| CoreError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad scaler {}: {e}", path.display())))?
        }
        (None, Some(tune)) => fit_temperature(&load.load(tune)?)?,
        (None, None) => {
            return Err(CliError::Usage("supply --tune to fit or --scaler to load".into()))
        }
    };
    if let Some(path) = save {
        fs::write(path, to_json(&scaler)).map_err(|e| CliError::Write(path.to_path_buf(), e))?;
    }
    if let Some(data_path) = apply {
        let data = load.load(data_path)?;
        let rescaled = apply_temperature(&scaler, &data);
        let mut buffer = Vec::new();
        write_jsonl(&rescaled, &mut buffer)
            .map_err(|e| CliError::Write(data_path.to_path_buf(), e))?;
        return out.write(&String::from_utf8(buffer).expect("jsonl is utf-8"));
    }
    out.emit(
        format!(
            "temperature {} (nll {:.6}, {} iterations, {:?})",
            scaler.temperature, scaler.fit_nll, scaler.fit_iterations, scaler.status
        ),
        Some(to_json(&scaler)),
        None,
        None,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    out: &Out,
    model: &str,
    items: usize,
    seed: u64,
    classes: usize,
    concentration: f64,
    components: &[String],
    name: Option<String>,
) -> Result<(), CliError> {
    let mut data = match model {
        "m1" | "m2" | "m3" => {
            let mut spec = match model {
                "m1" => ImpulseSpec::m1(items, seed),
                "m2" => ImpulseSpec::m2(items, seed),
                _ => ImpulseSpec::m3(items, seed),
            };
            spec.num_classes = classes;
            generate_impulse(&spec)?
        }
        "calibrated" => generate_calibrated(items, classes, concentration, seed)?,
        "custom" => {
            if components.is_empty() {
                return Err(CliError::Usage(
                    "--model custom requires at least one --component W:C:A".into(),
                ));
            }
            let components = components
                .iter()
                .map(|text| parse_component(text))
                .collect::<Result<Vec<_>, _>>()?;
            generate_impulse(&ImpulseSpec {
                components,
                num_classes: classes,
                items,
                seed,
            })?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown model {other:?}; expected m1, m2, m3, calibrated, or custom"
            )))
        }
    };
    data.name = name.unwrap_or_else(|| model.to_string());
    let mut buffer = Vec::new();
    write_jsonl(&data, &mut buffer)
        .map_err(|e| CliError::Write(PathBuf::from("<output>"), e))?;
    out.write(&String::from_utf8(buffer).expect("jsonl is utf-8"))
}

fn parse_component(text: &str) -> Result<ImpulseComponent, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--component {text:?} is not WEIGHT:CONFIDENCE:ACCURACY"
        )));
    }
    let parse = |field: &str, value: &str| -> Result<f64, CliError> {
        value
            .parse()
            .map_err(|e| CliError::Usage(format!("bad {field} in --component {text:?}: {e}")))
    };
    Ok(ImpulseComponent {
        weight: parse("weight", parts[0])?,
        confidence: parse("confidence", parts[1])?,
        accuracy: parse("accuracy", parts[2])?,
    })
}
