//! Prediction-log datasets: parsing, validation, and normalization.
//!
//! A log is one scored item per line, either JSONL
//! (`{"id": "...", "scores": [...], "label": 0}`, unknown fields ignored)
//! or CSV with header `id,label,s0,s1,...,s{K-1}`. Scores may be
//! probabilities or raw logits; logits go through a max-subtracted
//! normalized exponential before anything downstream sees them, so every
//! loaded record carries a probability vector plus the derived top
//! prediction and its confidence.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to at least this before any logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerated deviation of a probability row from summing to one.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Rows already within this of the simplex are kept bit-for-bit; rows
/// between this and [`SIMPLEX_TOLERANCE`] are renormalized.
const RENORMALIZE_BELOW: f64 = 1e-12;

/// Whether raw scores are probabilities or unnormalized logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Probabilities,
    Logits,
}

/// One scored item: probability vector, gold label, and the derived
/// top prediction.
///
/// `predicted_label` is the argmax of `scores` with ties broken toward
/// the lowest class index, and `confidence` is the score at that index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub scores: Vec<f64>,
    pub true_label: usize,
    pub predicted_label: usize,
    pub confidence: f64,
}

impl PredictionRecord {
    /// Build a record from raw scores, normalizing and validating them.
    ///
    /// Errors are plain messages; callers that read files attach the
    /// path and line number.
    pub fn new(
        id: impl Into<String>,
        raw_scores: &[f64],
        kind: ScoreKind,
        true_label: usize,
        num_classes: usize,
    ) -> std::result::Result<Self, String> {
        if raw_scores.len() != num_classes {
            return Err(format!(
                "expected {num_classes} scores, found {}",
                raw_scores.len()
            ));
        }
        if num_classes < 2 {
            return Err(format!("need at least 2 classes, got {num_classes}"));
        }
        if true_label >= num_classes {
            return Err(format!(
                "label {true_label} out of range for {num_classes} classes"
            ));
        }
        let scores = normalize_scores(raw_scores, kind)?;
        let (predicted_label, confidence) = derive_prediction(&scores);
        Ok(PredictionRecord {
            id: id.into(),
            scores,
            true_label,
            predicted_label,
            confidence,
        })
    }

    /// Whether the top prediction matches the gold label.
    pub fn is_correct(&self) -> bool {
        self.predicted_label == self.true_label
    }
}

/// An immutable, validated collection of prediction records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub name: String,
    pub kind: ScoreKind,
    pub num_classes: usize,
    pub records: Vec<PredictionRecord>,
}

impl LabeledDataset {
    /// Assemble a dataset, checking shared class count and id uniqueness.
    pub fn new(
        name: impl Into<String>,
        kind: ScoreKind,
        num_classes: usize,
        records: Vec<PredictionRecord>,
    ) -> Result<Self> {
        let name = name.into();
        if records.is_empty() {
            return Err(Error::Empty(name));
        }
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            if record.scores.len() != num_classes {
                return Err(Error::ClassMismatch {
                    expected: num_classes,
                    found: record.scores.len(),
                });
            }
            if !seen.insert(record.id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate record id {:?} in dataset {name:?}",
                    record.id
                )));
            }
        }
        Ok(LabeledDataset {
            name,
            kind,
            num_classes,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Fraction of records whose top prediction matches the gold label.
    pub fn accuracy(&self) -> f64 {
        let correct = self.records.iter().filter(|r| r.is_correct()).count();
        correct as f64 / self.records.len() as f64
    }
}

/// Argmax with ties broken toward the lowest class index; returns the
/// winning index and its score.
pub fn derive_prediction(scores: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    (best, scores[best])
}

/// Max-subtracted normalized exponential.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

fn normalize_scores(raw: &[f64], kind: ScoreKind) -> std::result::Result<Vec<f64>, String> {
    for (i, &s) in raw.iter().enumerate() {
        if !s.is_finite() {
            return Err(format!("score s{i} is not finite: {s}"));
        }
    }
    match kind {
        ScoreKind::Logits => Ok(softmax(raw)),
        ScoreKind::Probabilities => {
            for (i, &s) in raw.iter().enumerate() {
                if !(0.0..=1.0).contains(&s) {
                    return Err(format!("score s{i}={s} outside [0, 1]"));
                }
            }
            let sum: f64 = raw.iter().sum();
            let deviation = (sum - 1.0).abs();
            if deviation > SIMPLEX_TOLERANCE {
                return Err(format!(
                    "probabilities sum to {sum} (deviation {deviation:.3e} exceeds simplex tolerance {SIMPLEX_TOLERANCE:.0e})"
                ));
            }
            if deviation <= RENORMALIZE_BELOW {
                Ok(raw.to_vec())
            } else {
                Ok(raw.iter().map(|&s| s / sum).collect())
            }
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    scores: Vec<f64>,
    label: usize,
}

/// Load a prediction log, validating every line.
///
/// Format is inferred from the extension: `.csv` is parsed as CSV,
/// everything else as JSONL. When `num_classes` is omitted it is
/// inferred from the first record.
pub fn load_dataset(
    path: impl AsRef<Path>,
    kind: ScoreKind,
    num_classes: Option<usize>,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let records = if is_csv {
        read_csv(path, file, kind, num_classes)?
    } else {
        read_jsonl(path, file, kind, num_classes)?
    };
    let Some(first) = records.first() else {
        return Err(Error::Empty(path.display().to_string()));
    };
    let k = first.scores.len();
    LabeledDataset::new(name, kind, k, records)
}

fn read_jsonl(
    path: &Path,
    file: File,
    kind: ScoreKind,
    num_classes: Option<usize>,
) -> Result<Vec<PredictionRecord>> {
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut expected = num_classes;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("malformed record: {e}"),
        })?;
        let k = *expected.get_or_insert(raw.scores.len());
        let record =
            PredictionRecord::new(raw.id, &raw.scores, kind, raw.label, k).map_err(|message| {
                Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message,
                }
            })?;
        records.push(record);
    }
    Ok(records)
}

fn read_csv(
    path: &Path,
    file: File,
    kind: ScoreKind,
    num_classes: Option<usize>,
) -> Result<Vec<PredictionRecord>> {
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("unreadable header: {e}"),
    })?;
    let header_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message,
    };
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "label" {
        return Err(header_err(format!(
            "expected header id,label,s0,...  found {:?}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let k = headers.len() - 2;
    for i in 0..k {
        if &headers[i + 2] != format!("s{i}").as_str() {
            return Err(header_err(format!(
                "score column {} named {:?}, expected \"s{i}\"",
                i + 2,
                &headers[i + 2]
            )));
        }
    }
    if let Some(expected) = num_classes {
        if expected != k {
            return Err(Error::ClassMismatch {
                expected,
                found: k,
            });
        }
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: format!("malformed row: {e}"),
        })?;
        let line_no = row.position().map_or(0, |p| p.line());
        let row_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        if row.len() != k + 2 {
            return Err(row_err(format!(
                "expected {} fields, found {}",
                k + 2,
                row.len()
            )));
        }
        let id = row[0].to_string();
        let label: usize = row[1]
            .parse()
            .map_err(|e| row_err(format!("bad label {:?}: {e}", &row[1])))?;
        let mut raw = Vec::with_capacity(k);
        for i in 0..k {
            let s: f64 = row[i + 2]
                .parse()
                .map_err(|e| row_err(format!("bad score s{i}={:?}: {e}", &row[i + 2])))?;
            raw.push(s);
        }
        records.push(PredictionRecord::new(id, &raw, kind, label, k).map_err(row_err)?);
    }
    Ok(records)
}

/// Format a probability with 17 significant digits, enough to
/// reconstruct the exact same f64 on reload.
fn format_probability(p: f64) -> String {
    format!("{p:.16e}")
}

/// Write a dataset as JSONL. Probabilities are emitted with 17
/// significant digits so a reload reproduces them bit-for-bit.
pub fn write_jsonl<W: Write>(data: &LabeledDataset, mut out: W) -> std::io::Result<()> {
    for record in &data.records {
        let id = serde_json::to_string(&record.id).expect("string serialization");
        let scores: Vec<String> = record.scores.iter().map(|&p| format_probability(p)).collect();
        writeln!(
            out,
            "{{\"id\":{id},\"scores\":[{}],\"label\":{}}}",
            scores.join(","),
            record.true_label
        )?;
    }
    Ok(())
}

/// Save a dataset to a JSONL file (see [`write_jsonl`]).
pub fn save_dataset(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    write_jsonl(data, &mut writer).map_err(io_err)?;
    writer.flush().map_err(io_err)
}

/// Diagnostics from comparing a tune/test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDiagnostics {
    /// Number of ids present in both datasets.
    pub overlap: usize,
    /// Whether the two datasets disagree on the number of classes.
    pub class_mismatch: bool,
}

/// Report id overlap and class-count mismatch between two splits.
/// Purely diagnostic; the caller decides whether overlap is fatal.
pub fn split_check(tune: &LabeledDataset, test: &LabeledDataset) -> SplitDiagnostics {
    let tune_ids: HashSet<&str> = tune.records.iter().map(|r| r.id.as_str()).collect();
    let overlap = test
        .records
        .iter()
        .filter(|r| tune_ids.contains(r.id.as_str()))
        .count();
    SplitDiagnostics {
        overlap,
        class_mismatch: tune.num_classes != test.num_classes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn temp_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".jsonl").tempfile().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn jsonl_record_derives_prediction() {
        let f = temp_jsonl(&[r#"{"id":"a","scores":[0.6,0.4],"label":0}"#]);
        let ds = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap();
        assert_eq!(ds.num_classes, 2);
        assert_eq!(ds.records[0].predicted_label, 0);
        assert_eq!(ds.records[0].confidence, 0.6);
        assert!(ds.records[0].is_correct());
    }

    #[test]
    fn logit_tie_breaks_to_lowest_index() {
        let f = temp_jsonl(&[r#"{"id":"b","scores":[2.0,2.0],"label":1}"#]);
        let ds = load_dataset(f.path(), ScoreKind::Logits, None).unwrap();
        let r = &ds.records[0];
        assert_eq!(r.scores, vec![0.5, 0.5]);
        assert_eq!(r.predicted_label, 0);
        assert_eq!(r.confidence, 0.5);
        assert!(!r.is_correct());
    }

    #[test]
    fn simplex_violation_reports_line() {
        let f = temp_jsonl(&[
            r#"{"id":"a","scores":[0.6,0.4],"label":0}"#,
            r#"{"id":"c","scores":[0.6,0.3],"label":0}"#,
        ]);
        let err = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("simplex"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn near_simplex_rows_are_renormalized() {
        let f = temp_jsonl(&[r#"{"id":"a","scores":[0.6000001,0.4],"label":0}"#]);
        let ds = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap();
        let sum: f64 = ds.records[0].scores.iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_line_reports_number() {
        let f = temp_jsonl(&[
            r#"{"id":"a","scores":[0.6,0.4],"label":0}"#,
            r#"{"id":"broken"#,
        ]);
        let err = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_scores_rejected() {
        let f = temp_jsonl(&[
            r#"{"id":"a","scores":[0.6,0.4],"label":0}"#,
            r#"{"id":"b","scores":[0.2,0.3,0.5],"label":0}"#,
        ]);
        let err = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("expected 2 scores"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn label_out_of_range_rejected() {
        let f = temp_jsonl(&[r#"{"id":"a","scores":[0.6,0.4],"label":2}"#]);
        let err = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn empty_file_rejected() {
        let f = temp_jsonl(&[]);
        let err = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap_err();
        assert!(matches!(err, Error::Empty(_)), "{err:?}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = temp_jsonl(&[
            r#"{"id":"a","scores":[0.6,0.4],"label":0}"#,
            r#"{"id":"a","scores":[0.5,0.5],"label":1}"#,
        ]);
        let err = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)), "{err:?}");
    }

    #[test]
    fn unknown_fields_ignored() {
        let f = temp_jsonl(&[r#"{"id":"a","scores":[0.6,0.4],"label":0,"extra":"x"}"#]);
        assert!(load_dataset(f.path(), ScoreKind::Probabilities, None).is_ok());
    }

    #[test]
    fn csv_roundtrip_semantics() {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        writeln!(f, "id,label,s0,s1").unwrap();
        writeln!(f, "a,0,0.6,0.4").unwrap();
        writeln!(f, "b,1,0.1,0.9").unwrap();
        f.flush().unwrap();
        let ds = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records[1].predicted_label, 1);
        assert_eq!(ds.records[1].confidence, 0.9);
    }

    #[test]
    fn csv_bad_header_rejected() {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        writeln!(f, "id,label,score0,score1").unwrap();
        writeln!(f, "a,0,0.6,0.4").unwrap();
        f.flush().unwrap();
        let err = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_dataset("/nonexistent/x.jsonl", ScoreKind::Probabilities, None)
            .unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err:?}");
    }

    #[test]
    fn split_check_reports_overlap_and_mismatch() {
        let make = |ids: &[&str], k: usize| {
            let records = ids
                .iter()
                .map(|id| {
                    let mut scores = vec![0.1 / (k as f64 - 1.0); k];
                    scores[0] = 0.9;
                    let sum: f64 = scores.iter().sum();
                    let scores: Vec<f64> = scores.iter().map(|s| s / sum).collect();
                    PredictionRecord::new(*id, &scores, ScoreKind::Probabilities, 0, k).unwrap()
                })
                .collect();
            LabeledDataset::new("d", ScoreKind::Probabilities, k, records).unwrap()
        };
        let tune = make(&["a", "b"], 2);
        let test = make(&["c", "d"], 2);
        assert_eq!(
            split_check(&tune, &test),
            SplitDiagnostics { overlap: 0, class_mismatch: false }
        );
        assert_eq!(split_check(&tune, &tune).overlap, 2);
        let three = make(&["a", "b"], 3);
        assert!(split_check(&tune, &three).class_mismatch);
    }

    fn prob_vector(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(1e-6..1.0f64, k).prop_map(|raw| {
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|&x| x / sum).collect()
        })
    }

    proptest! {
        #[test]
        fn roundtrip_is_identity(vectors in proptest::collection::vec(prob_vector(4), 1..40)) {
            let records: Vec<PredictionRecord> = vectors
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    PredictionRecord::new(format!("r{i}"), v, ScoreKind::Probabilities, i % 4, 4)
                        .unwrap()
                })
                .collect();
            let ds = LabeledDataset::new("rt", ScoreKind::Probabilities, 4, records).unwrap();
            let mut buf = Vec::new();
            write_jsonl(&ds, &mut buf).unwrap();
            let f = tempfile::Builder::new().suffix(".jsonl").tempfile().unwrap();
            std::fs::write(f.path(), &buf).unwrap();
            let reloaded = load_dataset(f.path(), ScoreKind::Probabilities, None).unwrap();
            prop_assert_eq!(reloaded.len(), ds.len());
            for (a, b) in ds.records.iter().zip(reloaded.records.iter()) {
                prop_assert_eq!(&a.id, &b.id);
                prop_assert_eq!(a.true_label, b.true_label);
                prop_assert_eq!(a.predicted_label, b.predicted_label);
                for (x, y) in a.scores.iter().zip(b.scores.iter()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn logit_shift_invariance(
            logits in proptest::collection::vec(-10.0..10.0f64, 3),
            shift in -50.0..50.0f64,
        ) {
            let shifted: Vec<f64> = logits.iter().map(|&z| z + shift).collect();
            let a = PredictionRecord::new("a", &logits, ScoreKind::Logits, 0, 3).unwrap();
            let b = PredictionRecord::new("a", &shifted, ScoreKind::Logits, 0, 3).unwrap();
            prop_assert_eq!(a.predicted_label, b.predicted_label);
            for (x, y) in a.scores.iter().zip(b.scores.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn argmax_deterministic(scores in prob_vector(5)) {
            let (first, _) = derive_prediction(&scores);
            let (second, _) = derive_prediction(&scores);
            prop_assert_eq!(first, second);
            prop_assert!((0..5).all(|i| scores[i] <= scores[first]));
            for i in 0..first {
                prop_assert!(scores[i] < scores[first]);
            }
        }
    }
}
