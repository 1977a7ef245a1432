//! Dataset loading, train/test split and clustering-vs-lexicon agreement.
//!
//! Cluster-derived intents are the actual labels (rows); lexicon
//! predictions are the predicted labels (columns).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ClusterIntent, ManualIntent, QueryRecord};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reading dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: unknown label `{label}`")]
    BadLabel { line: usize, label: String },
    #[error("line {line}: empty query")]
    EmptyQuery { line: usize },
    #[error("{actual} actual labels vs {predicted} predicted")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("invalid confusion matrix: {0}")]
    InvalidMatrix(String),
}

/// Parses `query<TAB>label` lines. Blank lines are skipped; a missing or
/// empty label means unlabeled.
pub fn parse_dataset(text: &str) -> Result<Vec<QueryRecord>, EvalError> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let (query, label) = match raw.split_once('\t') {
            Some((q, l)) => (q, l.trim()),
            None => (raw, ""),
        };
        let manual_label = if label.is_empty() {
            None
        } else {
            Some(label.parse::<ManualIntent>().map_err(|_| EvalError::BadLabel { line, label: label.to_string() })?)
        };
        let record = QueryRecord::new(query.trim(), manual_label).map_err(|_| EvalError::EmptyQuery { line })?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_dataset(path: &Path) -> Result<Vec<QueryRecord>, EvalError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

/// Seeded shuffle, then the first ⌈n·test_fraction⌉ records form the test
/// set. `test_fraction` is clamped to [0, 1].
pub fn split_train_test<T: Clone>(records: &[T], test_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let fraction = if test_fraction.is_nan() { 0.0 } else { test_fraction.clamp(0.0, 1.0) };
    let n = records.len();
    // the epsilon keeps 30000 * 0.1 from rounding up to 3001
    let n_test = ((n as f64 * fraction - 1e-9).ceil().max(0.0) as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order[..n_test].iter().map(|&i| records[i].clone()).collect();
    let train = order[n_test..].iter().map(|&i| records[i].clone()).collect();
    (train, test)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<ClusterIntent>,
    /// `cells[i][j]`: actual `labels[i]`, predicted `labels[j]`.
    pub cells: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_cells(cells: [[u64; 3]; 3]) -> Self {
        ConfusionMatrix { labels: ClusterIntent::ALL.to_vec(), cells: cells.iter().map(|r| r.to_vec()).collect() }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let mut sorted: Vec<usize> = self.labels.iter().map(|l| l.index()).collect();
        sorted.sort_unstable();
        if sorted != [0, 1, 2] {
            return Err(EvalError::InvalidMatrix("labels must list each intent once".into()));
        }
        if self.cells.len() != 3 || self.cells.iter().any(|r| r.len() != 3) {
            return Err(EvalError::InvalidMatrix("cells must be 3x3".into()));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, EvalError> {
        let m: ConfusionMatrix =
            serde_json::from_str(json).map_err(|e| EvalError::InvalidMatrix(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    fn position(&self, intent: ClusterIntent) -> usize {
        self.labels.iter().position(|l| *l == intent).expect("validated labels")
    }
}

pub fn confusion(actual: &[ClusterIntent], predicted: &[ClusterIntent]) -> Result<ConfusionMatrix, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch { actual: actual.len(), predicted: predicted.len() });
    }
    let mut cells = [[0u64; 3]; 3];
    for (a, p) in actual.iter().zip(predicted) {
        cells[a.index()][p.index()] += 1;
    }
    Ok(ConfusionMatrix::from_cells(cells))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Number of records whose actual label is this intent.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    /// In [`ClusterIntent::ALL`] order.
    pub per_class: Vec<(ClusterIntent, IntentMetrics)>,
    /// Zero-division notes.
    pub warnings: Vec<String>,
}

impl ClassMetrics {
    pub fn get(&self, intent: ClusterIntent) -> &IntentMetrics {
        &self.per_class.iter().find(|(i, _)| *i == intent).expect("all intents present").1
    }
}

/// precision = diagonal / column sum, recall = diagonal / row sum; an empty
/// denominator yields 0 and a warning.
pub fn precision_recall(cm: &ConfusionMatrix) -> Result<ClassMetrics, EvalError> {
    cm.validate()?;
    let mut per_class = Vec::new();
    let mut warnings = Vec::new();
    for intent in ClusterIntent::ALL {
        let i = cm.position(intent);
        let diag = cm.cells[i][i] as f64;
        let row: u64 = cm.cells[i].iter().sum();
        let column: u64 = cm.cells.iter().map(|r| r[i]).sum();
        let precision = if column == 0 {
            warnings.push(format!("{intent}: nothing predicted, precision set to 0"));
            0.0
        } else {
            diag / column as f64
        };
        let recall = if row == 0 {
            warnings.push(format!("{intent}: no actual records, recall set to 0"));
            0.0
        } else {
            diag / row as f64
        };
        per_class.push((intent, IntentMetrics { precision, recall, support: row }));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ClassMetrics { per_class, warnings })
}

/// Fraction of records on the diagonal.
pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        return 0.0;
    }
    (0..cm.labels.len()).map(|i| cm.cells[i][i]).sum::<u64>() as f64 / total as f64
}

/// Recall pooled over all classes.
pub fn micro_recall(cm: &ConfusionMatrix) -> f64 {
    let (hits, support) = (0..cm.labels.len()).fold((0u64, 0u64), |(h, s), i| {
        (h + cm.cells[i][i], s + cm.cells[i].iter().sum::<u64>())
    });
    if support == 0 {
        0.0
    } else {
        hits as f64 / support as f64
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub matrix: ConfusionMatrix,
    pub per_class: BTreeMap<String, IntentMetrics>,
}

impl MetricsReport {
    /// Values rounded to 3 decimals.
    pub fn new(cm: &ConfusionMatrix, metrics: &ClassMetrics) -> Self {
        let per_class = metrics
            .per_class
            .iter()
            .map(|(intent, m)| {
                (
                    intent.as_str().to_string(),
                    IntentMetrics { precision: round3(m.precision), recall: round3(m.recall), support: m.support },
                )
            })
            .collect();
        MetricsReport { matrix: cm.clone(), per_class }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}

pub fn render_table(cm: &ConfusionMatrix, metrics: &ClassMetrics) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<16}", "actual\\predicted");
    for l in &cm.labels {
        let _ = write!(out, "{:>15}", l.as_str());
    }
    let _ = writeln!(out, "{:>11}{:>9}", "precision", "recall");
    for (i, l) in cm.labels.iter().enumerate() {
        let _ = write!(out, "{:<16}", l.as_str());
        for c in &cm.cells[i] {
            let _ = write!(out, "{c:>15}");
        }
        let m = metrics.get(*l);
        let _ = writeln!(out, "{:>11.3}{:>9.3}", m.precision, m.recall);
    }
    out
}

/// Manual-label counts per cluster: `cluster -> [informational, navigational,
/// transactional, unlabeled]`.
pub fn cluster_label_distribution(
    assignments: &[usize],
    labels: &[Option<ManualIntent>],
) -> BTreeMap<usize, [u64; 4]> {
    let mut out: BTreeMap<usize, [u64; 4]> = BTreeMap::new();
    for (&c, label) in assignments.iter().zip(labels) {
        let slot = match label {
            Some(ManualIntent::Informational) => 0,
            Some(ManualIntent::Navigational) => 1,
            Some(ManualIntent::Transactional) => 2,
            None => 3,
        };
        out.entry(c).or_default()[slot] += 1;
    }
    out
}
