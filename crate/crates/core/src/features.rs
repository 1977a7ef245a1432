//! Feature vectors over parsed result pages, plus correlation pruning.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ResultBlockType, SerpDocument};

/// Comparisons against the pruning threshold allow this much rounding slack.
const CORRELATION_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature `{name}`: {reason}")]
    SpecMismatch { name: String, reason: String },
    #[error("duplicate feature name `{0}`")]
    DuplicateName(String),
    #[error("no input rows")]
    EmptyInput,
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("row {row} has {got} values, expected {expected}")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Binary,
    Numeric,
}

/// One column of the feature matrix.
///
/// A binary feature with a `block_type` is a presence flag; a numeric one
/// counts the items of all blocks of that type. `source: "related_searches"`
/// counts the related-search suggestions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl FeatureSpec {
    pub fn presence(block_type: ResultBlockType) -> Self {
        FeatureSpec {
            name: block_type.as_str().to_string(),
            kind: FeatureKind::Binary,
            block_type: Some(block_type.as_str().to_string()),
            source: None,
        }
    }

    pub fn item_count(name: &str, block_type: ResultBlockType) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Numeric,
            block_type: Some(block_type.as_str().to_string()),
            source: None,
        }
    }

    pub fn related_searches_count() -> Self {
        FeatureSpec {
            name: "related_searches_count".to_string(),
            kind: FeatureKind::Numeric,
            block_type: None,
            source: Some("related_searches".to_string()),
        }
    }

    fn rule(&self) -> Result<Rule, FeatureError> {
        let mismatch = |reason: String| FeatureError::SpecMismatch { name: self.name.clone(), reason };
        match (&self.block_type, self.source.as_deref()) {
            (Some(t), None) => {
                let block_type: ResultBlockType =
                    t.parse().map_err(|_| mismatch(format!("unknown block type `{t}`")))?;
                Ok(match self.kind {
                    FeatureKind::Binary => Rule::Presence(block_type),
                    FeatureKind::Numeric => Rule::ItemCount(block_type),
                })
            }
            (None, Some("related_searches")) if self.kind == FeatureKind::Numeric => Ok(Rule::RelatedSearches),
            (None, Some(other)) => Err(mismatch(format!("unsupported source `{other}`"))),
            (Some(_), Some(_)) => Err(mismatch("both block_type and source given".into())),
            (None, None) => Err(mismatch("no block_type or source".into())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Rule {
    Presence(ResultBlockType),
    ItemCount(ResultBlockType),
    RelatedSearches,
}

/// The 19 default features: 16 presence flags followed by 3 counts.
pub fn default_spec() -> Vec<FeatureSpec> {
    use ResultBlockType::*;
    let binary = [
        KnowledgeGraph,
        Calculator,
        DirectAnswer,
        Map,
        LocalResult,
        CommercialSponsored,
        Twitter,
        TopStories,
        Videos,
        Images,
        ContentNavigationBar,
        FeaturedSnippet,
        RichSnippets,
        SimilarEntity,
        PartnersBlock,
        OtherCards,
    ];
    let mut spec: Vec<FeatureSpec> = binary.into_iter().map(FeatureSpec::presence).collect();
    spec.push(FeatureSpec::item_count("paa_count", PeopleAlsoAsked));
    spec.push(FeatureSpec::related_searches_count());
    spec.push(FeatureSpec::item_count("natural_results_count", NaturalResults));
    spec
}

pub fn validate_spec(spec: &[FeatureSpec]) -> Result<(), FeatureError> {
    let mut seen = HashSet::new();
    for feature in spec {
        if !seen.insert(feature.name.as_str()) {
            return Err(FeatureError::DuplicateName(feature.name.clone()));
        }
        feature.rule()?;
    }
    Ok(())
}

pub fn load_spec_json(json: &str) -> Result<Vec<FeatureSpec>, FeatureError> {
    let spec: Vec<FeatureSpec> = serde_json::from_str(json)?;
    validate_spec(&spec)?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVector {
    pub query: String,
    pub values: Vec<f64>,
}

pub fn extract_features(doc: &SerpDocument, spec: &[FeatureSpec]) -> Result<FeatureVector, FeatureError> {
    let values = spec
        .iter()
        .map(|feature| {
            Ok(match feature.rule()? {
                Rule::Presence(t) => f64::from(u8::from(doc.blocks_of(t).next().is_some())),
                Rule::ItemCount(t) => doc.blocks_of(t).map(|b| b.items.len()).sum::<usize>() as f64,
                Rule::RelatedSearches => doc.related_searches.len() as f64,
            })
        })
        .collect::<Result<_, FeatureError>>()?;
    Ok(FeatureVector { query: doc.query.clone(), values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub spec: Vec<FeatureSpec>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn new(spec: Vec<FeatureSpec>, rows: Vec<FeatureVector>) -> Result<Self, FeatureError> {
        for (i, row) in rows.iter().enumerate() {
            if row.values.len() != spec.len() {
                return Err(FeatureError::RowWidth { row: i, got: row.values.len(), expected: spec.len() });
            }
        }
        Ok(FeatureMatrix { spec, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.spec.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.spec.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn queries(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.query.as_str()).collect()
    }

    pub fn values(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[j]).collect()
    }

    /// Keeps only the columns at `keep` (in that order).
    pub fn select_columns(&self, keep: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            spec: keep.iter().map(|&j| self.spec[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureVector {
                    query: r.query.clone(),
                    values: keep.iter().map(|&j| r.values[j]).collect(),
                })
                .collect(),
        }
    }

    /// Header `query,<feature names>`, one row per query.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["query"];
        header.extend(self.names());
        out.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.query.clone()];
            record.extend(row.values.iter().map(|v| v.to_string()));
            out.write_record(&record)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Column names found in `known` reuse that spec entry; anything else
    /// becomes a numeric column without an extraction rule.
    pub fn read_csv<R: Read>(reader: R, known: &[FeatureSpec]) -> Result<Self, FeatureError> {
        let mut input = csv::Reader::from_reader(reader);
        let header = input.headers()?.clone();
        let spec: Vec<FeatureSpec> = header
            .iter()
            .skip(1)
            .map(|name| {
                known.iter().find(|f| f.name == name).cloned().unwrap_or(FeatureSpec {
                    name: name.to_string(),
                    kind: FeatureKind::Numeric,
                    block_type: None,
                    source: None,
                })
            })
            .collect();
        let mut rows = Vec::new();
        for record in input.records() {
            let record = record?;
            let query = record.get(0).unwrap_or_default().to_string();
            let values = record
                .iter()
                .skip(1)
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|e| FeatureError::SpecMismatch {
                        name: query.clone(),
                        reason: format!("value `{v}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(FeatureVector { query, values });
        }
        FeatureMatrix::new(spec, rows)
    }
}

pub fn build_matrix(docs: &[SerpDocument], spec: &[FeatureSpec]) -> Result<FeatureMatrix, FeatureError> {
    if docs.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    validate_spec(spec)?;
    let rows = docs
        .iter()
        .map(|doc| extract_features(doc, spec))
        .collect::<Result<_, _>>()?;
    FeatureMatrix::new(spec.to_vec(), rows)
}

/// Pearson correlation between every pair of columns.
///
/// For 0/1 columns this is the phi coefficient. A constant column
/// correlates 0 with every other column and 1 with itself.
pub fn correlation_matrix(m: &FeatureMatrix) -> Result<Vec<Vec<f64>>, FeatureError> {
    let n = m.len();
    if n < 2 {
        return Err(FeatureError::TooFewRows(n));
    }
    let d = m.width();
    let centered: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let col = m.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            col.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    let sq: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();

    let mut r = vec![vec![0.0; d]; d];
    for i in 0..d {
        r[i][i] = 1.0;
        for j in (i + 1)..d {
            let value = if sq[i] == 0.0 || sq[j] == 0.0 {
                0.0
            } else {
                let cov: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                (cov / (sq[i].sqrt() * sq[j].sqrt())).clamp(-1.0, 1.0)
            };
            r[i][j] = value;
            r[j][i] = value;
        }
    }
    Ok(r)
}

/// Drops the later feature of every pair with |r| ≥ `threshold`, scanning
/// pairs in spec order. Returns the reduced matrix and the dropped names.
pub fn prune_correlated(m: &FeatureMatrix, threshold: f64) -> Result<(FeatureMatrix, Vec<String>), FeatureError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(FeatureError::InvalidThreshold(threshold));
    }
    let r = correlation_matrix(m)?;
    let d = m.width();
    let mut dropped = vec![false; d];
    for i in 0..d {
        if dropped[i] {
            continue;
        }
        for j in (i + 1)..d {
            if !dropped[j] && r[i][j].abs() >= threshold - CORRELATION_EPS {
                dropped[j] = true;
            }
        }
    }
    let keep: Vec<usize> = (0..d).filter(|&j| !dropped[j]).collect();
    let names = (0..d).filter(|&j| dropped[j]).map(|j| m.spec[j].name.clone()).collect();
    Ok((m.select_columns(&keep), names))
}
