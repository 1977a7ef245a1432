//! Cluster profiles, per-cluster word counts and keyword extraction.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureKind, FeatureMatrix};
use crate::schema::ClusterIntent;

const DEFAULT_STOPWORDS: &str = include_str!("../assets/stopwords.txt");

#[derive(Debug, Error)]
pub enum CharacterizeError {
    #[error("{assignments} assignments for {rows} rows")]
    LengthMismatch { rows: usize, assignments: usize },
    #[error("cluster {0} has no intent mapping")]
    UnnamedCluster(usize),
    #[error("cluster naming is not a bijection: {0}")]
    NonBijectiveMapping(String),
    #[error("no keywords survived for {0}")]
    NoKeywords(ClusterIntent),
    #[error("top_n and min_count must be >= 1")]
    InvalidParameter,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A set of lowercase words, one per line on disk; `#` starts a comment line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordList(HashSet<String>);

impl WordList {
    pub fn parse(text: &str) -> Self {
        WordList(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn default_stopwords() -> Self {
        WordList::parse(DEFAULT_STOPWORDS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for WordList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        WordList(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Lowercases, splits on every non-alphanumeric character and drops
/// one-character tokens, pure numbers and stopwords. Order and duplicates
/// are kept.
pub fn tokenize(query: &str, stopwords: &WordList) -> Vec<String> {
    query
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .filter(|t| !t.chars().all(|c| c.is_ascii_digit()))
        .filter(|t| !stopwords.contains(t))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster_id: usize,
    pub size: usize,
    /// Fraction of member rows with the flag set, per binary feature.
    pub binary_pct: Vec<(String, f64)>,
    /// Mean raw value per numeric feature.
    pub numeric_mean: Vec<(String, f64)>,
}

impl ClusterProfile {
    pub fn binary(&self, name: &str) -> Option<f64> {
        self.binary_pct.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn numeric(&self, name: &str) -> Option<f64> {
        self.numeric_mean.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Statistics over raw (unstandardized) values, one profile per non-empty
/// cluster in ascending id order.
pub fn profile_clusters(m: &FeatureMatrix, assignments: &[usize]) -> Result<Vec<ClusterProfile>, CharacterizeError> {
    if assignments.len() != m.len() {
        return Err(CharacterizeError::LengthMismatch { rows: m.len(), assignments: assignments.len() });
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (row, &c) in assignments.iter().enumerate() {
        members.entry(c).or_default().push(row);
    }
    Ok(members
        .into_iter()
        .map(|(cluster_id, rows)| {
            let size = rows.len();
            let mean = |j: usize| rows.iter().map(|&r| m.rows[r].values[j]).sum::<f64>() / size as f64;
            let mut binary_pct = Vec::new();
            let mut numeric_mean = Vec::new();
            for (j, feature) in m.spec.iter().enumerate() {
                match feature.kind {
                    FeatureKind::Binary => binary_pct.push((feature.name.clone(), mean(j))),
                    FeatureKind::Numeric => numeric_mean.push((feature.name.clone(), mean(j))),
                }
            }
            ClusterProfile { cluster_id, size, binary_pct, numeric_mean }
        })
        .collect())
}

/// One CSV row per cluster × feature: `cluster,size,feature,kind,value`.
pub fn write_profiles_csv<W: Write>(profiles: &[ClusterProfile], writer: W) -> Result<(), CharacterizeError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["cluster", "size", "feature", "kind", "value"])?;
    for p in profiles {
        let rows = p
            .binary_pct
            .iter()
            .map(|(n, v)| (n, "binary", v))
            .chain(p.numeric_mean.iter().map(|(n, v)| (n, "numeric", v)));
        for (name, kind, value) in rows {
            out.write_record([p.cluster_id.to_string(), p.size.to_string(), name.clone(), kind.into(), format!("{value:.6}")])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordFrequency {
    pub cluster_id: usize,
    pub counts: BTreeMap<String, usize>,
}

impl WordFrequency {
    /// Tokens by descending count, ties alphabetical.
    pub fn ranked(&self) -> Vec<(&str, usize)> {
        let mut ranked: Vec<_> = self.counts.iter().map(|(t, c)| (t.as_str(), *c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked
    }
}

pub fn group_by_cluster<'a>(queries: &[&'a str], assignments: &[usize]) -> BTreeMap<usize, Vec<&'a str>> {
    let mut groups: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (q, &c) in queries.iter().zip(assignments) {
        groups.entry(c).or_default().push(q);
    }
    groups
}

pub fn word_frequencies<S: AsRef<str>>(clusters: &BTreeMap<usize, Vec<S>>, stopwords: &WordList) -> Vec<WordFrequency> {
    clusters
        .iter()
        .map(|(&cluster_id, queries)| {
            let mut counts = BTreeMap::new();
            for q in queries {
                for token in tokenize(q.as_ref(), stopwords) {
                    *counts.entry(token).or_insert(0) += 1;
                }
            }
            WordFrequency { cluster_id, counts }
        })
        .collect()
}

/// `cluster,token,count`, each cluster ranked by count.
pub fn write_word_frequencies_csv<W: Write>(freqs: &[WordFrequency], writer: W) -> Result<(), CharacterizeError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["cluster", "token", "count"])?;
    for f in freqs {
        for (token, count) in f.ranked() {
            out.write_record([f.cluster_id.to_string(), token.to_string(), count.to_string()])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    pub intent: ClusterIntent,
    pub keywords: BTreeSet<String>,
    /// Specificity of each chosen keyword for this intent's cluster.
    pub provenance: BTreeMap<String, f64>,
}

/// Picks up to `top_n` distinctive tokens per cluster.
///
/// specificity(t, c) = count(t, c) / Σ_c' count(t, c'). Each token belongs
/// to exactly one cluster: the one with the highest count among clusters
/// where it reaches `min_count` (lowest cluster id on ties), so the sets are
/// disjoint. Within a cluster, candidates rank by (specificity, count,
/// token) descending.
pub fn extract_keywords(
    freqs: &[WordFrequency],
    exclusions: &WordList,
    top_n: usize,
    min_count: usize,
    names: &BTreeMap<usize, ClusterIntent>,
) -> Result<Vec<KeywordSet>, CharacterizeError> {
    if top_n == 0 || min_count == 0 {
        return Err(CharacterizeError::InvalidParameter);
    }
    for f in freqs {
        if !names.contains_key(&f.cluster_id) {
            return Err(CharacterizeError::UnnamedCluster(f.cluster_id));
        }
    }

    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for f in freqs {
        for (t, c) in &f.counts {
            *totals.entry(t.as_str()).or_insert(0) += c;
        }
    }

    // token -> (owning freq index, count)
    let mut owner: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut order: Vec<usize> = (0..freqs.len()).collect();
    order.sort_by_key(|&i| freqs[i].cluster_id);
    for &i in &order {
        for (t, &c) in &freqs[i].counts {
            if c < min_count || exclusions.contains(t) {
                continue;
            }
            match owner.get(t.as_str()) {
                Some(&(_, best)) if best >= c => {}
                _ => {
                    owner.insert(t.as_str(), (i, c));
                }
            }
        }
    }

    let mut sets = Vec::new();
    for &i in &order {
        let f = &freqs[i];
        let intent = names[&f.cluster_id];
        let mut candidates: Vec<(&str, f64, usize)> = owner
            .iter()
            .filter(|(_, (o, _))| *o == i)
            .map(|(t, (_, c))| (*t, *c as f64 / totals[t] as f64, *c))
            .collect();
        candidates.sort_by(|a, b| {
            b.1.total_cmp(&a.1).then(b.2.cmp(&a.2)).then(b.0.cmp(a.0))
        });
        candidates.truncate(top_n);
        if candidates.is_empty() {
            return Err(CharacterizeError::NoKeywords(intent));
        }
        sets.push(KeywordSet {
            intent,
            keywords: candidates.iter().map(|(t, _, _)| t.to_string()).collect(),
            provenance: candidates.iter().map(|(t, s, _)| (t.to_string(), *s)).collect(),
        });
    }
    sets.sort_by_key(|s| s.intent.index());
    Ok(sets)
}

/// Checks that the human-provided naming is a bijection between the
/// profiled clusters and distinct intents.
pub fn name_clusters(
    profiles: &[ClusterProfile],
    mapping: &BTreeMap<usize, ClusterIntent>,
) -> Result<BTreeMap<usize, ClusterIntent>, CharacterizeError> {
    let ids: BTreeSet<usize> = profiles.iter().map(|p| p.cluster_id).collect();
    for id in &ids {
        if !mapping.contains_key(id) {
            return Err(CharacterizeError::UnnamedCluster(*id));
        }
    }
    if let Some(extra) = mapping.keys().find(|k| !ids.contains(k)) {
        return Err(CharacterizeError::NonBijectiveMapping(format!("cluster {extra} does not exist")));
    }
    let mut seen = BTreeMap::new();
    for (id, intent) in mapping {
        if let Some(other) = seen.insert(*intent, *id) {
            return Err(CharacterizeError::NonBijectiveMapping(format!(
                "clusters {other} and {id} are both {intent}"
            )));
        }
    }
    Ok(mapping.clone())
}
