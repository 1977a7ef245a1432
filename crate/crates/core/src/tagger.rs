//! Lexicon-based intent tagging.
//!
//! A query is tokenized exactly like the cluster word counts, keyword hits
//! are counted per intent and the largest count wins. Ties, including the
//! all-zero case, go to the intent with the higher priority, so a query
//! with no hits is `Informational`.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characterize::{tokenize, KeywordSet, WordList};
use crate::schema::{ClusterIntent, QueryRecord};

/// Highest priority first.
pub const PRIORITY: [ClusterIntent; 3] = [
    ClusterIntent::Informational,
    ClusterIntent::LocalPlace,
    ClusterIntent::SexualRacism,
];

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TagError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("keyword `{keyword}` is listed under both {first} and {second}")]
    OverlappingKeyword { keyword: String, first: ClusterIntent, second: ClusterIntent },
    #[error("lexicon JSON: {0}")]
    Json(String),
}

/// How keyword hits are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// A keyword repeated in the query counts every time.
    #[default]
    Multiplicity,
    /// Each distinct keyword counts once.
    Set,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntentLexicon {
    /// Indexed by [`ClusterIntent::index`].
    keywords: [BTreeSet<String>; 3],
}

impl IntentLexicon {
    pub fn new(entries: impl IntoIterator<Item = (ClusterIntent, BTreeSet<String>)>) -> Result<Self, TagError> {
        let mut lexicon = IntentLexicon::default();
        for (intent, words) in entries {
            lexicon.keywords[intent.index()].extend(words.into_iter().map(|w| w.to_lowercase()));
        }
        lexicon.check_disjoint()?;
        Ok(lexicon)
    }

    pub fn from_keyword_sets(sets: &[KeywordSet]) -> Result<Self, TagError> {
        IntentLexicon::new(sets.iter().map(|s| (s.intent, s.keywords.clone())))
    }

    fn check_disjoint(&self) -> Result<(), TagError> {
        for a in ClusterIntent::ALL {
            for b in ClusterIntent::ALL.into_iter().filter(|b| b.index() > a.index()) {
                if let Some(w) = self.keywords[a.index()].intersection(&self.keywords[b.index()]).next() {
                    return Err(TagError::OverlappingKeyword { keyword: w.clone(), first: a, second: b });
                }
            }
        }
        Ok(())
    }

    pub fn keywords(&self, intent: ClusterIntent) -> &BTreeSet<String> {
        &self.keywords[intent.index()]
    }

    /// Adds a keyword, refusing ones already owned by another intent.
    pub fn insert(&mut self, intent: ClusterIntent, keyword: &str) -> Result<(), TagError> {
        let keyword = keyword.to_lowercase();
        for other in ClusterIntent::ALL.into_iter().filter(|o| *o != intent) {
            if self.keywords[other.index()].contains(&keyword) {
                return Err(TagError::OverlappingKeyword { keyword, first: other, second: intent });
            }
        }
        self.keywords[intent.index()].insert(keyword);
        Ok(())
    }

    /// `{"informational": [...], "local_place": [...], "sexual_racism": [...]}`
    pub fn to_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for intent in ClusterIntent::ALL {
            let words: Vec<_> = self.keywords(intent).iter().cloned().collect();
            map.insert(intent.as_str().to_string(), words.into());
        }
        let mut out = serde_json::to_string_pretty(&map).expect("lexicon serializes");
        out.push('\n');
        out
    }

    /// Missing intents get an empty keyword set.
    pub fn from_json(json: &str) -> Result<Self, TagError> {
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(json).map_err(|e| TagError::Json(e.to_string()))?;
        let mut entries = Vec::new();
        for (key, value) in map {
            let intent: ClusterIntent = key.parse().map_err(|e: crate::schema::SchemaError| TagError::Json(e.to_string()))?;
            let words: BTreeSet<String> =
                serde_json::from_value(value).map_err(|e| TagError::Json(format!("{key}: {e}")))?;
            entries.push((intent, words));
        }
        IntentLexicon::new(entries)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaggedQuery {
    pub query: String,
    pub intent: ClusterIntent,
    /// Hits per intent, indexed by [`ClusterIntent::index`].
    pub counts: [usize; 3],
}

/// Picks the largest count; ties resolve to the highest-priority intent.
pub fn resolve(counts: [usize; 3]) -> ClusterIntent {
    let max = counts.iter().copied().max().unwrap_or(0);
    PRIORITY
        .into_iter()
        .find(|i| counts[i.index()] == max)
        .expect("one intent holds the maximum")
}

pub fn tag_query(
    query: &str,
    lexicon: &IntentLexicon,
    stopwords: &WordList,
    mode: CountMode,
) -> Result<TaggedQuery, TagError> {
    if query.trim().is_empty() {
        return Err(TagError::EmptyQuery);
    }
    let mut tokens = tokenize(query, stopwords);
    if mode == CountMode::Set {
        let mut seen = BTreeSet::new();
        tokens.retain(|t| seen.insert(t.clone()));
    }
    let mut counts = [0usize; 3];
    for token in &tokens {
        for intent in ClusterIntent::ALL {
            if lexicon.keywords(intent).contains(token) {
                counts[intent.index()] += 1;
            }
        }
    }
    Ok(TaggedQuery { query: query.to_string(), intent: resolve(counts), counts })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TagReport {
    /// Successful taggings in input order.
    pub tagged: Vec<TaggedQuery>,
    /// (input index, error) for records that could not be tagged.
    pub failures: Vec<(usize, TagError)>,
}

pub fn tag_batch(records: &[QueryRecord], lexicon: &IntentLexicon, stopwords: &WordList, mode: CountMode) -> TagReport {
    let mut report = TagReport::default();
    for (i, record) in records.iter().enumerate() {
        match tag_query(&record.query, lexicon, stopwords, mode) {
            Ok(t) => report.tagged.push(t),
            Err(e) => report.failures.push((i, e)),
        }
    }
    report
}

/// `query,predicted_intent,info_count,local_count,sexrac_count`
pub fn write_tags_csv<W: Write>(tagged: &[TaggedQuery], writer: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["query", "predicted_intent", "info_count", "local_count", "sexrac_count"])?;
    for t in tagged {
        out.write_record([
            t.query.clone(),
            t.intent.as_str().to_string(),
            t.counts[0].to_string(),
            t.counts[1].to_string(),
            t.counts[2].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
