//! Canonical data model for queries, labels and parsed result pages.
//!
//! Every other module exchanges [`SerpDocument`]s through the JSON form
//! produced by [`serialize_document`]. Field order in the structs below is
//! the key order on disk, so do not reorder fields.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("malformed JSON: {0}")]
    Json(#[source] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
}

/// The twenty result kinds a first results page can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultBlockType {
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
    PeopleAlsoAsked,
    SimilarEntity,
    Translator,
    TopButtonAds,
    NaturalResults,
    PartnersBlock,
    OtherCards,
}

impl ResultBlockType {
    pub const ALL: [ResultBlockType; 20] = [
        ResultBlockType::KnowledgeGraph,
        ResultBlockType::Calculator,
        ResultBlockType::DirectAnswer,
        ResultBlockType::Map,
        ResultBlockType::LocalResult,
        ResultBlockType::CommercialSponsored,
        ResultBlockType::Twitter,
        ResultBlockType::TopStories,
        ResultBlockType::Videos,
        ResultBlockType::Images,
        ResultBlockType::ContentNavigationBar,
        ResultBlockType::FeaturedSnippet,
        ResultBlockType::RichSnippets,
        ResultBlockType::PeopleAlsoAsked,
        ResultBlockType::SimilarEntity,
        ResultBlockType::Translator,
        ResultBlockType::TopButtonAds,
        ResultBlockType::NaturalResults,
        ResultBlockType::PartnersBlock,
        ResultBlockType::OtherCards,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ResultBlockType::KnowledgeGraph => "knowledge_graph",
            ResultBlockType::Calculator => "calculator",
            ResultBlockType::DirectAnswer => "direct_answer",
            ResultBlockType::Map => "map",
            ResultBlockType::LocalResult => "local_result",
            ResultBlockType::CommercialSponsored => "commercial_sponsored",
            ResultBlockType::Twitter => "twitter",
            ResultBlockType::TopStories => "top_stories",
            ResultBlockType::Videos => "videos",
            ResultBlockType::Images => "images",
            ResultBlockType::ContentNavigationBar => "content_navigation_bar",
            ResultBlockType::FeaturedSnippet => "featured_snippet",
            ResultBlockType::RichSnippets => "rich_snippets",
            ResultBlockType::PeopleAlsoAsked => "people_also_asked",
            ResultBlockType::SimilarEntity => "similar_entity",
            ResultBlockType::Translator => "translator",
            ResultBlockType::TopButtonAds => "top_button_ads",
            ResultBlockType::NaturalResults => "natural_results",
            ResultBlockType::PartnersBlock => "partners_block",
            ResultBlockType::OtherCards => "other_cards",
        }
    }
}

impl fmt::Display for ResultBlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResultBlockType {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ResultBlockType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| SchemaError::Schema(format!("unknown block type `{s}`")))
    }
}

/// One typed result on the page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBlock {
    pub block_type: ResultBlockType,
    /// 1-based rank on the page.
    pub position: u32,
    pub title: Option<String>,
    pub snippet: Option<String>,
    pub url: Option<String>,
    /// Sub-entries such as PAA questions or organic link titles.
    pub items: Vec<String>,
}

impl ResultBlock {
    pub fn new(block_type: ResultBlockType, position: u32) -> Self {
        ResultBlock {
            block_type,
            position,
            title: None,
            snippet: None,
            url: None,
            items: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerpDocument {
    pub query: String,
    /// RFC 3339 UTC timestamp.
    pub fetched_at: String,
    pub blocks: Vec<ResultBlock>,
    pub related_searches: Vec<String>,
    pub parse_warnings: Vec<String>,
}

impl SerpDocument {
    pub fn empty(query: impl Into<String>, fetched_at: impl Into<String>) -> Self {
        SerpDocument {
            query: query.into(),
            fetched_at: fetched_at.into(),
            blocks: Vec::new(),
            related_searches: Vec::new(),
            parse_warnings: Vec::new(),
        }
    }

    pub fn blocks_of(&self, block_type: ResultBlockType) -> impl Iterator<Item = &ResultBlock> {
        self.blocks.iter().filter(move |b| b.block_type == block_type)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.query.trim().is_empty() {
            return Err(SchemaError::Schema("query is empty".into()));
        }
        chrono::DateTime::parse_from_rfc3339(&self.fetched_at).map_err(|e| {
            SchemaError::Schema(format!("fetched_at `{}` is not RFC 3339: {e}", self.fetched_at))
        })?;
        let mut previous = 0;
        for (i, block) in self.blocks.iter().enumerate() {
            if block.position < 1 {
                return Err(SchemaError::Schema(format!("block {i} has position 0")));
            }
            if block.position < previous {
                return Err(SchemaError::Schema(format!(
                    "block {i} position {} precedes {previous}",
                    block.position
                )));
            }
            previous = block.position;
        }
        Ok(())
    }
}

/// Emits the canonical JSON form (pretty printed, struct key order).
pub fn serialize_document(doc: &SerpDocument) -> String {
    let mut out = serde_json::to_string_pretty(doc).expect("document serializes");
    out.push('\n');
    out
}

pub fn deserialize_document(json: &str) -> Result<SerpDocument, SchemaError> {
    let value: serde_json::Value = serde_json::from_str(json).map_err(SchemaError::Json)?;
    let doc: SerpDocument =
        serde_json::from_value(value).map_err(|e| SchemaError::Schema(e.to_string()))?;
    doc.validate()?;
    Ok(doc)
}

/// Conventional human-annotated intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManualIntent {
    Informational,
    Navigational,
    Transactional,
}

impl ManualIntent {
    pub const ALL: [ManualIntent; 3] = [
        ManualIntent::Informational,
        ManualIntent::Navigational,
        ManualIntent::Transactional,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ManualIntent::Informational => "informational",
            ManualIntent::Navigational => "navigational",
            ManualIntent::Transactional => "transactional",
        }
    }
}

impl FromStr for ManualIntent {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        ManualIntent::ALL
            .into_iter()
            .find(|m| m.as_str() == lower)
            .ok_or_else(|| SchemaError::Schema(format!("unknown manual intent `{s}`")))
    }
}

/// Intents discovered by clustering.
///
/// Ordering is by tagging priority: `Informational > LocalPlace > SexualRacism`.
/// [`ClusterIntent::ALL`] is the fixed label order used for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterIntent {
    Informational,
    LocalPlace,
    SexualRacism,
}

impl ClusterIntent {
    pub const ALL: [ClusterIntent; 3] = [
        ClusterIntent::Informational,
        ClusterIntent::LocalPlace,
        ClusterIntent::SexualRacism,
    ];

    /// Position in [`ClusterIntent::ALL`].
    pub fn index(self) -> usize {
        match self {
            ClusterIntent::Informational => 0,
            ClusterIntent::LocalPlace => 1,
            ClusterIntent::SexualRacism => 2,
        }
    }

    fn priority(self) -> u8 {
        match self {
            ClusterIntent::Informational => 2,
            ClusterIntent::LocalPlace => 1,
            ClusterIntent::SexualRacism => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClusterIntent::Informational => "informational",
            ClusterIntent::LocalPlace => "local_place",
            ClusterIntent::SexualRacism => "sexual_racism",
        }
    }
}

impl PartialOrd for ClusterIntent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ClusterIntent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority().cmp(&other.priority())
    }
}

impl fmt::Display for ClusterIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClusterIntent {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        ClusterIntent::ALL
            .into_iter()
            .find(|c| c.as_str() == lower)
            .ok_or_else(|| SchemaError::Schema(format!("unknown cluster intent `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query: String,
    pub manual_label: Option<ManualIntent>,
}

impl QueryRecord {
    pub fn new(query: impl Into<String>, manual_label: Option<ManualIntent>) -> Result<Self, SchemaError> {
        let query = query.into();
        if query.trim().is_empty() {
            return Err(SchemaError::Schema("query is empty".into()));
        }
        Ok(QueryRecord { query, manual_label })
    }
}
