//! HTML results page → [`SerpDocument`].
//!
//! Which markup corresponds to which result type lives entirely in a
//! [`SelectorConfig`]; nothing here knows about a particular engine's HTML.
//! The tree builder is html5ever (through `scraper`), so unclosed or
//! misnested tags are recovered the way a browser would.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ResultBlock, ResultBlockType, SerpDocument};

const DEFAULT_SELECTORS: &str = include_str!("../assets/selectors.json");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("captcha or challenge page detected")]
    CaptchaDetected,
    #[error("query is empty")]
    EmptyQuery,
}

#[derive(Debug, Error)]
pub enum SelectorConfigError {
    #[error("reading selector config: {0}")]
    Io(#[from] std::io::Error),
    #[error("selector config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("selector config has no entry for block type `{0}`")]
    MissingBlockType(ResultBlockType),
    #[error("selector config needs at least one non-empty captcha marker")]
    NoCaptchaMarkers,
    #[error("invalid CSS selector `{selector}`: {message}")]
    InvalidSelector { selector: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSelectors {
    /// Empty means the type is never searched for.
    pub container_selector: String,
    #[serde(default)]
    pub title_selector: Option<String>,
    #[serde(default)]
    pub snippet_selector: Option<String>,
    #[serde(default)]
    pub url_selector: Option<String>,
    #[serde(default)]
    pub item_selector: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub blocks: BTreeMap<ResultBlockType, BlockSelectors>,
    pub related_searches_selector: String,
    pub captcha_markers: Vec<String>,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig::from_json(DEFAULT_SELECTORS).expect("shipped selector config is valid")
    }
}

impl SelectorConfig {
    pub fn from_json(json: &str) -> Result<Self, SelectorConfigError> {
        let config: SelectorConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, SelectorConfigError> {
        SelectorConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SelectorConfigError> {
        for block_type in ResultBlockType::ALL {
            let entry = self
                .blocks
                .get(&block_type)
                .ok_or(SelectorConfigError::MissingBlockType(block_type))?;
            let selectors = [
                Some(&entry.container_selector),
                entry.title_selector.as_ref(),
                entry.snippet_selector.as_ref(),
                entry.url_selector.as_ref(),
                entry.item_selector.as_ref(),
            ];
            for selector in selectors.into_iter().flatten() {
                if !selector.trim().is_empty() {
                    compile(selector)?;
                }
            }
        }
        if !self.related_searches_selector.trim().is_empty() {
            compile(&self.related_searches_selector)?;
        }
        if self.captcha_markers.iter().all(|m| m.trim().is_empty()) {
            return Err(SelectorConfigError::NoCaptchaMarkers);
        }
        Ok(())
    }
}

fn compile(selector: &str) -> Result<Selector, SelectorConfigError> {
    Selector::parse(selector).map_err(|e| SelectorConfigError::InvalidSelector {
        selector: selector.to_string(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub blocks_found: BTreeMap<ResultBlockType, usize>,
    pub warnings: Vec<String>,
}

/// True iff any configured marker occurs in `html`, ignoring case.
pub fn detect_captcha(html: &str, config: &SelectorConfig) -> bool {
    if html.is_empty() {
        return false;
    }
    let haystack = html.to_lowercase();
    config
        .captcha_markers
        .iter()
        .map(|m| m.trim().to_lowercase())
        .filter(|m| !m.is_empty())
        .any(|m| haystack.contains(&m))
}

pub fn parse_html(
    html: &str,
    query: &str,
    config: &SelectorConfig,
    fetched_at: &str,
) -> Result<(SerpDocument, ParseReport), ParseError> {
    if query.trim().is_empty() {
        return Err(ParseError::EmptyQuery);
    }
    if detect_captcha(html, config) {
        return Err(ParseError::CaptchaDetected);
    }

    let document = Html::parse_document(html);
    let order: HashMap<_, usize> = document
        .tree
        .root()
        .descendants()
        .enumerate()
        .map(|(i, node)| (node.id(), i))
        .collect();

    let mut warnings = Vec::new();
    let mut blocks_found: BTreeMap<ResultBlockType, usize> =
        ResultBlockType::ALL.iter().map(|t| (*t, 0)).collect();
    // (document order, type) → block without position
    let mut found: Vec<(usize, ResultBlockType, ResultBlock)> = Vec::new();

    for block_type in ResultBlockType::ALL {
        let Some(entry) = config.blocks.get(&block_type) else {
            warnings.push(format!("no selector entry for block type `{block_type}`"));
            continue;
        };
        if entry.container_selector.trim().is_empty() {
            continue;
        }
        let container = match compile(&entry.container_selector) {
            Ok(s) => s,
            Err(e) => {
                warnings.push(format!("{block_type}: {e}"));
                continue;
            }
        };
        let sub = SubSelectors::compile(entry, block_type, &mut warnings);
        let mut matched = 0;
        for element in document.select(&container) {
            matched += 1;
            let mut block = ResultBlock::new(block_type, 1);
            block.title = sub.title.as_ref().and_then(|s| first_text(element, s));
            block.snippet = sub.snippet.as_ref().and_then(|s| first_text(element, s));
            block.url = sub.url.as_ref().and_then(|s| first_url(element, s));
            if let Some(items) = &sub.items {
                block.items = element
                    .select(items)
                    .map(element_text)
                    .filter(|t| !t.is_empty())
                    .collect();
            }
            found.push((order[&element.id()], block_type, block));
        }
        if matched == 0 {
            warnings.push(format!("no match for block type `{block_type}`"));
        }
        blocks_found.insert(block_type, matched);
    }

    found.sort_by_key(|(doc_order, block_type, _)| (*doc_order, *block_type));
    let blocks = found
        .into_iter()
        .enumerate()
        .map(|(i, (_, _, mut block))| {
            block.position = i as u32 + 1;
            block
        })
        .collect();

    let related_searches = if config.related_searches_selector.trim().is_empty() {
        Vec::new()
    } else {
        match compile(&config.related_searches_selector) {
            Ok(selector) => document
                .select(&selector)
                .map(element_text)
                .filter(|t| !t.is_empty())
                .collect(),
            Err(e) => {
                warnings.push(format!("related searches: {e}"));
                Vec::new()
            }
        }
    };

    let doc = SerpDocument {
        query: query.to_string(),
        fetched_at: fetched_at.to_string(),
        blocks,
        related_searches,
        parse_warnings: warnings.clone(),
    };
    Ok((doc, ParseReport { blocks_found, warnings }))
}

struct SubSelectors {
    title: Option<Selector>,
    snippet: Option<Selector>,
    url: Option<Selector>,
    items: Option<Selector>,
}

impl SubSelectors {
    fn compile(entry: &BlockSelectors, block_type: ResultBlockType, warnings: &mut Vec<String>) -> Self {
        let mut one = |s: &Option<String>| {
            let s = s.as_deref().filter(|s| !s.trim().is_empty())?;
            compile(s)
                .map_err(|e| warnings.push(format!("{block_type}: {e}")))
                .ok()
        };
        SubSelectors {
            title: one(&entry.title_selector),
            snippet: one(&entry.snippet_selector),
            url: one(&entry.url_selector),
            items: one(&entry.item_selector),
        }
    }
}

fn element_text(element: ElementRef<'_>) -> String {
    element
        .text()
        .flat_map(str::split_whitespace)
        .collect::<Vec<_>>()
        .join(" ")
}

fn first_text(scope: ElementRef<'_>, selector: &Selector) -> Option<String> {
    scope
        .select(selector)
        .map(element_text)
        .find(|t| !t.is_empty())
}

fn first_url(scope: ElementRef<'_>, selector: &Selector) -> Option<String> {
    let element = scope.select(selector).next()?;
    match element.value().attr("href") {
        Some(href) if !href.trim().is_empty() => Some(href.trim().to_string()),
        _ => Some(element_text(element)).filter(|t| !t.is_empty()),
    }
}
