//! Config-driven steps behind the CLI subcommands.
//!
//! Every step reads its inputs from and writes its outputs to the directories
//! named in [`Paths`]; `run_pipeline` chains the offline steps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characterize::{
    extract_keywords, group_by_cluster, name_clusters, profile_clusters, word_frequencies, write_profiles_csv,
    write_word_frequencies_csv, CharacterizeError, ClusterProfile, KeywordSet, WordList,
};
use crate::clustering::{elbow_select, kmeans_fit, standardize, ClusterError, ElbowResult, KMeansConfig, KMeansModel, ModelFile};
use crate::evaluate::{
    confusion, load_dataset, precision_recall, render_table, split_train_test, ConfusionMatrix, EvalError,
    MetricsReport,
};
use crate::features::{
    build_matrix, correlation_matrix, default_spec, load_spec_json, prune_correlated, FeatureError, FeatureMatrix,
    FeatureSpec,
};
use crate::fetcher::{
    load_raw, persist_raw, raw_file_name, FetchConfig, FetchError, FetchStatus, Fetcher, HttpTransport, ProxyPool,
    SystemClock,
};
use crate::parser::{parse_html, ParseError, SelectorConfig, SelectorConfigError};
use crate::schema::{deserialize_document, serialize_document, ClusterIntent, SchemaError, SerpDocument};
use crate::tagger::{tag_query, write_tags_csv, CountMode, IntentLexicon, TagError, TaggedQuery};

pub const FEATURES_CSV: &str = "features.csv";
pub const PRUNED_CSV: &str = "features_pruned.csv";
pub const CORRELATION_CSV: &str = "correlation.csv";
pub const PRUNE_JSON: &str = "pruned.json";
pub const PARSE_REPORT_JSON: &str = "parse_report.json";
pub const MODEL_JSON: &str = "model.json";
pub const ASSIGNMENTS_CSV: &str = "assignments.csv";
pub const TEST_ASSIGNMENTS_CSV: &str = "test_assignments.csv";
pub const ELBOW_JSON: &str = "elbow.json";
pub const PROFILES_CSV: &str = "profiles.csv";
pub const WORD_FREQ_CSV: &str = "word_frequencies.csv";
pub const KEYWORDS_JSON: &str = "keywords.json";
pub const LEXICON_JSON: &str = "lexicon.json";
pub const TAGS_CSV: &str = "tags.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_TXT: &str = "metrics.txt";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Selectors(#[from] SelectorConfigError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Characterize(#[from] CharacterizeError),
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error("{0}")]
    Domain(String),
}

type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: PathBuf,
    pub raw_dir: PathBuf,
    pub parsed_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            dataset: "dataset.tsv".into(),
            raw_dir: "raw".into(),
            parsed_dir: "parsed".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElbowRange {
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for ElbowRange {
    fn default() -> Self {
        ElbowRange { k_min: 1, k_max: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeywordOptions {
    pub top_n: usize,
    pub min_count: usize,
}

impl Default for KeywordOptions {
    fn default() -> Self {
        KeywordOptions { top_n: 50, min_count: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggerOptions {
    pub count_mode: CountMode,
}

/// JSON pipeline configuration. Relative paths resolve against the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub selectors: Option<PathBuf>,
    pub feature_spec: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub exclusions: Option<PathBuf>,
    /// Human-assigned intent per cluster id.
    pub cluster_names: BTreeMap<usize, ClusterIntent>,
    pub kmeans: KMeansConfig,
    /// z-score features before clustering.
    pub standardize: bool,
    pub elbow: ElbowRange,
    pub correlation_threshold: f64,
    pub test_fraction: f64,
    pub keywords: KeywordOptions,
    pub tagger: TaggerOptions,
    pub fetch: FetchConfig,
    pub proxies: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            selectors: None,
            feature_spec: None,
            stopwords: None,
            exclusions: None,
            cluster_names: BTreeMap::new(),
            kmeans: KMeansConfig::default(),
            standardize: true,
            elbow: ElbowRange::default(),
            correlation_threshold: 0.9,
            test_fraction: 0.1,
            keywords: KeywordOptions::default(),
            tagger: TaggerOptions::default(),
            fetch: FetchConfig::default(),
            proxies: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(json: &str, base: &Path) -> Result<Self> {
        let mut config: PipelineConfig =
            serde_json::from_str(json).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.rebase(base);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    /// Makes every relative path absolute against `base`.
    pub fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.paths.dataset);
        join(&mut self.paths.raw_dir);
        join(&mut self.paths.parsed_dir);
        join(&mut self.paths.output_dir);
        for p in [&mut self.selectors, &mut self.feature_spec, &mut self.stopwords, &mut self.exclusions]
            .into_iter()
            .flatten()
        {
            join(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kmeans.validate()?;
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold <= 1.0) {
            return Err(PipelineError::Config(format!(
                "correlation_threshold {} outside (0, 1]",
                self.correlation_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(PipelineError::Config(format!("test_fraction {} outside [0, 1]", self.test_fraction)));
        }
        if self.keywords.top_n == 0 || self.keywords.min_count == 0 {
            return Err(PipelineError::Config("keywords.top_n and keywords.min_count must be >= 1".into()));
        }
        if self.elbow.k_min == 0 || self.elbow.k_min >= self.elbow.k_max {
            return Err(PipelineError::Config("elbow range needs 1 <= k_min < k_max".into()));
        }
        for p in [&self.selectors, &self.feature_spec, &self.stopwords, &self.exclusions].into_iter().flatten() {
            if !p.is_file() {
                return Err(PipelineError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn selector_config(&self) -> Result<SelectorConfig> {
        Ok(match &self.selectors {
            Some(p) => SelectorConfig::load(p)?,
            None => SelectorConfig::default(),
        })
    }

    pub fn spec(&self) -> Result<Vec<FeatureSpec>> {
        Ok(match &self.feature_spec {
            Some(p) => load_spec_json(&read_text(p)?)?,
            None => default_spec(),
        })
    }

    pub fn stopword_list(&self) -> Result<WordList> {
        Ok(match &self.stopwords {
            Some(p) => WordList::parse(&read_text(p)?),
            None => WordList::default_stopwords(),
        })
    }

    pub fn exclusion_list(&self) -> Result<WordList> {
        Ok(match &self.exclusions {
            Some(p) => WordList::parse(&read_text(p)?),
            None => WordList::default(),
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| PipelineError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn dataset_queries(config: &PipelineConfig) -> Result<Vec<String>> {
    Ok(load_dataset(&config.paths.dataset)?.into_iter().map(|r| r.query).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchSummary {
    pub ok: usize,
    pub captcha: Vec<String>,
    pub network_error: Vec<String>,
}

/// Fetches every dataset query and persists the successful pages in the raw
/// directory. `SERP_PROXIES`, when set, replaces the configured proxies.
pub fn run_fetch(config: &PipelineConfig, env_proxies: Option<&str>) -> Result<FetchSummary> {
    let queries = dataset_queries(config)?;
    let pool = match env_proxies {
        Some(list) => ProxyPool::from_list(list),
        None => ProxyPool::new(config.proxies.clone()),
    };
    let fetch = FetchConfig { output_dir: config.paths.raw_dir.clone(), ..config.fetch.clone() };
    let transport = Arc::new(HttpTransport::new(Duration::from_secs(fetch.timeout_s)));
    let fetcher = Fetcher::new(fetch, transport, Arc::new(SystemClock), config.selector_config()?)?;
    let pool = Mutex::new(pool);
    let mut summary = FetchSummary { ok: 0, captcha: Vec::new(), network_error: Vec::new() };
    for result in fetcher.fetch_all(&queries, &pool) {
        let result = result?;
        match result.status {
            FetchStatus::Ok => {
                persist_raw(&result, &config.paths.raw_dir)?;
                summary.ok += 1;
            }
            FetchStatus::Captcha => summary.captcha.push(result.query),
            FetchStatus::NetworkError => summary.network_error.push(result.query),
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseSummary {
    pub parsed: usize,
    pub missing: Vec<String>,
    pub captcha: Vec<String>,
    pub blocks_found: BTreeMap<String, usize>,
    pub warnings: BTreeMap<String, Vec<String>>,
}

/// Raw page → canonical document for every dataset query, in dataset order.
pub fn run_parse(config: &PipelineConfig) -> Result<ParseSummary> {
    let selectors = config.selector_config()?;
    let mut summary = ParseSummary {
        parsed: 0,
        missing: Vec::new(),
        captcha: Vec::new(),
        blocks_found: BTreeMap::new(),
        warnings: BTreeMap::new(),
    };
    for query in dataset_queries(config)? {
        let raw_path = config.paths.raw_dir.join(raw_file_name(&query));
        if !raw_path.is_file() {
            log::warn!("no raw page for {query:?}");
            summary.missing.push(query);
            continue;
        }
        let page = load_raw(&raw_path)?;
        match parse_html(&page.body, &query, &selectors, &page.fetched_at) {
            Ok((doc, report)) => {
                for (t, n) in report.blocks_found {
                    *summary.blocks_found.entry(t.as_str().to_string()).or_insert(0) += n;
                }
                if !report.warnings.is_empty() {
                    summary.warnings.insert(query.clone(), report.warnings);
                }
                write_bytes(
                    &config.paths.parsed_dir.join(raw_file_name(&query)),
                    serialize_document(&doc).as_bytes(),
                )?;
                summary.parsed += 1;
            }
            Err(ParseError::CaptchaDetected) => {
                log::warn!("raw page for {query:?} is a captcha page");
                summary.captcha.push(query);
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_json(&config.out(PARSE_REPORT_JSON), &summary)?;
    Ok(summary)
}

pub fn load_parsed(config: &PipelineConfig) -> Result<Vec<SerpDocument>> {
    let mut docs = Vec::new();
    for query in dataset_queries(config)? {
        let path = config.paths.parsed_dir.join(raw_file_name(&query));
        if path.is_file() {
            docs.push(deserialize_document(&read_text(&path)?)?);
        }
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSummary {
    pub threshold: f64,
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
}

/// Feature matrix over the parsed corpus plus its correlation-pruned copy.
pub fn run_extract(config: &PipelineConfig) -> Result<(FeatureMatrix, FeatureMatrix, PruneSummary)> {
    let docs = load_parsed(config)?;
    let matrix = build_matrix(&docs, &config.spec()?)?;
    let (pruned, dropped) = prune_correlated(&matrix, config.correlation_threshold)?;

    let mut buf = Vec::new();
    matrix.write_csv(&mut buf)?;
    write_bytes(&config.out(FEATURES_CSV), &buf)?;
    let mut buf = Vec::new();
    pruned.write_csv(&mut buf)?;
    write_bytes(&config.out(PRUNED_CSV), &buf)?;

    let corr = correlation_matrix(&matrix)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let names = matrix.names();
    w.write_record(std::iter::once("feature").chain(names.iter().copied()))?;
    for (name, row) in names.iter().zip(&corr) {
        let mut record = vec![name.to_string()];
        record.extend(row.iter().map(|r| format!("{r:.6}")));
        w.write_record(&record)?;
    }
    write_bytes(&config.out(CORRELATION_CSV), &w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)?;

    let summary = PruneSummary {
        threshold: config.correlation_threshold,
        kept: pruned.names().iter().map(|s| s.to_string()).collect(),
        dropped,
    };
    write_json(&config.out(PRUNE_JSON), &summary)?;
    Ok((matrix, pruned, summary))
}

pub fn read_matrix(path: &Path, known: &[FeatureSpec]) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix::read_csv(read_text(path)?.as_bytes(), known)?)
}

fn fit(rows: &[Vec<f64>], kmeans: &KMeansConfig, standardized: bool) -> Result<KMeansModel> {
    if standardized {
        let (z, params) = standardize(rows)?;
        Ok(kmeans_fit(&z, kmeans)?.with_standardization(params))
    } else {
        Ok(kmeans_fit(rows, kmeans)?)
    }
}

fn write_assignments(path: &Path, queries: &[&str], clusters: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["query", "cluster"])?;
    for (q, c) in queries.iter().zip(clusters) {
        w.write_record([q.to_string(), c.to_string()])?;
    }
    write_bytes(path, &w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)
}

pub fn read_assignments(path: &Path) -> Result<Vec<(String, usize)>> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let cluster = record
            .get(1)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| PipelineError::Domain(format!("{}: bad cluster in {record:?}", path.display())))?;
        out.push((record.get(0).unwrap_or_default().to_string(), cluster));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub model: KMeansModel,
    pub train_queries: Vec<String>,
    pub test_queries: Vec<String>,
    pub test_assignments: Vec<usize>,
}

/// Seeded train/test split of the pruned matrix, KMeans on the train rows,
/// nearest-centroid assignment for the test rows.
pub fn run_cluster(config: &PipelineConfig, pruned: &FeatureMatrix) -> Result<ClusterOutcome> {
    let indices: Vec<usize> = (0..pruned.len()).collect();
    let (train_idx, test_idx) = split_train_test(&indices, config.test_fraction, config.kmeans.seed);
    let values = pruned.values();
    let train_rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| values[i].clone()).collect();
    let model = fit(&train_rows, &config.kmeans, config.standardize)?;

    let queries = pruned.queries();
    let train_queries: Vec<&str> = train_idx.iter().map(|&i| queries[i]).collect();
    let test_queries: Vec<&str> = test_idx.iter().map(|&i| queries[i]).collect();
    let test_assignments: Vec<usize> = test_idx.iter().map(|&i| model.predict(&values[i])).collect();

    let names: Vec<String> = pruned.names().iter().map(|s| s.to_string()).collect();
    write_json(&config.out(MODEL_JSON), &ModelFile::new(&model, names))?;
    write_assignments(&config.out(ASSIGNMENTS_CSV), &train_queries, &model.assignments)?;
    write_assignments(&config.out(TEST_ASSIGNMENTS_CSV), &test_queries, &test_assignments)?;
    Ok(ClusterOutcome {
        train_queries: train_queries.iter().map(|s| s.to_string()).collect(),
        test_queries: test_queries.iter().map(|s| s.to_string()).collect(),
        model,
        test_assignments,
    })
}

/// Elbow over the configured k range.
pub fn run_elbow(config: &PipelineConfig, m: &FeatureMatrix) -> Result<ElbowResult> {
    let values = m.values();
    let data = if config.standardize { standardize(&values)?.0 } else { values };
    let result = elbow_select(&data, config.elbow.k_min, config.elbow.k_max, &config.kmeans)?;
    write_json(&config.out(ELBOW_JSON), &result)?;
    Ok(result)
}

/// Per-cluster profiles on the unpruned, unstandardized features of the
/// clustered (train) queries.
pub fn run_profile(config: &PipelineConfig, full: &FeatureMatrix, assignments: &[(String, usize)]) -> Result<Vec<ClusterProfile>> {
    let row_of: BTreeMap<&str, usize> = full.queries().into_iter().enumerate().map(|(i, q)| (q, i)).collect();
    let mut keep = Vec::new();
    let mut clusters = Vec::new();
    for (q, c) in assignments {
        let i = *row_of
            .get(q.as_str())
            .ok_or_else(|| PipelineError::Domain(format!("query {q:?} is not in the feature matrix")))?;
        keep.push(full.rows[i].clone());
        clusters.push(*c);
    }
    let subset = FeatureMatrix::new(full.spec.clone(), keep)?;
    let profiles = profile_clusters(&subset, &clusters)?;
    let mut buf = Vec::new();
    write_profiles_csv(&profiles, &mut buf)?;
    write_bytes(&config.out(PROFILES_CSV), &buf)?;
    Ok(profiles)
}

/// Word frequencies per cluster, keyword sets and the tagging lexicon.
pub fn run_keywords(
    config: &PipelineConfig,
    profiles: &[ClusterProfile],
    assignments: &[(String, usize)],
) -> Result<(Vec<KeywordSet>, IntentLexicon)> {
    let names = name_clusters(profiles, &config.cluster_names)?;
    let queries: Vec<&str> = assignments.iter().map(|(q, _)| q.as_str()).collect();
    let clusters: Vec<usize> = assignments.iter().map(|(_, c)| *c).collect();
    let grouped = group_by_cluster(&queries, &clusters);
    let stopwords = config.stopword_list()?;
    let freqs = word_frequencies(&grouped, &stopwords);
    let mut buf = Vec::new();
    write_word_frequencies_csv(&freqs, &mut buf)?;
    write_bytes(&config.out(WORD_FREQ_CSV), &buf)?;

    let sets = extract_keywords(
        &freqs,
        &config.exclusion_list()?,
        config.keywords.top_n,
        config.keywords.min_count,
        &names,
    )?;
    let lexicon = IntentLexicon::from_keyword_sets(&sets)?;
    write_json(&config.out(KEYWORDS_JSON), &sets)?;
    write_bytes(&config.out(LEXICON_JSON), lexicon.to_json().as_bytes())?;
    Ok((sets, lexicon))
}

pub fn run_tag(config: &PipelineConfig, lexicon: &IntentLexicon, queries: &[String]) -> Result<Vec<TaggedQuery>> {
    let stopwords = config.stopword_list()?;
    let tagged = queries
        .iter()
        .map(|q| tag_query(q, lexicon, &stopwords, config.tagger.count_mode))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut buf = Vec::new();
    write_tags_csv(&tagged, &mut buf)?;
    write_bytes(&config.out(TAGS_CSV), &buf)?;
    Ok(tagged)
}

/// Clustering (through the naming) is the actual label, the lexicon tag the
/// prediction.
pub fn run_eval(
    config: &PipelineConfig,
    test_assignments: &[(String, usize)],
    tagged: &[TaggedQuery],
) -> Result<(ConfusionMatrix, MetricsReport, String)> {
    if test_assignments.len() != tagged.len() {
        return Err(PipelineError::Domain(format!(
            "{} test assignments vs {} tagged queries",
            test_assignments.len(),
            tagged.len()
        )));
    }
    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    for ((q, c), t) in test_assignments.iter().zip(tagged) {
        if *q != t.query {
            return Err(PipelineError::Domain(format!("query order differs: {q:?} vs {:?}", t.query)));
        }
        let intent = config
            .cluster_names
            .get(c)
            .ok_or(CharacterizeError::UnnamedCluster(*c))?;
        actual.push(*intent);
        predicted.push(t.intent);
    }
    let cm = confusion(&actual, &predicted)?;
    let (report, table) = report_metrics(&cm)?;
    write_bytes(&config.out(METRICS_JSON), report.to_json().as_bytes())?;
    write_bytes(&config.out(METRICS_TXT), table.as_bytes())?;
    Ok((cm, report, table))
}

pub fn report_metrics(cm: &ConfusionMatrix) -> Result<(MetricsReport, String)> {
    let metrics = precision_recall(cm)?;
    for w in &metrics.warnings {
        log::warn!("{w}");
    }
    Ok((MetricsReport::new(cm, &metrics), render_table(cm, &metrics)))
}

/// Reads a `tags.csv` written by [`run_tag`].
pub fn read_tags(path: &Path) -> Result<Vec<TaggedQuery>> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let bad = || PipelineError::Domain(format!("{}: malformed row {record:?}", path.display()));
        let intent: ClusterIntent = record.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let mut counts = [0usize; 3];
        for (i, c) in counts.iter_mut().enumerate() {
            *c = record.get(2 + i).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        }
        out.push(TaggedQuery { query: record.get(0).unwrap_or_default().to_string(), intent, counts });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub parse: ParseSummary,
    pub pruned: PruneSummary,
    pub cluster: ClusterOutcome,
    pub profiles: Vec<ClusterProfile>,
    pub keywords: Vec<KeywordSet>,
    pub metrics: MetricsReport,
    pub table: String,
}

/// parse → extract → cluster → profile → keywords → tag → eval on already
/// fetched pages.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineSummary> {
    config.validate()?;
    let parse = run_parse(config)?;
    if parse.parsed == 0 {
        return Err(PipelineError::Domain("no pages could be parsed".into()));
    }
    let (full, pruned_matrix, pruned) = run_extract(config)?;
    let cluster = run_cluster(config, &pruned_matrix)?;
    let train: Vec<(String, usize)> =
        cluster.train_queries.iter().cloned().zip(cluster.model.assignments.iter().copied()).collect();
    let test: Vec<(String, usize)> =
        cluster.test_queries.iter().cloned().zip(cluster.test_assignments.iter().copied()).collect();
    let profiles = run_profile(config, &full, &train)?;
    let (keywords, lexicon) = run_keywords(config, &profiles, &train)?;
    let tagged = run_tag(config, &lexicon, &cluster.test_queries)?;
    let (_, metrics, table) = run_eval(config, &test, &tagged)?;
    Ok(PipelineSummary { parse, pruned, cluster, profiles, keywords, metrics, table })
}
