#![allow(dead_code)]

pub mod mock_server;

use std::fs;
use std::path::{Path, PathBuf};

use serp_intent::features::{build_matrix, default_spec, FeatureMatrix};
use serp_intent::parser::{parse_html, SelectorConfig};
use serp_intent::pipeline::PipelineConfig;
use serp_intent::schema::{serialize_document, ResultBlockType, SerpDocument};

pub const FETCHED_AT: &str = "2024-01-01T00:00:00Z";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// One line of `fixtures/html/manifest.tsv`.
pub struct Case {
    pub file: String,
    pub query: String,
    /// `None` for the captcha page.
    pub related: Option<usize>,
    pub blocks: Vec<(ResultBlockType, usize)>,
    pub captcha: bool,
}

impl Case {
    pub fn stem(&self) -> &str {
        self.file.trim_end_matches(".html")
    }

    pub fn html(&self) -> String {
        fs::read_to_string(fixtures().join("html").join(&self.file)).unwrap()
    }

    pub fn golden_path(&self) -> PathBuf {
        fixtures().join("golden").join(format!("{}.json", self.stem()))
    }
}

pub fn manifest() -> Vec<Case> {
    let text = fs::read_to_string(fixtures().join("html/manifest.tsv")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split('\t').collect();
            let captcha = cols[3].trim() == "CAPTCHA";
            let blocks = if captcha {
                Vec::new()
            } else {
                cols[3]
                    .split_whitespace()
                    .map(|b| {
                        let (t, n) = b.split_once(':').unwrap();
                        (t.parse().unwrap(), n.parse().unwrap())
                    })
                    .collect()
            };
            Case {
                file: cols[0].to_string(),
                query: cols[1].to_string(),
                related: cols[2].parse().ok(),
                blocks,
                captcha,
            }
        })
        .collect()
}

pub fn parse_case(case: &Case) -> SerpDocument {
    parse_html(&case.html(), &case.query, &SelectorConfig::default(), FETCHED_AT)
        .unwrap_or_else(|e| panic!("{}: {e}", case.file))
        .0
}

/// Golden comparison; `UPDATE_GOLDEN=1` rewrites the file instead.
pub fn check_golden(path: &Path, actual: &str) -> Result<(), String> {
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(path, actual).unwrap();
        return Ok(());
    }
    let expected = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{} differs from output", path.display()))
    }
}

pub fn golden_json(case: &Case) -> Result<(), String> {
    check_golden(&case.golden_path(), &serialize_document(&parse_case(case)))
}

pub fn fixture_matrix() -> FeatureMatrix {
    let docs: Vec<SerpDocument> = manifest().iter().filter(|c| !c.captcha).map(parse_case).collect();
    build_matrix(&docs, &default_spec()).unwrap()
}

pub fn fixture_matrix_csv() -> String {
    let mut buf = Vec::new();
    fixture_matrix().write_csv(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

pub fn golden_features_path() -> PathBuf {
    fixtures().join("golden/features.csv")
}

pub const SERP_PAGE: &str = "<html><body><div class=\"organic-results\"><div class=\"g\"><h3>Result</h3></div></div></body></html>";

pub fn corpus_dir() -> PathBuf {
    fixtures().join("corpus")
}

/// The themed corpus config with generated files redirected under `out`.
pub fn corpus_config(out: &Path) -> PipelineConfig {
    let mut config = PipelineConfig::load(&corpus_dir().join("config.json")).unwrap();
    config.paths.parsed_dir = out.join("parsed");
    config.paths.output_dir = out.join("out");
    config
}

/// Relative path → bytes for every file under `dir`.
pub fn snapshot(dir: &Path) -> std::collections::BTreeMap<PathBuf, Vec<u8>> {
    let mut files = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    files
}
