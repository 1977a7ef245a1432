//! Querying a SERP endpoint through rotating proxies.
//!
//! Captcha pages put the serving proxy into cooldown and the query is retried
//! on the next proxy. Request spacing per proxy is enforced against an
//! injected [`Clock`], so tests run on virtual time.

mod clock;
mod pool;
mod transport;

pub use clock::{rfc3339, Clock, SystemClock, VirtualClock};
pub use pool::ProxyPool;
pub use transport::{HttpResponse, HttpTransport, Transport};

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::parser::{detect_captcha, SelectorConfig};

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("invalid fetch config: {0}")]
    InvalidConfig(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchConfig {
    pub endpoint_url: String,
    pub min_delay_ms: u64,
    pub max_retries: u32,
    pub captcha_cooldown_s: u64,
    pub user_agents: Vec<String>,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub timeout_s: u64,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            endpoint_url: "http://127.0.0.1:8080/search".to_string(),
            min_delay_ms: 1_000,
            max_retries: 3,
            captcha_cooldown_s: 60,
            user_agents: vec![
                "Mozilla/5.0 (X11; Linux x86_64; rv:120.0) Gecko/20100101 Firefox/120.0".to_string(),
                "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/120.0 Safari/537.36".to_string(),
            ],
            output_dir: PathBuf::from("raw"),
            workers: 1,
            timeout_s: 30,
        }
    }
}

impl FetchConfig {
    pub fn validate(&self) -> Result<(), FetchError> {
        if self.user_agents.is_empty() {
            return Err(FetchError::InvalidConfig("user_agents must not be empty".into()));
        }
        if self.workers == 0 {
            return Err(FetchError::InvalidConfig("workers must be at least 1".into()));
        }
        url::Url::parse(&self.endpoint_url)
            .map_err(|e| FetchError::InvalidConfig(format!("endpoint_url: {e}")))?;
        Ok(())
    }

    /// Endpoint URL with `q=<query>` appended.
    pub fn request_url(&self, query: &str) -> Result<String, FetchError> {
        let mut url = url::Url::parse(&self.endpoint_url)
            .map_err(|e| FetchError::InvalidConfig(format!("endpoint_url: {e}")))?;
        url.query_pairs_mut().append_pair("q", query);
        Ok(url.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FetchStatus {
    Ok,
    Captcha,
    NetworkError,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttemptOutcome {
    Ok,
    Captcha,
    HttpStatus(u16),
    Transport(String),
}

/// One request as actually issued.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempt {
    pub proxy: Option<String>,
    pub user_agent: String,
    pub started_ms: u64,
    pub outcome: AttemptOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchResult {
    pub query: String,
    pub status: FetchStatus,
    pub body: Option<String>,
    pub proxy_used: Option<String>,
    pub attempts: u32,
    pub fetched_at: String,
    pub log: Vec<Attempt>,
}

/// On-disk form of a successful fetch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPage {
    pub query: String,
    pub fetched_at: String,
    pub body: String,
}

pub struct Fetcher {
    config: FetchConfig,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    selectors: SelectorConfig,
    agent_cursor: AtomicUsize,
}

impl Fetcher {
    pub fn new(
        config: FetchConfig,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
        selectors: SelectorConfig,
    ) -> Result<Self, FetchError> {
        config.validate()?;
        Ok(Fetcher { config, transport, clock, selectors, agent_cursor: AtomicUsize::new(0) })
    }

    pub fn config(&self) -> &FetchConfig {
        &self.config
    }

    fn next_user_agent(&self) -> String {
        let i = self.agent_cursor.fetch_add(1, Ordering::Relaxed);
        self.config.user_agents[i % self.config.user_agents.len()].clone()
    }

    /// Picks a proxy and books a request slot. Waits out cooldowns when every
    /// proxy is cooling and out the spacing delay when the slot is later.
    fn lease(&self, pool: &Mutex<ProxyPool>) -> (Option<String>, u64) {
        loop {
            let now = self.clock.now_ms();
            let mut guard = pool.lock().unwrap();
            if guard.is_empty() {
                let start = guard.reserve_slot(None, now, self.config.min_delay_ms);
                drop(guard);
                self.wait_until(start);
                return (None, start);
            }
            match guard.next_proxy(now) {
                Some(proxy) => {
                    let start = guard.reserve_slot(Some(&proxy), now, self.config.min_delay_ms);
                    drop(guard);
                    self.wait_until(start);
                    return (Some(proxy), start);
                }
                None => {
                    let until = guard.earliest_available().unwrap_or(now);
                    drop(guard);
                    log::info!("all proxies cooling; waiting {} ms", until.saturating_sub(now));
                    self.clock.sleep_ms(until.saturating_sub(now).max(1));
                }
            }
        }
    }

    fn wait_until(&self, start: u64) {
        let now = self.clock.now_ms();
        if start > now {
            self.clock.sleep_ms(start - now);
        }
    }

    pub fn fetch_query(&self, query: &str, pool: &Mutex<ProxyPool>) -> Result<FetchResult, FetchError> {
        if query.trim().is_empty() {
            return Err(FetchError::EmptyQuery);
        }
        if pool.lock().unwrap().is_empty() {
            log::warn!("proxy pool is empty; using a direct connection");
        }
        let url = self.config.request_url(query)?;
        let mut log_entries = Vec::new();
        let mut status = FetchStatus::NetworkError;
        let mut body = None;
        let mut proxy_used = None;

        for _ in 0..=self.config.max_retries {
            let (proxy, started_ms) = self.lease(pool);
            let user_agent = self.next_user_agent();
            let outcome = match self.transport.get(&url, proxy.as_deref(), &user_agent) {
                Err(e) => AttemptOutcome::Transport(e),
                Ok(resp) if resp.status == 429 || detect_captcha(&resp.body, &self.selectors) => {
                    AttemptOutcome::Captcha
                }
                Ok(resp) if !(200..300).contains(&resp.status) => AttemptOutcome::HttpStatus(resp.status),
                Ok(resp) => {
                    body = Some(resp.body);
                    AttemptOutcome::Ok
                }
            };
            proxy_used = proxy.clone();
            log_entries.push(Attempt { proxy: proxy.clone(), user_agent, started_ms, outcome: outcome.clone() });
            match outcome {
                AttemptOutcome::Ok => {
                    status = FetchStatus::Ok;
                    break;
                }
                AttemptOutcome::Captcha => {
                    status = FetchStatus::Captcha;
                    if let Some(p) = &proxy {
                        let until = self.clock.now_ms() + self.config.captcha_cooldown_s * 1_000;
                        pool.lock().unwrap().mark_cooling(p, until);
                    }
                    log::warn!("captcha for {query:?} via {}", proxy.as_deref().unwrap_or("direct"));
                }
                AttemptOutcome::HttpStatus(code) => {
                    status = FetchStatus::NetworkError;
                    log::warn!("HTTP {code} for {query:?}");
                }
                AttemptOutcome::Transport(ref e) => {
                    status = FetchStatus::NetworkError;
                    log::warn!("transport error for {query:?}: {e}");
                }
            }
        }

        Ok(FetchResult {
            query: query.to_string(),
            status,
            body,
            proxy_used,
            attempts: log_entries.len() as u32,
            fetched_at: rfc3339(self.clock.now_ms()),
            log: log_entries,
        })
    }

    /// Fetches every query on `config.workers` threads pulling from a shared
    /// queue. Results come back in input order.
    pub fn fetch_all(&self, queries: &[String], pool: &Mutex<ProxyPool>) -> Vec<Result<FetchResult, FetchError>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<FetchResult, FetchError>>>> =
            queries.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..self.config.workers.min(queries.len().max(1)) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= queries.len() {
                        break;
                    }
                    let result = self.fetch_query(&queries[i], pool);
                    *slots[i].lock().unwrap() = Some(result);
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().unwrap().expect("every slot filled")).collect()
    }
}

/// `<first 16 hex chars of sha256(query)>.json`.
pub fn raw_file_name(query: &str) -> String {
    let digest = Sha256::digest(query.as_bytes());
    format!("{}.json", &hex::encode(digest)[..16])
}

pub fn persist_raw(result: &FetchResult, output_dir: &Path) -> Result<PathBuf, FetchError> {
    let body = match (result.status, &result.body) {
        (FetchStatus::Ok, Some(body)) => body.clone(),
        (status, _) => {
            return Err(FetchError::Precondition(format!(
                "cannot persist {:?} with status {status:?}",
                result.query
            )))
        }
    };
    let page = RawPage { query: result.query.clone(), fetched_at: result.fetched_at.clone(), body };
    fs::create_dir_all(output_dir)?;
    let path = output_dir.join(raw_file_name(&result.query));
    let mut text = serde_json::to_string_pretty(&page)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

pub fn load_raw(path: &Path) -> Result<RawPage, FetchError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
