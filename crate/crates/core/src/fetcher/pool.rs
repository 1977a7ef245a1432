/// Round-robin proxy rotation with per-proxy cooldowns and request spacing.
///
/// All times are clock milliseconds.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProxyPool {
    proxies: Vec<String>,
    cursor: usize,
    cooldowns: Vec<u64>,
    last_request: Vec<Option<u64>>,
    direct_last_request: Option<u64>,
}

impl ProxyPool {
    pub fn new(proxies: Vec<String>) -> Self {
        let n = proxies.len();
        ProxyPool {
            proxies,
            cursor: 0,
            cooldowns: vec![0; n],
            last_request: vec![None; n],
            direct_last_request: None,
        }
    }

    /// Comma-separated proxy URLs, as in `SERP_PROXIES`.
    pub fn from_list(list: &str) -> Self {
        ProxyPool::new(
            list.split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn proxies(&self) -> &[String] {
        &self.proxies
    }

    pub fn is_empty(&self) -> bool {
        self.proxies.is_empty()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// First proxy at or after the cursor that is not cooling down. `None`
    /// for an empty pool or when every proxy is cooling.
    pub fn next_proxy(&mut self, now_ms: u64) -> Option<String> {
        let n = self.proxies.len();
        for step in 0..n {
            let i = (self.cursor + step) % n;
            if self.cooldowns[i] <= now_ms {
                self.cursor = (i + 1) % n;
                return Some(self.proxies[i].clone());
            }
        }
        None
    }

    /// Cooldowns only move forward.
    pub fn mark_cooling(&mut self, proxy: &str, until_ms: u64) {
        if let Some(i) = self.index_of(proxy) {
            self.cooldowns[i] = self.cooldowns[i].max(until_ms);
        }
    }

    pub fn cooling_until(&self, proxy: &str) -> Option<u64> {
        self.index_of(proxy).map(|i| self.cooldowns[i])
    }

    pub fn cooling_count(&self, now_ms: u64) -> usize {
        self.cooldowns.iter().filter(|&&c| c > now_ms).count()
    }

    /// When the next proxy leaves cooldown, if all are cooling.
    pub fn earliest_available(&self) -> Option<u64> {
        self.cooldowns.iter().copied().min()
    }

    /// Books the next request slot on `proxy` (`None` = direct) at least
    /// `min_delay_ms` after the previous one and returns its start time.
    pub fn reserve_slot(&mut self, proxy: Option<&str>, now_ms: u64, min_delay_ms: u64) -> u64 {
        let last = match proxy.and_then(|p| self.index_of(p)) {
            Some(i) => &mut self.last_request[i],
            None => &mut self.direct_last_request,
        };
        let start = match *last {
            Some(prev) => now_ms.max(prev + min_delay_ms),
            None => now_ms,
        };
        *last = Some(start);
        start
    }

    fn index_of(&self, proxy: &str) -> Option<usize> {
        self.proxies.iter().position(|p| p == proxy)
    }
}
