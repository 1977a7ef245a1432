use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use chrono::{SecondsFormat, TimeZone, Utc};

/// Millisecond wall clock. Injected so rate limiting can run on virtual time.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
    fn sleep_ms(&self, ms: u64);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(Duration::from_millis(ms));
    }
}

/// Time only moves when someone sleeps.
#[derive(Debug)]
pub struct VirtualClock {
    now: Mutex<u64>,
}

impl VirtualClock {
    pub fn new(start_ms: u64) -> Self {
        VirtualClock { now: Mutex::new(start_ms) }
    }

    pub fn advance(&self, ms: u64) {
        *self.now.lock().unwrap() += ms;
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> u64 {
        *self.now.lock().unwrap()
    }

    fn sleep_ms(&self, ms: u64) {
        self.advance(ms);
    }
}

/// RFC 3339 UTC with second precision, e.g. `2024-01-01T00:00:00Z`.
pub fn rfc3339(ms: u64) -> String {
    Utc.timestamp_millis_opt(ms as i64)
        .single()
        .unwrap_or_default()
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}
