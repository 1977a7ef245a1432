use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// A single HTTP GET, optionally through a proxy. Transport failures are
/// returned as text; HTTP error statuses are ordinary responses.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, proxy: Option<&str>, user_agent: &str) -> Result<HttpResponse, String>;
}

/// Blocking reqwest client, one per proxy.
pub struct HttpTransport {
    timeout: Duration,
    clients: Mutex<HashMap<Option<String>, reqwest::blocking::Client>>,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        HttpTransport { timeout, clients: Mutex::new(HashMap::new()) }
    }

    fn client(&self, proxy: Option<&str>) -> Result<reqwest::blocking::Client, String> {
        let key = proxy.map(str::to_string);
        if let Some(c) = self.clients.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let mut builder = reqwest::blocking::Client::builder().timeout(self.timeout);
        builder = match proxy {
            Some(p) => builder.proxy(reqwest::Proxy::all(p).map_err(|e| e.to_string())?),
            None => builder.no_proxy(),
        };
        let client = builder.build().map_err(|e| e.to_string())?;
        self.clients.lock().unwrap().insert(key, client.clone());
        Ok(client)
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str, proxy: Option<&str>, user_agent: &str) -> Result<HttpResponse, String> {
        let response = self
            .client(proxy)?
            .get(url)
            .header(reqwest::header::USER_AGENT, user_agent)
            .send()
            .map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}
