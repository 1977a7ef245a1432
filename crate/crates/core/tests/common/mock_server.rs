//! Scripted HTTP endpoint for fetcher tests.
//!
//! Every listener (the endpoint itself and any number of "proxies") serves
//! from one shared script and records which listener saw which request.
//! Proxies receive absolute-form request targets, which is all a plain HTTP
//! proxy has to handle.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

#[derive(Debug, Clone)]
pub struct Reply {
    pub status: u16,
    pub body: String,
}

impl Reply {
    pub fn ok(body: &str) -> Self {
        Reply { status: 200, body: body.to_string() }
    }

    pub fn captcha() -> Self {
        Reply::ok("<html><body><p>Our systems have detected unusual traffic from your computer network.</p></body></html>")
    }

    pub fn status(status: u16) -> Self {
        Reply { status, body: String::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Seen {
    pub listener: String,
    pub target: String,
    pub user_agent: String,
}

#[derive(Default)]
struct Shared {
    script: VecDeque<Reply>,
    fallback: Option<Reply>,
    seen: Vec<Seen>,
}

#[derive(Clone)]
pub struct MockServer {
    shared: Arc<Mutex<Shared>>,
}

impl MockServer {
    /// Replies come from `script` in order, then `fallback` forever.
    pub fn new(script: Vec<Reply>, fallback: Reply) -> Self {
        MockServer {
            shared: Arc::new(Mutex::new(Shared { script: script.into(), fallback: Some(fallback), seen: Vec::new() })),
        }
    }

    /// Starts a listener named `label` and returns its base URL.
    pub fn listen(&self, label: &str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let shared = self.shared.clone();
        let label = label.to_string();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let shared = shared.clone();
                let label = label.clone();
                thread::spawn(move || serve(stream, &label, &shared));
            }
        });
        format!("http://{addr}")
    }

    pub fn seen(&self) -> Vec<Seen> {
        self.shared.lock().unwrap().seen.clone()
    }
}

fn serve(stream: TcpStream, label: &str, shared: &Mutex<Shared>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let mut user_agent = String::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("user-agent") {
                user_agent = value.trim().to_string();
            }
        }
    }
    let target = request_line.split_whitespace().nth(1).unwrap_or_default().to_string();
    let reply = {
        let mut s = shared.lock().unwrap();
        s.seen.push(Seen { listener: label.to_string(), target, user_agent });
        s.script.pop_front().or_else(|| s.fallback.clone()).unwrap()
    };
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {} Scripted\r\nContent-Type: text/html; charset=utf-8\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    );
    let _ = stream.flush();
}

/// A URL nothing listens on.
pub fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}
