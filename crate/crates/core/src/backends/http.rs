use std::io;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use ureq::Agent;

use super::{Backend, BackendError, GenRequest, GenResponse};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpConfig {
    pub endpoint: String,
    pub timeout: Duration,
    /// Extra attempts after the first one.
    pub retries: u32,
    pub backoff_base: Duration,
    pub max_in_flight: usize,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(60),
            retries: 3,
            backoff_base: Duration::from_millis(250),
            max_in_flight: 4,
        }
    }

    pub fn timeout(mut self, t: Duration) -> Self {
        self.timeout = t;
        self
    }

    pub fn retries(mut self, n: u32) -> Self {
        self.retries = n;
        self
    }

    pub fn backoff_base(mut self, d: Duration) -> Self {
        self.backoff_base = d;
        self
    }

    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    /// Delay before retry number `attempt` (0-based): base * 2^attempt.
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.backoff_base.saturating_mul(1u32 << attempt.min(16))
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    max_new_tokens: usize,
    stop: Option<&'a [String]>,
}

/// Blocking JSON client: POSTs `{"prompt","max_new_tokens","stop"}` and
/// expects `{"text"}` back.
pub struct HttpBackend {
    cfg: HttpConfig,
    agent: Agent,
    id: String,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend").field("cfg", &self.cfg).finish()
    }
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<Self, BackendError> {
        let scheme_ok = cfg.endpoint.starts_with("http://") || cfg.endpoint.starts_with("https://");
        if !scheme_ok || cfg.endpoint.parse::<ureq::http::Uri>().is_err() {
            return Err(BackendError::Connection(format!(
                "invalid endpoint URL '{}'",
                cfg.endpoint
            )));
        }
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            id: format!("http:{}", cfg.endpoint),
            cfg,
            agent,
            in_flight: Mutex::new(0),
            slot_freed: Condvar::new(),
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.cfg
    }

    fn acquire(&self) -> InFlight<'_> {
        let mut n = self.in_flight.lock().expect("in-flight counter poisoned");
        while *n >= self.cfg.max_in_flight {
            n = self.slot_freed.wait(n).expect("in-flight counter poisoned");
        }
        *n += 1;
        InFlight(self)
    }

    fn attempt(&self, body: &str) -> Result<String, BackendError> {
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("content-type", "application/json")
            .send(body)
            .map_err(transport_error)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport_error)?;
        match status {
            200..=299 => extract_text(&text),
            400..=499 => Err(BackendError::Request { status, body: text }),
            _ => Err(BackendError::Server { status, body: text }),
        }
    }
}

struct InFlight<'a>(&'a HttpBackend);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().expect("in-flight counter poisoned");
        *n -= 1;
        self.0.slot_freed.notify_one();
    }
}

fn transport_error(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::Io(ref io) if matches!(io.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) => {
            BackendError::Timeout
        }
        other => BackendError::Connection(other.to_string()),
    }
}

fn extract_text(body: &str) -> Result<String, BackendError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| BackendError::Malformed(format!("{e}: {body}")))?;
    match v.get("text") {
        Some(serde_json::Value::String(s)) => Ok(s.clone()),
        _ => Err(BackendError::Malformed(format!(
            "missing string field \"text\": {body}"
        ))),
    }
}

fn retryable(e: &BackendError) -> bool {
    matches!(
        e,
        BackendError::Timeout | BackendError::Connection(_) | BackendError::Server { .. }
    )
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, BackendError> {
        if req.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let body = serde_json::to_string(&WireRequest {
            prompt: &req.prompt,
            max_new_tokens: req.max_new_tokens,
            stop: req.stop.as_deref(),
        })
        .expect("request serializes");

        let _slot = self.acquire();
        let start = Instant::now();
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => {
                    return Ok(GenResponse {
                        text,
                        latency: start.elapsed(),
                        backend_id: self.id.clone(),
                    })
                }
                Err(e) if retryable(&e) => {
                    if attempt >= self.cfg.retries {
                        return Err(BackendError::Unavailable {
                            attempts: attempt + 1,
                            last: Box::new(e),
                        });
                    }
                    thread::sleep(self.cfg.backoff(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
