//! Text-generation backends behind one blocking, thread-safe contract.

mod http;
mod recording;
mod scripted;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::prompts::TaskId;
use crate::types::PassageIndex;

pub use http::{HttpBackend, HttpConfig};
pub use recording::{RecordedCall, Recording};
pub use scripted::{scripted_from_annotations, MissPolicy, ScriptedBackend};

/// Identifies one circuit step of one example. Not sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RequestKey {
    pub example_id: String,
    pub task: TaskId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage: Option<PassageIndex>,
}

impl RequestKey {
    pub fn new(example_id: impl Into<String>, task: TaskId, passage: Option<PassageIndex>) -> Self {
        Self {
            example_id: example_id.into(),
            task,
            passage,
        }
    }
}

impl fmt::Display for RequestKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}", self.example_id, self.task)?;
        if let Some(p) = self.passage {
            write!(f, ", p{p}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenRequest {
    pub prompt: String,
    pub max_new_tokens: usize,
    pub stop: Option<Vec<String>>,
    pub key: Option<RequestKey>,
}

impl GenRequest {
    pub fn new(prompt: impl Into<String>, max_new_tokens: usize) -> Self {
        Self {
            prompt: prompt.into(),
            max_new_tokens,
            stop: None,
            key: None,
        }
    }

    pub fn with_key(mut self, key: RequestKey) -> Self {
        self.key = Some(key);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenResponse {
    pub text: String,
    pub latency: Duration,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("no scripted response for {0}")]
    Miss(String),
    #[error("scripted prompt for {key} does not match the request prompt")]
    PromptMismatch { key: String },
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("server error {status}: {body}")]
    Server { status: u16, body: String },
    #[error("request rejected with {status}: {body}")]
    Request { status: u16, body: String },
    #[error("malformed response body: {0}")]
    Malformed(String),
    #[error("backend unavailable after {attempts} attempt(s): {last}")]
    Unavailable { attempts: u32, last: Box<BackendError> },
}

/// A text generator. Implementations must accept concurrent calls.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, BackendError> {
        (**self).generate(req)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, BackendError> {
        (**self).generate(req)
    }
}

/// Backend answering from a closure; handy for rule-driven test doubles.
pub struct FnBackend<F> {
    id: String,
    f: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&GenRequest) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        Self { id: id.into(), f }
    }
}

impl<F> Backend for FnBackend<F>
where
    F: Fn(&GenRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, BackendError> {
        if req.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let start = std::time::Instant::now();
        let text = (self.f)(req)?;
        Ok(GenResponse {
            text,
            latency: start.elapsed(),
            backend_id: self.id.clone(),
        })
    }
}
