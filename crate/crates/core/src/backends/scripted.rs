use std::collections::HashMap;
use std::time::Instant;

use super::{Backend, BackendError, GenRequest, GenResponse, RecordedCall, RequestKey};
use crate::mixture::{expand_annotation, ExpandError};
use crate::prompts::SentinelConfig;
use crate::types::{AnnotatedExample, ContextMode};

/// What a scripted backend answers when it has no entry for a request.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum MissPolicy {
    #[default]
    Fail,
    EchoEmpty,
    Constant(String),
}

#[derive(Debug, Clone)]
struct Entry {
    prompt: String,
    text: String,
}

/// Replays stored generations. Lookup is by request key when the request
/// carries one, and the stored prompt must then match byte for byte;
/// keyless requests are looked up by prompt.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    id: String,
    by_key: HashMap<RequestKey, Entry>,
    by_prompt: HashMap<String, String>,
    policy: MissPolicy,
}

impl ScriptedBackend {
    pub fn new(policy: MissPolicy) -> Self {
        Self {
            id: "scripted".into(),
            by_key: HashMap::new(),
            by_prompt: HashMap::new(),
            policy,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn set_policy(&mut self, policy: MissPolicy) {
        self.policy = policy;
    }

    /// Adds or replaces the response for `key`.
    pub fn insert(&mut self, key: RequestKey, prompt: impl Into<String>, text: impl Into<String>) {
        let (prompt, text) = (prompt.into(), text.into());
        self.by_prompt.insert(prompt.clone(), text.clone());
        self.by_key.insert(key, Entry { prompt, text });
    }

    pub fn insert_prompt(&mut self, prompt: impl Into<String>, text: impl Into<String>) {
        self.by_prompt.insert(prompt.into(), text.into());
    }

    pub fn len(&self) -> usize {
        self.by_key.len().max(self.by_prompt.len())
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty() && self.by_prompt.is_empty()
    }

    /// Rebuilds a backend from a recording log.
    pub fn from_recording<'a>(calls: impl IntoIterator<Item = &'a RecordedCall>, policy: MissPolicy) -> Self {
        let mut b = Self::new(policy).with_id("replay");
        for c in calls {
            match &c.key {
                Some(k) => b.insert(k.clone(), c.prompt.clone(), c.text.clone()),
                None => b.insert_prompt(c.prompt.clone(), c.text.clone()),
            }
        }
        b
    }

    fn miss(&self, what: String) -> Result<String, BackendError> {
        match &self.policy {
            MissPolicy::Fail => Err(BackendError::Miss(what)),
            MissPolicy::EchoEmpty => Ok(String::new()),
            MissPolicy::Constant(t) => Ok(t.clone()),
        }
    }

    fn lookup(&self, req: &GenRequest) -> Result<String, BackendError> {
        match &req.key {
            Some(key) => match self.by_key.get(key) {
                Some(e) if e.prompt == req.prompt => Ok(e.text.clone()),
                Some(_) => Err(BackendError::PromptMismatch { key: key.to_string() }),
                None => self.miss(key.to_string()),
            },
            None => match self.by_prompt.get(&req.prompt) {
                Some(t) => Ok(t.clone()),
                None => self.miss(format!("prompt {:?}", truncate(&req.prompt, 60))),
            },
        }
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, BackendError> {
        if req.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let start = Instant::now();
        let text = self.lookup(req)?;
        Ok(GenResponse {
            text,
            latency: start.elapsed(),
            backend_id: self.id.clone(),
        })
    }
}

/// Oracle backend answering every step of every annotation with the
/// annotated target.
pub fn scripted_from_annotations(
    pool: &[AnnotatedExample],
    mode: ContextMode,
    sentinels: &SentinelConfig,
    policy: MissPolicy,
) -> Result<ScriptedBackend, ExpandError> {
    let mut b = ScriptedBackend::new(policy).with_id("scripted-annotations");
    for a in pool {
        for inst in expand_annotation(a, mode, sentinels)? {
            b.insert(
                RequestKey::new(inst.example_id.clone(), inst.task, inst.passage),
                inst.input_prompt,
                inst.target,
            );
        }
    }
    Ok(b)
}
