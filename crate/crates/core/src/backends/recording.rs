use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, GenRequest, GenResponse, RequestKey};

/// One successful call seen by a [`Recording`] wrapper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedCall {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<RequestKey>,
    pub prompt: String,
    pub text: String,
}

/// Wraps a backend and logs every successful generation so the run can be
/// replayed through a [`super::ScriptedBackend`].
pub struct Recording<B> {
    inner: B,
    log: Mutex<Vec<RecordedCall>>,
}

impl<B: Backend> Recording<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Calls recorded so far, in completion order.
    pub fn calls(&self) -> Vec<RecordedCall> {
        self.log.lock().expect("recording log poisoned").clone()
    }

    pub fn into_calls(self) -> Vec<RecordedCall> {
        self.log.into_inner().expect("recording log poisoned")
    }

    /// The log as JSON lines.
    pub fn to_jsonl(&self) -> String {
        self.calls()
            .iter()
            .map(|c| serde_json::to_string(c).expect("recorded call serializes") + "\n")
            .collect()
    }
}

impl<B: Backend> Backend for Recording<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, BackendError> {
        let resp = self.inner.generate(req)?;
        self.log.lock().expect("recording log poisoned").push(RecordedCall {
            key: req.key.clone(),
            prompt: req.prompt.clone(),
            text: resp.text.clone(),
        });
        Ok(resp)
    }
}
