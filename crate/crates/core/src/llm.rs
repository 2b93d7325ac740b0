//! Completion requests and the backend trait.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Stops a completion at the next top-level definition.
pub const DEFAULT_STOP_SEQUENCES: [&str; 2] = ["\ndef ", "\nclass "];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt_text: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
    pub seed: Option<u64>,
}

impl CompletionRequest {
    pub fn new(prompt_text: impl Into<String>) -> Self {
        Self {
            prompt_text: prompt_text.into(),
            max_tokens: 256,
            temperature: 0.8,
            stop_sequences: DEFAULT_STOP_SEQUENCES.iter().map(|s| s.to_string()).collect(),
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), CompletionError> {
        if self.max_tokens < 1 {
            return Err(CompletionError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(CompletionError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompletionError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no replay entry for prompt sha256 {prompt_sha256}")]
    ReplayMiss { prompt_sha256: String },
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
}

/// A source of raw model text.
///
/// Implementations return the model output as-is; stop-sequence truncation is
/// applied by [`complete`].
pub trait CompletionBackend {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, CompletionError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, CompletionError> {
        (**self).complete_raw(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for alloc::boxed::Box<B> {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, CompletionError> {
        (**self).complete_raw(request)
    }
}

/// Validates the request, queries the backend and cuts the text at the first
/// stop sequence. Empty completions are returned as `""`.
pub fn complete(request: &CompletionRequest, backend: &dyn CompletionBackend) -> Result<String, CompletionError> {
    request.validate()?;
    let text = backend.complete_raw(request)?;
    Ok(truncate_at_stop(&text, &request.stop_sequences).to_string())
}

/// Prefix of `text` before the earliest occurrence of any stop sequence.
pub fn truncate_at_stop<'a>(text: &'a str, stops: &[String]) -> &'a str {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}
