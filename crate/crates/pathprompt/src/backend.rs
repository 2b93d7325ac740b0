//! Completion backends: replay fixtures, OpenAI-compatible HTTP endpoints and
//! a recorder that turns live runs into replay fixtures.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use pathprompt_core::llm::{CompletionBackend, CompletionError, CompletionRequest};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn prompt_sha256(prompt_text: &str) -> String {
    sha256_hex(prompt_text.as_bytes())
}

/// One line of a replay fixture.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub prompt_sha256: String,
    pub completion: String,
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("cannot read replay fixture {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed replay entry: {source}")]
    Malformed {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: conflicting completions for prompt {sha}")]
    Conflict { path: String, line: usize, sha: String },
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("cannot build HTTP client: {0}")]
    Client(String),
}

/// Answers from a fixture keyed by the sha256 of the prompt text.
#[derive(Clone, Debug, Default)]
pub struct ReplayBackend {
    entries: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn from_entries(entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.prompt_sha256, e.completion)).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let shown = path.display().to_string();
        let file = fs::File::open(path).map_err(|source| BackendError::Io {
            path: shown.clone(),
            source,
        })?;
        let mut entries = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| BackendError::Io {
                path: shown.clone(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayEntry = serde_json::from_str(&line).map_err(|source| BackendError::Malformed {
                path: shown.clone(),
                line: i + 1,
                source,
            })?;
            match entries.get(&entry.prompt_sha256) {
                Some(existing) if *existing != entry.completion => {
                    return Err(BackendError::Conflict {
                        path: shown,
                        line: i + 1,
                        sha: entry.prompt_sha256,
                    })
                }
                _ => {
                    entries.insert(entry.prompt_sha256, entry.completion);
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, CompletionError> {
        let sha = prompt_sha256(&request.prompt_text);
        self.entries
            .get(&sha)
            .cloned()
            .ok_or(CompletionError::ReplayMiss { prompt_sha256: sha })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HttpApi {
    /// `POST {base}/chat/completions`, prompt sent as one user message.
    Chat,
    /// `POST {base}/completions`, raw prompt.
    Completion,
}

/// OpenAI-compatible HTTP client.
#[derive(Debug)]
pub struct HttpBackend {
    api: HttpApi,
    base_url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(
        api: HttpApi,
        base_url: &str,
        model: &str,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Client(e.to_string()))?;
        Ok(Self {
            api,
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            client,
        })
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.model,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        });
        match self.api {
            HttpApi::Chat => {
                body["messages"] = json!([{ "role": "user", "content": request.prompt_text }]);
            }
            HttpApi::Completion => body["prompt"] = json!(request.prompt_text),
        }
        if !request.stop_sequences.is_empty() {
            body["stop"] = json!(request.stop_sequences);
        }
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn url(&self) -> String {
        match self.api {
            HttpApi::Chat => format!("{}/chat/completions", self.base_url),
            HttpApi::Completion => format!("{}/completions", self.base_url),
        }
    }

    fn extract(&self, response: &Value) -> Option<String> {
        let choice = response.get("choices")?.get(0)?;
        let text = match self.api {
            HttpApi::Chat => choice.get("message")?.get("content")?,
            HttpApi::Completion => choice.get("text")?,
        };
        match text {
            Value::Null => Some(String::new()),
            Value::String(s) => Some(s.clone()),
            _ => None,
        }
    }
}

impl CompletionBackend for HttpBackend {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, CompletionError> {
        let unavailable = |msg: String| CompletionError::BackendUnavailable(msg);
        let mut call = self.client.post(self.url()).json(&self.body(request));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| unavailable(format!("{}: {e}", self.url())))?;
        let status = response.status();
        let text = response.text().map_err(|e| unavailable(e.to_string()))?;
        if !status.is_success() {
            let snippet: String = text.chars().take(200).collect();
            return Err(unavailable(format!("{} returned {status}: {snippet}", self.url())));
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| unavailable(format!("response is not JSON: {e}")))?;
        self.extract(&value)
            .ok_or_else(|| unavailable("response has no completion text".to_string()))
    }
}

/// Wraps a backend and remembers every (prompt, raw completion) pair.
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<Vec<ReplayEntry>>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn entries(&self) -> Vec<ReplayEntry> {
        self.log.lock().expect("recording lock").clone()
    }

    /// Writes the recorded entries as a replay fixture, sorted and deduplicated.
    pub fn write_fixture(&self, path: &Path) -> std::io::Result<()> {
        let mut entries = self.entries();
        entries.sort_by(|a, b| a.prompt_sha256.cmp(&b.prompt_sha256));
        entries.dedup();
        let mut out = fs::File::create(path)?;
        for e in entries {
            writeln!(out, "{}", serde_json::to_string(&e).expect("entry serializes"))?;
        }
        Ok(())
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, CompletionError> {
        let text = self.inner.complete_raw(request)?;
        self.log.lock().expect("recording lock").push(ReplayEntry {
            prompt_sha256: prompt_sha256(&request.prompt_text),
            completion: text.clone(),
        });
        Ok(text)
    }
}

/// Backend section of the configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    Replay {
        fixture: PathBuf,
    },
    HttpChat {
        base_url: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_request_timeout")]
        request_timeout: f64,
    },
    HttpCompletion {
        base_url: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_request_timeout")]
        request_timeout: f64,
    },
}

fn default_request_timeout() -> f64 {
    120.0
}

pub type SharedBackend = Box<dyn CompletionBackend + Send + Sync>;

impl BackendConfig {
    /// Builds the backend; relative fixture paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<SharedBackend, BackendError> {
        let http = |api, base_url: &str, model: &str, key_env: &Option<String>, timeout: f64| {
            let api_key = match key_env {
                Some(var) => Some(std::env::var(var).map_err(|_| BackendError::MissingApiKey(var.clone()))?),
                None => None,
            };
            let backend = HttpBackend::new(api, base_url, model, api_key, Duration::from_secs_f64(timeout))?;
            Ok::<SharedBackend, BackendError>(Box::new(backend))
        };
        match self {
            BackendConfig::Replay { fixture } => Ok(Box::new(ReplayBackend::load(&base_dir.join(fixture))?)),
            BackendConfig::HttpChat {
                base_url,
                model,
                api_key_env,
                request_timeout,
            } => http(HttpApi::Chat, base_url, model, api_key_env, *request_timeout),
            BackendConfig::HttpCompletion {
                base_url,
                model,
                api_key_env,
                request_timeout,
            } => http(HttpApi::Completion, base_url, model, api_key_env, *request_timeout),
        }
    }
}
