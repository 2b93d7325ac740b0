#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pathprompt_core::llm::{CompletionBackend, CompletionError, CompletionRequest};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap()
}

/// Answers each prompt with the transcript entry for the test header it ends with.
pub struct Scripted(pub BTreeMap<String, String>);

impl Scripted {
    pub fn load() -> Self {
        Scripted(serde_json::from_str(&read_fixture("e2e/transcripts.json")).unwrap())
    }
}

impl CompletionBackend for Scripted {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, CompletionError> {
        let header = request.prompt_text.trim_end().lines().last().unwrap_or("");
        self.0.get(header).cloned().ok_or(CompletionError::ReplayMiss {
            prompt_sha256: header.to_string(),
        })
    }
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_pathprompt"))
}
pub mod synth;
