//! Chained per-path test generation.
//!
//! For each minimized path the model sees the rendered generation context,
//! every test accepted so far, and the path prompt. Each completion is glued
//! to the prompt's test header, trimmed from the end until it parses, and
//! stripped of imports the execution preamble already provides.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::context::{
    build_execution_context, strip_duplicate_imports, ExecutionContext, FocalContext, TokenEstimator,
};
use crate::llm::{complete, CompletionBackend, CompletionError, CompletionRequest, DEFAULT_STOP_SEQUENCES};
use crate::paths::ExecutionPath;
use crate::prompt::{render_baseline_prompt, render_noop_test, render_path_prompt, Prompt, PromptKind, PromptOptions};
use crate::syntax::{FocalMethod, SourceParser};
use crate::text::split_lines_inclusive;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// One chained prompt per minimized execution path.
    Symprompt,
    /// A single open test-completion prompt.
    Baseline,
    /// A test that only imports the focal module.
    Noop,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Noop, Strategy::Baseline, Strategy::Symprompt];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Symprompt => "symprompt",
            Strategy::Baseline => "baseline",
            Strategy::Noop => "noop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.as_str() == s)
    }
}

impl core::fmt::Display for Strategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedTest {
    pub path_index: usize,
    pub prompt: Prompt,
    pub raw_output: String,
    /// Longest parseable line prefix of `header + "\n" + raw_output`, or empty.
    pub repaired_code: String,
    pub dropped_line_count: usize,
    /// `repaired_code` after duplicate imports were removed; what goes in the suite file.
    pub code: String,
}

impl GeneratedTest {
    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    pub focal: FocalMethod,
    pub strategy: Strategy,
    pub sample: usize,
    pub tests: Vec<GeneratedTest>,
    pub execution_preamble: ExecutionContext,
}

impl TestSuite {
    /// The Python test file: preamble, then non-empty tests in order.
    /// No-Op suites contain only the No-Op test.
    pub fn render_file(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if self.strategy != Strategy::Noop && !self.execution_preamble.preamble.is_empty() {
            parts.push(self.execution_preamble.preamble.trim_end());
        }
        parts.extend(self.tests.iter().filter(|t| !t.is_empty()).map(|t| t.code.trim_end()));
        let mut out = parts.join("\n\n\n");
        out.push('\n');
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
    pub seed: Option<u64>,
    /// Model window in estimated tokens; `None` disables chain trimming.
    pub context_window: Option<usize>,
    pub prompt: PromptOptions,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            max_tokens: 256,
            temperature: 0.8,
            stop_sequences: DEFAULT_STOP_SEQUENCES.iter().map(|s| String::from(*s)).collect(),
            seed: None,
            context_window: None,
            prompt: PromptOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerationError {
    #[error(transparent)]
    Completion(#[from] CompletionError),
}

/// Everything one suite generation needs besides the paths.
pub struct Generator<'a> {
    pub parser: &'a dyn SourceParser,
    pub backend: &'a dyn CompletionBackend,
    pub estimator: &'a dyn TokenEstimator,
    pub config: &'a GenerationConfig,
}

/// Deletes lines from the end until the text parses. Returns the kept prefix
/// and the number of lines removed; nothing parseable (or only blank text)
/// yields `""`.
pub fn repair_truncation(code: &str, parser: &dyn SourceParser) -> (String, usize) {
    let lines = split_lines_inclusive(code);
    let total = lines.len();
    for keep in (1..=total).rev() {
        let candidate: String = lines[..keep].concat();
        if candidate.trim().is_empty() {
            break;
        }
        if parser.check_parses(&candidate) {
            return (candidate, total - keep);
        }
    }
    (String::new(), total)
}

/// Joins the context, accepted tests and the prompt with two blank lines.
pub fn compose_prompt(context: &str, chain: &[&str], prompt: &Prompt) -> String {
    let mut out = String::new();
    for part in core::iter::once(context).chain(chain.iter().copied()) {
        let part = part.trim_end();
        if part.is_empty() {
            continue;
        }
        out.push_str(part);
        out.push_str("\n\n\n");
    }
    out.push_str(&prompt.text);
    out
}

impl Generator<'_> {
    fn request(&self, prompt_text: String, sample: usize) -> CompletionRequest {
        CompletionRequest {
            prompt_text,
            max_tokens: self.config.max_tokens,
            temperature: self.config.temperature,
            stop_sequences: self.config.stop_sequences.clone(),
            seed: self.config.seed.map(|s| s.wrapping_add(sample as u64)),
        }
    }

    /// Prompt for one generation, dropping the earliest chained tests while it
    /// would not fit the model window.
    fn chained_prompt(&self, context: &str, chain: &[String], prompt: &Prompt) -> String {
        let mut start = 0;
        loop {
            let parts: Vec<&str> = chain[start..].iter().map(String::as_str).collect();
            let text = compose_prompt(context, &parts, prompt);
            let fits = match self.config.context_window {
                Some(window) => self.estimator.estimate(&text) + self.config.max_tokens as usize <= window,
                None => true,
            };
            if fits || start == chain.len() {
                return text;
            }
            start += 1;
        }
    }

    fn finish_test(
        &self,
        prompt: Prompt,
        path_index: usize,
        raw_output: String,
        exec: &ExecutionContext,
    ) -> GeneratedTest {
        let mut glued = String::from(prompt.test_header());
        glued.push('\n');
        glued.push_str(&raw_output);
        let (repaired_code, dropped_line_count) = repair_truncation(&glued, self.parser);
        let code = if repaired_code.is_empty() {
            String::new()
        } else {
            strip_duplicate_imports(&repaired_code, exec, self.parser)
        };
        GeneratedTest {
            path_index,
            prompt,
            raw_output,
            repaired_code,
            dropped_line_count,
            code,
        }
    }

    /// Generates one suite (one sample) for `focal` with the given strategy.
    pub fn generate_suite(
        &self,
        strategy: Strategy,
        ctx: &FocalContext,
        focal: &FocalMethod,
        paths: &[ExecutionPath],
        sample: usize,
    ) -> Result<TestSuite, GenerationError> {
        let exec = build_execution_context(ctx);
        let context = ctx.render();
        let mut tests = Vec::new();
        match strategy {
            Strategy::Noop => {
                let code = render_noop_test(focal);
                tests.push(GeneratedTest {
                    path_index: 1,
                    prompt: Prompt {
                        kind: PromptKind::Noop,
                        text: code.clone(),
                        path_index: None,
                    },
                    raw_output: code.clone(),
                    repaired_code: code.clone(),
                    dropped_line_count: 0,
                    code,
                });
            }
            Strategy::Baseline => {
                let prompt = render_baseline_prompt(focal);
                let text = compose_prompt(&context, &[], &prompt);
                let raw = complete(&self.request(text, sample), self.backend)?;
                tests.push(self.finish_test(prompt, 1, raw, &exec));
            }
            Strategy::Symprompt => {
                let mut chain: Vec<String> = Vec::new();
                for (i, path) in paths.iter().enumerate() {
                    let prompt = render_path_prompt(focal, path, i + 1, self.config.prompt);
                    let text = self.chained_prompt(&context, &chain, &prompt);
                    let raw = complete(&self.request(text, sample), self.backend)?;
                    let test = self.finish_test(prompt, i + 1, raw, &exec);
                    if !test.is_empty() {
                        chain.push(test.code.clone());
                    }
                    tests.push(test);
                }
            }
        }
        Ok(TestSuite {
            focal: focal.clone(),
            strategy,
            sample,
            tests,
            execution_preamble: exec,
        })
    }
}
