//! Prompt templates.
//!
//! A path prompt is a comment block followed by an open test header that the
//! model completes:
//!
//! ```text
//! # Unit test for method exists_as(path: _PATH) -> str
//! # where not (path.is_dir()) and path.is_file()
//! # returns: 'file'
//! def test_exists_as_path_2():
//! ```
//!
//! The `where` line is omitted for unconstrained paths. Raising paths use a
//! `# raises:` line instead of `# returns:` unless the raises clause is turned
//! off, in which case they carry no behavior line at all.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::paths::{ExecutionPath, PathKind};
use crate::syntax::FocalMethod;

/// Bumped whenever the rendered wording changes.
pub const TEMPLATE_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Path,
    Baseline,
    Noop,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub kind: PromptKind,
    pub text: String,
    /// 1-based path ordinal for path prompts.
    pub path_index: Option<usize>,
}

impl Prompt {
    /// The final `def test_...():` line the model continues from.
    pub fn test_header(&self) -> &str {
        self.text.trim_end_matches('\n').rsplit('\n').next().unwrap_or("")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    pub raises_clause: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self { raises_clause: true }
    }
}

pub fn render_path_prompt(
    focal: &FocalMethod,
    path: &ExecutionPath,
    path_index: usize,
    options: PromptOptions,
) -> Prompt {
    let mut lines: Vec<String> = Vec::with_capacity(4);
    lines.push(alloc::format!(
        "# Unit test for method {}{}",
        focal.display_name(),
        focal.params
    ));
    if let Some(cond) = path.condition() {
        lines.push(alloc::format!("# where {cond}"));
    }
    match (path.kind, path.return_expr.as_deref()) {
        (PathKind::Raising, _) if options.raises_clause => {
            lines.push(alloc::format!("# raises: {}", path.exception().unwrap_or_default()));
        }
        (PathKind::Raising, _) => {}
        (_, Some(expr)) => lines.push(alloc::format!("# returns: {expr}")),
        (_, None) => {}
    }
    lines.push(alloc::format!("def test_{}_path_{path_index}():", focal.test_stem()));
    Prompt {
        kind: PromptKind::Path,
        text: join_lines(&lines),
        path_index: Some(path_index),
    }
}

pub fn render_baseline_prompt(focal: &FocalMethod) -> Prompt {
    let lines = [
        alloc::format!("# Unit test for method {}", focal.display_name()),
        alloc::format!("def test_{}():", focal.test_stem()),
    ];
    Prompt {
        kind: PromptKind::Baseline,
        text: join_lines(&lines),
        path_index: None,
    }
}

/// A complete test that only imports the focal module.
pub fn render_noop_test(focal: &FocalMethod) -> String {
    let body = if focal.module.is_empty() {
        String::from("    return\n")
    } else {
        alloc::format!("    import {}\n    return\n", focal.module)
    };
    alloc::format!("def test_noop():\n{body}")
}

fn join_lines(lines: &[String]) -> String {
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

/// One line of the prompt export file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub focal: String,
    pub kind: PromptKind,
    pub path_index: Option<usize>,
    pub text: String,
    pub template_version: String,
}

impl PromptRecord {
    pub fn new(focal: &FocalMethod, prompt: &Prompt) -> Self {
        Self {
            focal: focal.qualified_name.clone(),
            kind: prompt.kind,
            path_index: prompt.path_index,
            text: prompt.text.clone(),
            template_version: String::from(TEMPLATE_VERSION),
        }
    }
}
