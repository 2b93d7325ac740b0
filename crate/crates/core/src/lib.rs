//! Path-constraint driven unit-test generation, minus the I/O.
//!
//! This crate holds everything that can be expressed as pure computation over
//! a parsed Python module:
//!
//! * [`syntax`]: a language-neutral concrete syntax tree plus focal-method lookup.
//! * [`paths`]: approximate path-constraint collection over a focal method body.
//! * [`minimize`]: constraint-novelty path minimization.
//! * [`context`]: the five-part generation context and the execution preamble.
//! * [`prompt`]: path, baseline and No-Op prompt templates.
//! * [`llm`]: the completion request type and backend trait.
//! * [`generate`]: the chained per-path generation loop and truncation repair.
//! * [`exec`]: the sandbox wire types (jobs and results).
//! * [`metrics`]: Pass@1, FM Call@1, Correct@1 and coverage aggregation.
//!
//! Parsing itself is supplied by the caller through [`syntax::SourceParser`];
//! the `pathprompt` crate provides a tree-sitter backed implementation.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod context;
pub mod exec;
pub mod generate;
pub mod llm;
pub mod metrics;
pub mod minimize;
pub mod paths;
pub mod prompt;
pub mod syntax;

mod text;

pub use context::{ExecutionContext, FocalContext};
pub use generate::{GeneratedTest, Strategy, TestSuite};
pub use metrics::MetricsReport;
pub use paths::{Constraint, ExecutionPath, PathKind};
pub use prompt::{Prompt, PromptKind};
pub use syntax::{FocalMethod, SourceParser, SyntaxTree};
