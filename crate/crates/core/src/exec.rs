//! Wire types shared with the execution sandbox.
//!
//! The sandbox reads one [`ExecutionJob`] JSON document on stdin and writes one
//! [`ExecutionResult`] JSON document on stdout. A nonzero exit status means
//! the sandbox itself failed, as opposed to a test failing.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// A branch arm as `(source line, destination line)`; a negative destination
/// means leaving the function.
pub type BranchArm = (i64, i64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocalTarget {
    /// Path of the focal file on disk.
    pub module_path: String,
    /// Dotted module name used to import it.
    pub module: String,
    pub qualified_name: String,
    /// 1-based inclusive line span of the focal definition.
    pub line_span: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionJob {
    pub protocol_version: u32,
    pub suite_file: String,
    pub focal: FocalTarget,
    /// Per-test timeout in seconds.
    pub timeout: f64,
    /// Whole-suite timeout in seconds.
    pub suite_timeout: f64,
    /// Directories prepended to the import path, typically the project root.
    #[serde(default)]
    pub python_path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JobError {
    #[error("timeout must be positive")]
    NonPositiveTimeout,
    #[error("line span {0:?} is empty or not 1-based")]
    BadLineSpan((usize, usize)),
    #[error("unsupported protocol version {0} (expected {PROTOCOL_VERSION})")]
    ProtocolVersion(u32),
}

impl ExecutionJob {
    pub fn validate(&self) -> Result<(), JobError> {
        if self.protocol_version != PROTOCOL_VERSION {
            return Err(JobError::ProtocolVersion(self.protocol_version));
        }
        if [self.timeout, self.suite_timeout]
            .iter()
            .any(|t| t.is_nan() || *t <= 0.0)
        {
            return Err(JobError::NonPositiveTimeout);
        }
        let (start, end) = self.focal.line_span;
        if start == 0 || end < start {
            return Err(JobError::BadLineSpan(self.focal.line_span));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestStatus {
    Pass,
    Fail,
    Error,
    Timeout,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub covered_lines: BTreeSet<usize>,
    #[serde(default)]
    pub covered_branches: BTreeSet<BranchArm>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub status: TestStatus,
    pub called_focal: bool,
    #[serde(default)]
    pub covered_lines: BTreeSet<usize>,
    #[serde(default)]
    pub covered_branches: BTreeSet<BranchArm>,
}

impl TestResult {
    pub fn passed(&self) -> bool {
        self.status == TestStatus::Pass
    }

    /// Passed and entered the focal method.
    pub fn is_correct(&self) -> bool {
        self.passed() && self.called_focal
    }
}

/// Lines and branch arms of the focal method as seen by the tracer; the
/// coverage denominators.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocalGeometry {
    pub executable_lines: BTreeSet<usize>,
    #[serde(default)]
    pub branch_arms: BTreeSet<BranchArm>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub protocol_version: u32,
    pub tests: Vec<TestResult>,
    pub module_load_coverage: Coverage,
    pub focal_geometry: FocalGeometry,
}

impl ExecutionResult {
    /// Checks version and that every test claiming a focal call covered a
    /// focal line.
    pub fn validate(&self) -> Result<(), ResultError> {
        if self.protocol_version != PROTOCOL_VERSION {
            return Err(ResultError::ProtocolVersion(self.protocol_version));
        }
        for t in &self.tests {
            if t.called_focal
                && !self.focal_geometry.executable_lines.is_empty()
                && t.covered_lines.is_disjoint(&self.focal_geometry.executable_lines)
            {
                return Err(ResultError::CallWithoutCoverage(t.test_name.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResultError {
    #[error("unsupported protocol version {0} (expected {PROTOCOL_VERSION})")]
    ProtocolVersion(u32),
    #[error("test `{0}` called the focal method but covered none of its lines")]
    CallWithoutCoverage(String),
}
