//! Client side of the sandbox protocol.
//!
//! The sandbox command receives one [`ExecutionJob`] as JSON on stdin and must
//! print one [`ExecutionResult`] as JSON on stdout. Exiting nonzero means the
//! sandbox itself crashed.

use std::io::{ErrorKind, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use pathprompt_core::exec::{ExecutionJob, ExecutionResult, JobError, ResultError, PROTOCOL_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error(
        "sandbox command `{program}` was not found; install an executor that speaks \
         execution protocol version {PROTOCOL_VERSION} (ExecutionJob JSON on stdin, \
         ExecutionResult JSON on stdout) or pass --sandbox / --recorded"
    )]
    Missing { program: String },
    #[error("cannot start sandbox `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sandbox crashed ({status}): {stderr}")]
    SandboxCrash { status: String, stderr: String },
    #[error("sandbox output is not a protocol version {PROTOCOL_VERSION} result: {0}")]
    Protocol(String),
    #[error("invalid job: {0}")]
    Job(#[from] JobError),
    #[error("invalid result: {0}")]
    Result(#[from] ResultError),
    #[error("no recorded result for suite sha256 {sha} in {dir}")]
    RecordingMissing { sha: String, dir: String },
}

/// Something that turns a job into a result.
pub trait Executor: Sync {
    /// `suite_sha256` identifies the suite content for recorded executors.
    fn execute(&self, job: &ExecutionJob, suite_sha256: &str) -> Result<ExecutionResult, SandboxError>;
}

/// Spawns an external sandbox process per job.
#[derive(Clone, Debug)]
pub struct SandboxClient {
    pub command: Vec<String>,
}

impl SandboxClient {
    pub fn new(command: Vec<String>) -> Self {
        Self { command }
    }

    /// The sandbox enforces its own timeouts; this only catches a hung sandbox.
    fn wall_limit(&self, job: &ExecutionJob) -> Duration {
        Duration::from_secs_f64(job.suite_timeout * 2.0 + 10.0)
    }
}

impl Executor for SandboxClient {
    fn execute(&self, job: &ExecutionJob, _suite_sha256: &str) -> Result<ExecutionResult, SandboxError> {
        job.validate()?;
        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| SandboxError::Missing { program: String::new() })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| match source.kind() {
                ErrorKind::NotFound => SandboxError::Missing {
                    program: program.clone(),
                },
                _ => SandboxError::Spawn {
                    program: program.clone(),
                    source,
                },
            })?;
        let payload = serde_json::to_vec(job).expect("job serializes");
        if let Some(mut stdin) = child.stdin.take() {
            // A sandbox that exits without reading stdin shows up below as a crash.
            let _ = stdin.write_all(&payload);
        }
        let mut stdout_pipe = child.stdout.take().expect("stdout is piped");
        let mut stderr_pipe = child.stderr.take().expect("stderr is piped");
        let out_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout_pipe.read_to_end(&mut buf);
            buf
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr_pipe.read_to_end(&mut buf);
            buf
        });
        let deadline = Instant::now() + self.wall_limit(job);
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(10)),
                Err(source) => {
                    return Err(SandboxError::Spawn {
                        program: program.clone(),
                        source,
                    })
                }
            }
        };
        let stdout = out_reader.join().unwrap_or_default();
        let stderr = String::from_utf8_lossy(&err_reader.join().unwrap_or_default())
            .trim()
            .to_string();
        let Some(status) = status else {
            return Err(SandboxError::SandboxCrash {
                status: format!("killed after {:.0}s", self.wall_limit(job).as_secs_f64()),
                stderr,
            });
        };
        if !status.success() {
            return Err(SandboxError::SandboxCrash {
                status: status.to_string(),
                stderr,
            });
        }
        let result: ExecutionResult =
            serde_json::from_slice(&stdout).map_err(|e| SandboxError::Protocol(e.to_string()))?;
        result.validate()?;
        Ok(result)
    }
}

/// Replays results stored as `<dir>/<suite sha256>.json`.
#[derive(Clone, Debug)]
pub struct RecordedExecutor {
    pub dir: PathBuf,
}

impl RecordedExecutor {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }
}

impl Executor for RecordedExecutor {
    fn execute(&self, job: &ExecutionJob, suite_sha256: &str) -> Result<ExecutionResult, SandboxError> {
        job.validate()?;
        let path = self.dir.join(format!("{suite_sha256}.json"));
        let bytes = std::fs::read(&path).map_err(|_| SandboxError::RecordingMissing {
            sha: suite_sha256.to_string(),
            dir: self.dir.display().to_string(),
        })?;
        let result: ExecutionResult =
            serde_json::from_slice(&bytes).map_err(|e| SandboxError::Protocol(format!("{}: {e}", path.display())))?;
        result.validate()?;
        Ok(result)
    }
}
