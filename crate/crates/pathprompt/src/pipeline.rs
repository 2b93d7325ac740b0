//! analyze → generate → run → report, over files on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pathprompt_core::context::{
    build_execution_context, build_generation_context, CharRatioEstimator, ContextError, ExecutionContext, FocalContext,
};
use pathprompt_core::exec::{ExecutionJob, FocalTarget, PROTOCOL_VERSION};
use pathprompt_core::generate::{GenerationError, Generator, Strategy, TestSuite};
use pathprompt_core::llm::CompletionBackend;
use pathprompt_core::metrics::{compute_metrics, render_table, MetricsReport, SuiteOutcome};
use pathprompt_core::paths::{
    collect_path_constraints, AnalysisError, AnalysisOptions, Constraint, ExecutionPath, PathKind, UnsupportedConstruct,
};
use pathprompt_core::prompt::{
    render_baseline_prompt, render_path_prompt, PromptOptions, PromptRecord, TEMPLATE_VERSION,
};
use pathprompt_core::syntax::{locate_focal_method, FocalMethod, LocateError, SyntaxTree};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::sha256_hex;
use crate::config::{Config, ConfigError, ExecutionSection};
use crate::manifest::{module_name, qualify, ManifestEntry, ManifestError};
use crate::parser::{parse_file, ParseError, PythonParser};
use crate::sandbox::{Executor, SandboxError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{name}: {source}")]
    Locate {
        name: String,
        #[source]
        source: LocateError,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl PipelineError {
    /// 2 for problems with what the user supplied, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Locate { .. }
            | PipelineError::Parse(_)
            | PipelineError::Analysis(_)
            | PipelineError::Context(_)
            | PipelineError::Config(_)
            | PipelineError::Manifest(_)
            | PipelineError::Usage(_)
            | PipelineError::Sandbox(SandboxError::Missing { .. }) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| PipelineError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Parses `file` and finds `name`, prefixing it with the module derived from
/// `root` when needed.
pub fn load_focal(file: &Path, root: &Path, name: &str) -> Result<(SyntaxTree, FocalMethod), PipelineError> {
    let tree = parse_file(file)?;
    let qualified = qualify(&module_name(root, file), name);
    let focal = locate_focal_method(&tree, &qualified).map_err(|source| PipelineError::Locate {
        name: qualified.clone(),
        source,
    })?;
    Ok((tree, focal))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocalSummary {
    pub qualified_name: String,
    pub module: String,
    pub display_name: String,
    pub enclosing_class: Option<String>,
    pub signature: String,
    pub params: String,
    pub lines: (usize, usize),
}

impl From<&FocalMethod> for FocalSummary {
    fn from(f: &FocalMethod) -> Self {
        Self {
            qualified_name: f.qualified_name.clone(),
            module: f.module.clone(),
            display_name: f.display_name(),
            enclosing_class: f.enclosing_class.clone(),
            signature: f.signature.clone(),
            params: f.params.clone(),
            lines: f.lines,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathView {
    /// Constraints joined with `and`; absent for unconstrained paths.
    pub condition: Option<String>,
    pub constraints: Vec<Constraint>,
    pub kind: PathKind,
    pub return_expr: Option<String>,
}

impl From<&ExecutionPath> for PathView {
    fn from(p: &ExecutionPath) -> Self {
        Self {
            condition: p.condition(),
            constraints: p.constraints.clone(),
            kind: p.kind,
            return_expr: p.return_expr.clone(),
        }
    }
}

/// Output of the `analyze` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub focal: FocalSummary,
    pub max_paths: usize,
    pub truncated: bool,
    pub collected_paths: Vec<PathView>,
    pub paths: Vec<PathView>,
    pub unsupported: Vec<UnsupportedConstruct>,
}

pub fn analyze(
    tree: &SyntaxTree,
    focal: &FocalMethod,
    options: &AnalysisOptions,
) -> Result<(AnalysisReport, Vec<ExecutionPath>), PipelineError> {
    let analysis = collect_path_constraints(tree, focal, options)?;
    let report = AnalysisReport {
        focal: focal.into(),
        max_paths: options.max_paths,
        truncated: analysis.truncated,
        collected_paths: analysis.collected.iter().map(PathView::from).collect(),
        paths: analysis.paths.iter().map(PathView::from).collect(),
        unsupported: analysis.unsupported,
    };
    Ok((report, analysis.paths))
}

/// Output of the `context` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextReport {
    pub focal: FocalSummary,
    pub context: FocalContext,
    pub rendered: String,
    pub execution: ExecutionContext,
}

pub fn context_report(tree: &SyntaxTree, focal: &FocalMethod, budget: usize) -> Result<ContextReport, PipelineError> {
    let context = build_generation_context(tree, focal, budget, &CharRatioEstimator::default())?;
    Ok(ContextReport {
        focal: focal.into(),
        rendered: context.render(),
        execution: build_execution_context(&context),
        context,
    })
}

/// First-order prompts for every minimized path, then the baseline prompt.
pub fn prompt_records(focal: &FocalMethod, paths: &[ExecutionPath], options: PromptOptions) -> Vec<PromptRecord> {
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| PromptRecord::new(focal, &render_path_prompt(focal, p, i + 1, options)))
        .chain(std::iter::once(PromptRecord::new(
            focal,
            &render_baseline_prompt(focal),
        )))
        .collect()
}

/// One generated suite as listed in the output manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRecord {
    pub focal: String,
    pub strategy: Strategy,
    pub sample: usize,
    /// Relative to the output directory.
    pub suite_file: String,
    pub sidecar_file: String,
    pub suite_sha256: String,
    pub target: FocalTarget,
    pub python_path: Vec<String>,
    pub test_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub focal: String,
    pub strategy: Option<Strategy>,
    pub sample: Option<usize>,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputManifest {
    pub template_version: String,
    pub protocol_version: u32,
    pub execution: ExecutionSection,
    pub suites: Vec<SuiteRecord>,
    pub failures: Vec<FailureRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const RESULTS_DIR: &str = "results";
pub const RUN_LOG_FILE: &str = "run.json";

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct PromptLine {
    strategy: Strategy,
    sample: usize,
    #[serde(flatten)]
    record: PromptRecord,
}

#[derive(Default)]
struct FocalOutcome {
    suites: Vec<SuiteRecord>,
    failures: Vec<FailureRecord>,
    prompts: Vec<PromptLine>,
}

pub struct GenerateRequest<'a> {
    pub entries: &'a [ManifestEntry],
    /// Directory manifest paths are relative to.
    pub base_dir: &'a Path,
    pub config: &'a Config,
    pub backend: &'a (dyn CompletionBackend + Sync),
    pub strategies: &'a [Strategy],
    pub samples: usize,
    pub out: &'a Path,
    pub jobs: usize,
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Usage(format!("cannot start worker pool: {e}")))
}

fn absolute(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

impl GenerateRequest<'_> {
    fn focal(&self, entry: &ManifestEntry) -> FocalOutcome {
        let name = entry.full_name(self.base_dir);
        let mut outcome = FocalOutcome::default();
        let fail = |strategy, sample, error: String| FailureRecord {
            focal: name.clone(),
            strategy,
            sample,
            error,
        };
        let root = entry.root(self.base_dir);
        let file = entry.file_path(self.base_dir);
        let prepared = load_focal(&file, &root, &entry.qualified_name).and_then(|(tree, focal)| {
            let g = &self.config.generation;
            let options = AnalysisOptions {
                max_paths: g.max_paths,
                ..AnalysisOptions::default()
            };
            let (_, paths) = analyze(&tree, &focal, &options)?;
            let ctx = build_generation_context(&tree, &focal, g.context_budget, &CharRatioEstimator::default())?;
            Ok((focal, paths, ctx))
        });
        let (focal, paths, ctx) = match prepared {
            Ok(p) => p,
            Err(e) => {
                outcome.failures.push(fail(None, None, e.to_string()));
                return outcome;
            }
        };
        let gen_config = self.config.generation.generation_config();
        let generator = Generator {
            parser: &PythonParser,
            backend: self.backend,
            estimator: &CharRatioEstimator::default(),
            config: &gen_config,
        };
        let target = FocalTarget {
            module_path: absolute(&file).display().to_string(),
            module: focal.module.clone(),
            qualified_name: focal.qualified_name.clone(),
            line_span: focal.lines,
        };
        let python_path = vec![absolute(&root).display().to_string()];
        for &strategy in self.strategies {
            // The No-Op suite is the same for every sample.
            let samples = if strategy == Strategy::Noop { 1 } else { self.samples };
            for sample in 0..samples {
                match generator.generate_suite(strategy, &ctx, &focal, &paths, sample) {
                    Ok(suite) => match self.write_suite(&suite, &target, &python_path) {
                        Ok(record) => {
                            outcome.prompts.extend(suite.tests.iter().map(|t| PromptLine {
                                strategy,
                                sample,
                                record: PromptRecord::new(&focal, &t.prompt),
                            }));
                            outcome.suites.push(record);
                        }
                        Err(e) => outcome.failures.push(fail(Some(strategy), Some(sample), e.to_string())),
                    },
                    Err(e) => {
                        outcome.failures.push(fail(Some(strategy), Some(sample), e.to_string()));
                        break;
                    }
                }
            }
        }
        outcome
    }

    fn write_suite(
        &self,
        suite: &TestSuite,
        target: &FocalTarget,
        python_path: &[String],
    ) -> Result<SuiteRecord, PipelineError> {
        let stem = format!(
            "test_{}__{}__s{}",
            slug(&suite.focal.qualified_name),
            suite.strategy,
            suite.sample
        );
        let suite_file = format!("suites/{stem}.py");
        let sidecar_file = format!("suites/{stem}.json");
        let text = suite.render_file();
        write_text(&self.out.join(&suite_file), &text)?;
        write_json(&self.out.join(&sidecar_file), suite)?;
        Ok(SuiteRecord {
            focal: suite.focal.qualified_name.clone(),
            strategy: suite.strategy,
            sample: suite.sample,
            suite_file,
            sidecar_file,
            suite_sha256: sha256_hex(text.as_bytes()),
            target: target.clone(),
            python_path: python_path.to_vec(),
            test_count: suite.tests.iter().filter(|t| !t.is_empty()).count(),
        })
    }
}

/// Generates all suites and writes the output manifest and prompt log.
pub fn generate(req: &GenerateRequest<'_>) -> Result<OutputManifest, PipelineError> {
    let pool = thread_pool(req.jobs)?;
    let total = req.entries.len();
    let outcomes: Vec<FocalOutcome> = pool.install(|| {
        req.entries
            .par_iter()
            .enumerate()
            .map(|(i, entry)| {
                let outcome = req.focal(entry);
                eprintln!(
                    "[{}/{}] {}: {} suites, {} failures",
                    i + 1,
                    total,
                    entry.full_name(req.base_dir),
                    outcome.suites.len(),
                    outcome.failures.len()
                );
                outcome
            })
            .collect()
    });
    let mut manifest = OutputManifest {
        template_version: TEMPLATE_VERSION.to_string(),
        protocol_version: PROTOCOL_VERSION,
        execution: req.config.execution.clone(),
        suites: Vec::new(),
        failures: Vec::new(),
    };
    let mut prompts = String::new();
    for outcome in outcomes {
        manifest.suites.extend(outcome.suites);
        manifest.failures.extend(outcome.failures);
        for line in outcome.prompts {
            prompts.push_str(&serde_json::to_string(&line).expect("prompt serializes"));
            prompts.push('\n');
        }
    }
    write_text(&req.out.join(PROMPTS_FILE), &prompts)?;
    write_json(&req.out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub executed: usize,
    /// Suites whose result already existed.
    pub cached: usize,
    pub failures: Vec<RunFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub suite_file: String,
    pub error: String,
}

pub fn result_path(out: &Path, suite_sha256: &str) -> PathBuf {
    out.join(RESULTS_DIR).join(format!("{suite_sha256}.json"))
}

/// Executes every distinct suite in the output manifest that has no stored
/// result yet. Results are stored under the suite's content hash.
pub fn run(out: &Path, executor: &dyn Executor, jobs: usize) -> Result<RunLog, PipelineError> {
    let manifest: OutputManifest = read_json(&out.join(MANIFEST_FILE))?;
    let pool = thread_pool(jobs)?;
    // Identical suites share a content hash and run once.
    let mut seen = std::collections::BTreeSet::new();
    let unique: Vec<&SuiteRecord> = manifest
        .suites
        .iter()
        .filter(|r| seen.insert(&r.suite_sha256))
        .collect();
    let outcomes: Vec<Result<bool, (RunFailure, Option<SandboxError>)>> = pool.install(|| {
        unique
            .par_iter()
            .map(|record| {
                let dest = result_path(out, &record.suite_sha256);
                if dest.exists() {
                    return Ok(false);
                }
                let failure = |e: String| RunFailure {
                    suite_file: record.suite_file.clone(),
                    error: e,
                };
                let job = ExecutionJob {
                    protocol_version: PROTOCOL_VERSION,
                    suite_file: absolute(&out.join(&record.suite_file)).display().to_string(),
                    focal: record.target.clone(),
                    timeout: manifest.execution.timeout,
                    suite_timeout: manifest.execution.suite_timeout,
                    python_path: record.python_path.clone(),
                };
                let result = executor.execute(&job, &record.suite_sha256).map_err(|e| match e {
                    SandboxError::Missing { .. } => (failure(e.to_string()), Some(e)),
                    e => (failure(e.to_string()), None),
                })?;
                write_json(&dest, &result).map_err(|e| (failure(e.to_string()), None))?;
                eprintln!("ran {}", record.suite_file);
                Ok(true)
            })
            .collect()
    });
    let mut log = RunLog::default();
    for outcome in outcomes {
        match outcome {
            Ok(true) => log.executed += 1,
            Ok(false) => log.cached += 1,
            // Every other suite would fail the same way.
            Err((_, Some(missing))) => return Err(missing.into()),
            Err((f, None)) => log.failures.push(f),
        }
    }
    write_json(&out.join(RUN_LOG_FILE), &log)?;
    Ok(log)
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";

/// Scores every suite that has a stored result and writes the report files.
pub fn report(out: &Path) -> Result<MetricsReport, PipelineError> {
    let manifest: OutputManifest = read_json(&out.join(MANIFEST_FILE))?;
    let mut outcomes = Vec::new();
    let mut missing: BTreeMap<Strategy, usize> = BTreeMap::new();
    for record in &manifest.suites {
        let path = result_path(out, &record.suite_sha256);
        if !path.exists() {
            *missing.entry(record.strategy).or_default() += 1;
            continue;
        }
        outcomes.push(SuiteOutcome {
            focal: record.focal.clone(),
            strategy: record.strategy,
            sample: record.sample,
            result: read_json(&path)?,
        });
    }
    let mut report = compute_metrics(&outcomes);
    for (strategy, count) in missing {
        report.notes.push(format!(
            "{count} {strategy} suites have no execution result and are excluded"
        ));
    }
    if !manifest.failures.is_empty() {
        report.notes.push(format!(
            "{} generation failures are listed in {MANIFEST_FILE}",
            manifest.failures.len()
        ));
    }
    write_json(&out.join(REPORT_JSON), &report)?;
    write_text(&out.join(REPORT_TXT), &render_table(&report))?;
    Ok(report)
}
