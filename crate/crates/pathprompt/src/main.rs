use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pathprompt::backend::RecordingBackend;
use pathprompt::config::Config;
use pathprompt::manifest::load_manifest;
use pathprompt::pipeline::{self, GenerateRequest, OutputManifest, PipelineError};
use pathprompt::sandbox::{Executor, RecordedExecutor, SandboxClient};
use pathprompt_core::generate::Strategy;
use pathprompt_core::paths::AnalysisOptions;
use pathprompt_core::prompt::PromptOptions;

#[derive(Parser)]
#[command(
    name = "pathprompt",
    version,
    about = "Path-constraint prompting for Python unit test generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct FocalArgs {
    /// Python source file.
    file: PathBuf,
    /// Function or `Class.method`, optionally module-qualified.
    name: String,
    /// Project root used to derive the module name (default: the file's directory).
    #[arg(long)]
    root: Option<PathBuf>,
}

impl FocalArgs {
    fn root(&self) -> PathBuf {
        match &self.root {
            Some(r) => r.clone(),
            None => self.file.parent().map(Path::to_path_buf).unwrap_or_default(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the collected and minimized execution paths as JSON.
    Analyze {
        #[command(flatten)]
        focal: FocalArgs,
        #[arg(long, default_value_t = 16)]
        max_paths: usize,
        /// Do not turn `raise` statements into terminal paths.
        #[arg(long)]
        no_raise_paths: bool,
    },
    /// Print the generation context and execution preamble as JSON.
    Context {
        #[command(flatten)]
        focal: FocalArgs,
        /// Token budget for the context.
        #[arg(long, default_value_t = 1536)]
        budget: usize,
    },
    /// Print the path prompts and the baseline prompt as JSONL.
    Prompts {
        #[command(flatten)]
        focal: FocalArgs,
        #[arg(long, default_value_t = 16)]
        max_paths: usize,
        /// Omit the `# raises:` line.
        #[arg(long)]
        no_raises_clause: bool,
    },
    /// Generate test suites for every focal method in a manifest.
    Generate {
        /// JSONL of {repo_root, file, qualified_name}.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Strategies to run (default: those in the config).
        #[arg(long, value_parser = parse_strategy, value_delimiter = ',')]
        strategy: Vec<Strategy>,
        /// Samples per focal method and strategy (default: from the config).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write every completion as a replay fixture.
        #[arg(long)]
        record_replay: Option<PathBuf>,
    },
    /// Execute generated suites through the sandbox protocol.
    Run {
        #[arg(long)]
        out: PathBuf,
        /// Sandbox command line (default: from the generation config).
        #[arg(long, num_args = 1.., allow_hyphen_values = true, conflicts_with = "recorded")]
        sandbox: Vec<String>,
        /// Directory of recorded results named `<suite sha256>.json`.
        #[arg(long)]
        recorded: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compute metrics from executed suites.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    Strategy::parse(s).ok_or_else(|| format!("unknown strategy `{s}` (expected noop, baseline or symprompt)"))
}

/// Writes to stdout; a closed pipe ends the process quietly.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("writing to stdout: {e}");
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    emit(&text);
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Analyze {
            focal,
            max_paths,
            no_raise_paths,
        } => {
            if max_paths == 0 {
                return Err(PipelineError::Usage("--max-paths must be at least 1".into()));
            }
            let (tree, method) = pipeline::load_focal(&focal.file, &focal.root(), &focal.name)?;
            let options = AnalysisOptions {
                max_paths,
                raise_paths: !no_raise_paths,
            };
            let (report, _) = pipeline::analyze(&tree, &method, &options)?;
            print_json(&report);
        }
        Command::Context { focal, budget } => {
            let (tree, method) = pipeline::load_focal(&focal.file, &focal.root(), &focal.name)?;
            print_json(&pipeline::context_report(&tree, &method, budget)?);
        }
        Command::Prompts {
            focal,
            max_paths,
            no_raises_clause,
        } => {
            if max_paths == 0 {
                return Err(PipelineError::Usage("--max-paths must be at least 1".into()));
            }
            let (tree, method) = pipeline::load_focal(&focal.file, &focal.root(), &focal.name)?;
            let options = AnalysisOptions {
                max_paths,
                ..AnalysisOptions::default()
            };
            let (_, paths) = pipeline::analyze(&tree, &method, &options)?;
            let prompt_options = PromptOptions {
                raises_clause: !no_raises_clause,
            };
            for record in pipeline::prompt_records(&method, &paths, prompt_options) {
                let mut line = serde_json::to_string(&record).expect("record serializes");
                line.push('\n');
                emit(&line);
            }
        }
        Command::Generate {
            manifest,
            config,
            out,
            strategy,
            samples,
            jobs,
            record_replay,
        } => {
            let config = Config::load(&config)?;
            let entries = load_manifest(&manifest)?;
            let base_dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
            let strategies = if strategy.is_empty() {
                config.generation.strategies.clone()
            } else {
                strategy
            };
            let samples = samples.unwrap_or(config.generation.samples);
            if samples == 0 {
                return Err(PipelineError::Usage("--samples must be at least 1".into()));
            }
            let backend = RecordingBackend::new(
                config
                    .backend
                    .build(&config.base_dir)
                    .map_err(|e| PipelineError::Usage(format!("backend: {e}")))?,
            );
            let request = GenerateRequest {
                entries: &entries,
                base_dir: &base_dir,
                config: &config,
                backend: &backend,
                strategies: &strategies,
                samples,
                out: &out,
                jobs,
            };
            let result = pipeline::generate(&request)?;
            if let Some(path) = record_replay {
                backend.write_fixture(&path).map_err(|source| PipelineError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
            summarize_generation(&result);
        }
        Command::Run {
            out,
            sandbox,
            recorded,
            jobs,
        } => {
            let executor: Box<dyn Executor> = match recorded {
                Some(dir) => Box::new(RecordedExecutor::new(&dir)),
                None if !sandbox.is_empty() => Box::new(SandboxClient::new(sandbox)),
                None => {
                    let manifest: OutputManifest = pipeline::read_json(&out.join(pipeline::MANIFEST_FILE))?;
                    Box::new(SandboxClient::new(manifest.execution.sandbox))
                }
            };
            let log = pipeline::run(&out, executor.as_ref(), jobs)?;
            eprintln!(
                "executed {} suites, {} already had results, {} failed",
                log.executed,
                log.cached,
                log.failures.len()
            );
            for f in &log.failures {
                eprintln!("  {}: {}", f.suite_file, f.error);
            }
        }
        Command::Report { out } => {
            let report = pipeline::report(&out)?;
            emit(&pathprompt_core::metrics::render_table(&report));
        }
    }
    Ok(())
}

fn summarize_generation(manifest: &OutputManifest) {
    eprintln!("wrote {} suites", manifest.suites.len());
    for f in &manifest.failures {
        let strategy = f.strategy.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        eprintln!("  failed {} [{}]: {}", f.focal, strategy, f.error);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
