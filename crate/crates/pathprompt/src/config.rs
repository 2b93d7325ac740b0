//! TOML run configuration.

use std::path::{Path, PathBuf};

use pathprompt_core::generate::{GenerationConfig, Strategy};
use pathprompt_core::llm::DEFAULT_STOP_SEQUENCES;
use pathprompt_core::prompt::{PromptOptions, TEMPLATE_VERSION};
use serde::{Deserialize, Serialize};

use crate::backend::BackendConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("config asks for template version {found:?} but this build renders version {TEMPLATE_VERSION:?}")]
    TemplateVersion { found: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub backend: BackendConfig,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub execution: ExecutionSection,
    /// Directory of the config file; relative paths inside it resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub samples: usize,
    pub max_paths: usize,
    /// Estimated-token budget for the generation context.
    pub context_budget: usize,
    /// Model window; chained tests are dropped to keep prompt plus output inside it.
    pub context_window: usize,
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub stop_sequences: Vec<String>,
    pub template_version: String,
    /// Render `# raises:` lines for raising paths. Off gives the plain template.
    pub raises_clause: bool,
    pub strategies: Vec<Strategy>,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self {
            samples: 10,
            max_paths: 16,
            context_budget: 1536,
            context_window: 2048,
            max_tokens: 256,
            temperature: 0.8,
            seed: None,
            stop_sequences: DEFAULT_STOP_SEQUENCES.iter().map(|s| s.to_string()).collect(),
            template_version: TEMPLATE_VERSION.to_string(),
            raises_clause: true,
            strategies: Strategy::ALL.to_vec(),
        }
    }
}

impl GenerationSection {
    pub fn generation_config(&self) -> GenerationConfig {
        GenerationConfig {
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            stop_sequences: self.stop_sequences.clone(),
            seed: self.seed,
            context_window: Some(self.context_window),
            prompt: PromptOptions {
                raises_clause: self.raises_clause,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionSection {
    /// Sandbox command line; the job is written to its stdin.
    pub sandbox: Vec<String>,
    /// Per-test timeout in seconds.
    pub timeout: f64,
    pub suite_timeout: f64,
}

impl Default for ExecutionSection {
    fn default() -> Self {
        Self {
            sandbox: vec!["pathprompt-sandbox".to_string()],
            timeout: 10.0,
            suite_timeout: 120.0,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, base_dir: &Path, shown: &str) -> Result<Self, ConfigError> {
        let mut config: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: shown.to_string(),
            source,
        })?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base, &shown)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.generation;
        if g.template_version != TEMPLATE_VERSION {
            return Err(ConfigError::TemplateVersion {
                found: g.template_version.clone(),
            });
        }
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if g.samples == 0 {
            return invalid("generation.samples must be at least 1");
        }
        if g.max_paths == 0 {
            return invalid("generation.max_paths must be at least 1");
        }
        if g.max_tokens == 0 {
            return invalid("generation.max_tokens must be at least 1");
        }
        if g.temperature.is_nan() || g.temperature < 0.0 {
            return invalid("generation.temperature must be >= 0");
        }
        if g.strategies.is_empty() {
            return invalid("generation.strategies is empty");
        }
        let e = &self.execution;
        if [e.timeout, e.suite_timeout].iter().any(|t| t.is_nan() || *t <= 0.0) {
            return invalid("execution timeouts must be positive");
        }
        if e.sandbox.is_empty() {
            return invalid("execution.sandbox is empty");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = Config::from_toml(
            "[backend]\nkind = \"replay\"\nfixture = \"r.jsonl\"\n",
            Path::new("/cfg"),
            "c",
        )
        .unwrap();
        assert_eq!(c.generation.samples, 10);
        assert_eq!(c.generation.max_paths, 16);
        assert_eq!(c.generation.temperature, 0.8);
        assert_eq!(c.execution.timeout, 10.0);
        assert_eq!(c.execution.suite_timeout, 120.0);
        assert_eq!(c.base_dir, Path::new("/cfg"));
        assert!(c.generation.generation_config().prompt.raises_clause);
    }

    #[test]
    fn http_backend_without_raises_clause() {
        let text = r#"
[backend]
kind = "http-chat"
base_url = "http://localhost:8000/v1"
model = "m"
api_key_env = "KEY"

[generation]
samples = 2
raises_clause = false
strategies = ["symprompt"]
"#;
        let c = Config::from_toml(text, Path::new("."), "c").unwrap();
        assert!(matches!(c.backend, BackendConfig::HttpChat { .. }));
        assert!(!c.generation.generation_config().prompt.raises_clause);
        assert_eq!(c.generation.strategies, vec![Strategy::Symprompt]);
    }

    #[test]
    fn rejects_bad_values() {
        let base = "[backend]\nkind = \"replay\"\nfixture = \"r\"\n";
        for extra in [
            "[generation]\ntemplate_version = \"0\"\n",
            "[generation]\nsamples = 0\n",
            "[generation]\ntemperature = -1.0\n",
            "[execution]\ntimeout = 0.0\n",
            "[generation]\nunknown_key = 1\n",
        ] {
            assert!(
                Config::from_toml(&format!("{base}{extra}"), Path::new("."), "c").is_err(),
                "{extra}"
            );
        }
    }
}
