//! Benchmark manifests: one JSON object per line naming a focal method.

use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub repo_root: PathBuf,
    /// Path of the source file, relative to `repo_root` unless absolute.
    pub file: PathBuf,
    /// Dotted name; the module prefix may be omitted.
    pub qualified_name: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Malformed {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("manifest {0} names no focal methods")]
    Empty(String),
}

impl ManifestEntry {
    /// Resolved file path; relative roots resolve against `base_dir`.
    pub fn file_path(&self, base_dir: &Path) -> PathBuf {
        self.root(base_dir).join(&self.file)
    }

    pub fn root(&self, base_dir: &Path) -> PathBuf {
        base_dir.join(&self.repo_root)
    }

    pub fn module(&self, base_dir: &Path) -> String {
        module_name(&self.root(base_dir), &self.file_path(base_dir))
    }

    pub fn full_name(&self, base_dir: &Path) -> String {
        qualify(&self.module(base_dir), &self.qualified_name)
    }
}

/// Parses JSONL text; blank lines are skipped.
pub fn parse_manifest(text: &str, shown: &str) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(line).map_err(|source| ManifestError::Malformed {
            path: shown.to_string(),
            line: i + 1,
            source,
        })?);
    }
    if entries.is_empty() {
        return Err(ManifestError::Empty(shown.to_string()));
    }
    Ok(entries)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: shown.clone(),
        source,
    })?;
    parse_manifest(&text, &shown)
}

/// Dotted module name of `file` relative to `root`. Files outside the root
/// map to their stem; `pkg/__init__.py` maps to `pkg`.
pub fn module_name(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).ok().filter(|r| !r.as_os_str().is_empty());
    let mut parts: Vec<String> = match rel {
        Some(rel) => rel
            .components()
            .filter_map(|c| match c {
                Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
                _ => None,
            })
            .collect(),
        None => file
            .file_name()
            .map(|s| vec![s.to_string_lossy().into_owned()])
            .unwrap_or_default(),
    };
    if let Some(last) = parts.last_mut() {
        if let Some(stem) = last.strip_suffix(".py") {
            *last = stem.to_string();
        }
    }
    if parts.len() > 1 && parts.last().map(String::as_str) == Some("__init__") {
        parts.pop();
    }
    parts.join(".")
}

/// Prefixes `name` with `module` unless it already starts with it.
pub fn qualify(module: &str, name: &str) -> String {
    if module.is_empty() || name == module || name.starts_with(&format!("{module}.")) {
        name.to_string()
    } else {
        format!("{module}.{name}")
    }
}
