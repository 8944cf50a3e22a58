//! Embedding providers.
//!
//! Two implementations stand behind one interface: a file-backed lookup of
//! precomputed per-token vectors, and a seeded pseudo-embedding that expands
//! a stable hash of the token into `d` values in [-1, 1]. The pseudo provider
//! keeps desk-scale experiments self-contained; the file-backed provider
//! accepts real vectors when available.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{EdaError, Result};
use crate::rng;

/// Serializable description of a provider, stored in checkpoints so a
/// reloaded model reproduces its predictions exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ProviderSpec {
    Pseudo { seed: u64, dim: usize },
    File { path: PathBuf, dim: usize },
}

/// Token-to-vector provider. Same token, same vector, always.
#[derive(Debug, Clone)]
pub enum EmbeddingProvider {
    Pseudo {
        seed: u64,
        dim: usize,
    },
    FileBacked {
        path: PathBuf,
        dim: usize,
        table: HashMap<String, Vec<f64>>,
        unk: Vec<f64>,
    },
}

/// Token whose file-backed vector stands in for unknown tokens.
pub const UNK_TOKEN: &str = "<unk>";

impl EmbeddingProvider {
    pub fn pseudo(seed: u64, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        EmbeddingProvider::Pseudo { seed, dim }
    }

    /// Load a file-backed provider. Format: header line `d=<int>`, then one
    /// `token<TAB>v1 v2 ... vd` line per token, UTF-8. A `<unk>` row, when
    /// present, becomes the unknown-token vector; otherwise zeros are used.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EdaError::io(path.display().to_string(), e))?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| EdaError::MalformedLine {
            line: 1,
            message: "empty embedding file".into(),
        })?;
        let dim: usize = header
            .strip_prefix("d=")
            .and_then(|d| d.trim().parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| EdaError::MalformedLine {
                line: 1,
                message: format!("expected header \"d=<int>\", found {header:?}"),
            })?;
        let mut table = HashMap::new();
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (token, rest) = line.split_once('\t').ok_or_else(|| EdaError::MalformedLine {
                line: lineno,
                message: "expected token<TAB>values".into(),
            })?;
            let values: Vec<f64> = rest
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| EdaError::MalformedLine {
                    line: lineno,
                    message: format!("bad vector component: {e}"),
                })?;
            if values.len() != dim {
                return Err(EdaError::DimensionMismatch {
                    context: format!("embedding for {token:?} (line {lineno})"),
                    expected: dim,
                    found: values.len(),
                });
            }
            table.insert(token.to_string(), values);
        }
        let unk = table.get(UNK_TOKEN).cloned().unwrap_or_else(|| vec![0.0; dim]);
        Ok(EmbeddingProvider::FileBacked {
            path: path.to_path_buf(),
            dim,
            table,
            unk,
        })
    }

    pub fn from_spec(spec: &ProviderSpec) -> Result<Self> {
        match spec {
            ProviderSpec::Pseudo { seed, dim } => Ok(EmbeddingProvider::pseudo(*seed, *dim)),
            ProviderSpec::File { path, dim } => {
                let provider = EmbeddingProvider::from_file(path)?;
                if provider.dim() != *dim {
                    return Err(EdaError::DimensionMismatch {
                        context: format!("embedding file {}", path.display()),
                        expected: *dim,
                        found: provider.dim(),
                    });
                }
                Ok(provider)
            }
        }
    }

    pub fn spec(&self) -> ProviderSpec {
        match self {
            EmbeddingProvider::Pseudo { seed, dim } => ProviderSpec::Pseudo {
                seed: *seed,
                dim: *dim,
            },
            EmbeddingProvider::FileBacked { path, dim, .. } => ProviderSpec::File {
                path: path.clone(),
                dim: *dim,
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbeddingProvider::Pseudo { dim, .. } => *dim,
            EmbeddingProvider::FileBacked { dim, .. } => *dim,
        }
    }

    /// Vector for one token.
    pub fn embed(&self, token: &str) -> Vec<f64> {
        match self {
            EmbeddingProvider::Pseudo { seed, dim } => pseudo_vector(*seed, *dim, token),
            EmbeddingProvider::FileBacked { table, unk, .. } => {
                table.get(token).unwrap_or(unk).clone()
            }
        }
    }
}

fn pseudo_vector(seed: u64, dim: usize, token: &str) -> Vec<f64> {
    let mut stream = rng::seeded(seed ^ rng::fnv1a(token.as_bytes()));
    (0..dim).map(|_| rng::uniform(&mut stream, -1.0, 1.0)).collect()
}

/// Embed a token sequence; output length equals input length.
pub fn embed_tokens(provider: &EmbeddingProvider, tokens: &[String]) -> Vec<Vec<f64>> {
    tokens.iter().map(|t| provider.embed(t)).collect()
}
