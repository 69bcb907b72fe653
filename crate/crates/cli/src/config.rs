use std::path::{Path, PathBuf};

use serde::Deserialize;

/// Keys of a `--config` file. Names match the long flags with `-` written as `_`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub scenario: Option<String>,
    pub sampler: Option<String>,
    pub sizes: Option<OneOrMany<usize>>,
    pub delta: Option<OneOrMany<f64>>,
    pub families: Option<OneOrMany<String>>,
    pub no_ki: Option<bool>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub test_size: Option<usize>,
    pub validation_t: Option<usize>,
    pub truncation: Option<f64>,
    pub quad_degree: Option<usize>,
    pub design_dir: Option<PathBuf>,
    pub timing: Option<bool>,
    pub dump_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub kernel: Option<String>,
    pub support: Option<f64>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub value_column: Option<String>,
    pub clamp_zero: Option<bool>,
    pub folds: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

pub fn load(path: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}
