use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CfnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CfnError {
    #[error(transparent)]
    Core(#[from] cfn_core::Error),
    #[error("newick syntax error at byte {pos}: {msg}")]
    Newick { pos: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("bad input: {0}")]
    Input(String),
}

impl CfnError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CfnError::Io {
            path: path.into(),
            source,
        }
    }
}
