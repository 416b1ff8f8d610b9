use std::path::PathBuf;

use mcb_core::analysis::AnalysisError;
use mcb_core::buckets::BucketError;
use mcb_core::engine::EngineError;
use mcb_core::simctest::SimctestError;

#[derive(Debug, thiserror::Error)]
pub enum McbError {
    #[error(transparent)]
    Bucket(#[from] BucketError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Simctest(#[from] SimctestError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unknown bucket family {0:?} (expected single, J0, Jstar, Js, or a JSON file path)")]
    BucketSpec(String),
    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
}

impl McbError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
