//! Run configuration shared by the subcommands, with a stable JSON form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mcb_core::engine::DEFAULT_N_CAP;
use mcb_core::{BatchSchedule, BucketSet, EngineConfig, Method};

use crate::error::McbError;

/// Everything a seeded run needs. The JSON form round-trips exactly:
/// `serde_json::from_str(&serde_json::to_string(&c)?)? == c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Named family (`single`, `J0`, `Jstar`, `Js`) or a JSON file path.
    pub buckets: String,
    pub method: Method,
    /// Total risk budget for the reported bucket.
    pub eps: f64,
    /// Spending shape for the boundary method.
    pub spending_k: f64,
    /// First evaluation after this many samples.
    pub batch_initial: u64,
    /// Geometric growth factor between evaluations.
    pub batch_growth: f64,
    pub seed: u64,
    pub n_cap: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            buckets: "Jstar".into(),
            method: Method::Simctest,
            eps: 1e-3,
            spending_k: 1000.0,
            batch_initial: 10,
            batch_growth: 1.1,
            seed: 0,
            n_cap: DEFAULT_N_CAP,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, McbError> {
        let text = fs::read_to_string(path).map_err(|e| McbError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn bucket_set(&self) -> Result<BucketSet, McbError> {
        parse_bucket_spec(&self.buckets)
    }

    pub fn engine_config(&self) -> Result<EngineConfig, McbError> {
        let batch = BatchSchedule::new(self.batch_initial, self.batch_growth)?;
        Ok(EngineConfig {
            method: self.method,
            eps: self.eps,
            spending_k: self.spending_k,
            batch,
            n_cap: self.n_cap,
        })
    }
}

/// A named family, or a path to a JSON `{"name": ..., "buckets": [...]}`
/// file, validated on load.
pub fn parse_bucket_spec(spec: &str) -> Result<BucketSet, McbError> {
    match spec.to_ascii_lowercase().as_str() {
        "single" => return Ok(BucketSet::single()),
        "j0" => return Ok(BucketSet::j0()),
        "jstar" | "j*" => return Ok(BucketSet::jstar()),
        "js" => return Ok(BucketSet::js()),
        _ => {}
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(McbError::BucketSpec(spec.into()));
    }
    let text = fs::read_to_string(path).map_err(|e| McbError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
