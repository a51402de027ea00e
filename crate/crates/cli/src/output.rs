//! Output artifacts. Every file is written to a temporary sibling and then
//! renamed into place, so a crashed or parallel run never leaves a partial
//! file behind; every artifact carries the resolved configuration.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sldsgcn::analysis::BucketStats;
use sldsgcn::checkpoint::CheckpointMeta;
use sldsgcn::config::RunConfig;
use sldsgcn::pipeline::{RunMetrics, Variant, METRICS_SCHEMA_VERSION};
use sldsgcn::stats::Summary;

use crate::{CliError, CliResult};

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Data(sldsgcn::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| io_error(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// CSV with the configuration echoed as leading `#` comment lines.
pub fn write_csv(path: &Path, config: &RunConfig, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> CliResult<()> {
    let mut body = Vec::new();
    for line in config.to_toml_string()?.lines() {
        body.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    write(&mut body).map_err(|e| io_error(path, e))?;
    write_atomic(path, &body)
}

/// One seed's metrics.
#[derive(Serialize)]
pub struct SeedDocument<'a> {
    pub schema_version: u32,
    pub config: &'a RunConfig,
    pub metrics: &'a RunMetrics,
}

impl<'a> SeedDocument<'a> {
    pub fn new(config: &'a RunConfig, metrics: &'a RunMetrics) -> Self {
        SeedDocument {
            schema_version: METRICS_SCHEMA_VERSION,
            config,
            metrics,
        }
    }
}

#[derive(Serialize)]
pub struct SeedAccuracy {
    pub seed: u64,
    pub accuracy: f64,
}

/// Mean and spread over the seeds of one variant.
#[derive(Serialize)]
pub struct SummaryDocument<'a> {
    pub schema_version: u32,
    pub config: &'a RunConfig,
    pub variant: Variant,
    pub label_rate: f64,
    pub accuracy: Summary,
    pub per_seed: Vec<SeedAccuracy>,
}

impl<'a> SummaryDocument<'a> {
    pub fn new(config: &'a RunConfig, variant: Variant, label_rate: f64, runs: &[RunMetrics]) -> Self {
        let acc: Vec<f64> = runs.iter().map(|m| m.accuracy).collect();
        SummaryDocument {
            schema_version: METRICS_SCHEMA_VERSION,
            config,
            variant,
            label_rate,
            accuracy: Summary::of(&acc),
            per_seed: runs
                .iter()
                .map(|m| SeedAccuracy {
                    seed: m.seed,
                    accuracy: m.accuracy,
                })
                .collect(),
        }
    }
}

/// Result of re-evaluating a checkpoint.
#[derive(Serialize)]
pub struct EvaluationDocument<'a> {
    pub schema_version: u32,
    pub checkpoint: &'a CheckpointMeta,
    pub dataset: String,
    pub accuracy: f64,
    pub buckets: &'a [BucketStats],
}
