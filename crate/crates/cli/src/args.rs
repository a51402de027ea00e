use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sldsgcn::config::RunConfig;
use sldsgcn::pipeline::Variant;
use toml::{Table, Value};

use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "sldsgcn", version, about = "Degree-specific GCNs with self-supervised soft labels")]
pub struct Cli {
    /// Seeds (or runs) trained in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset directory (edges.csv, features.csv, labels.csv)
    /// and write a normalised copy.
    Ingest { src: PathBuf, dst: PathBuf },
    /// Write degree-bias diagnostics as CSV files under `<output_dir>/profile`.
    Profile(ProfileArgs),
    /// Train one variant over every seed; writes per-seed metrics JSON,
    /// checkpoints and an aggregate summary.
    Train(ConfigArgs),
    /// Train every variant on shared seeds and write a comparison table.
    Ablate(AblateArgs),
    /// Re-evaluate a checkpoint on its own split.
    Evaluate(EvaluateArgs),
}

/// A TOML config file plus flag overrides; flags win over the file.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML run configuration. Omitted keys take their defaults.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub label_rate: Option<f64>,
    #[arg(long)]
    pub test_frac: Option<f64>,
    /// Comma-separated seeds, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Override any config key by dotted path, e.g. `training.alpha=0.5` or
    /// `training.teacher.samples=128`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Trained checkpoint for the error-by-degree report; without one a
    /// GCN baseline is trained on the first seed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Compute influence scores on a snowball subsample of this many nodes,
    /// all treated as labeled, instead of on the full graph.
    #[arg(long)]
    pub subsample: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Label rates to compare; defaults to the configured one.
    #[arg(long, value_delimiter = ',')]
    pub label_rates: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub checkpoint: PathBuf,
    /// Dataset directory; defaults to the one recorded in the checkpoint.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: sldsgcn::Error| e.to_string())
}

impl ConfigArgs {
    /// Merges file, flags and `--set` overrides, then validates the result
    /// as a whole so unknown keys and out-of-range values are rejected.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut table = match &self.config {
            Some(path) => read_table(path)?,
            None => Table::new(),
        };
        let path_value = |p: &Path| Value::String(p.to_string_lossy().into_owned());
        if let Some(d) = &self.dataset {
            table.insert("dataset".into(), path_value(d));
        }
        if let Some(v) = self.variant {
            table.insert("variant".into(), Value::String(v.name().into()));
        }
        if let Some(r) = self.label_rate {
            table.insert("label_rate".into(), Value::Float(r));
        }
        if let Some(t) = self.test_frac {
            table.insert("test_frac".into(), Value::Float(t));
        }
        if let Some(seeds) = &self.seeds {
            let seeds = seeds
                .iter()
                .map(|&s| i64::try_from(s).map(Value::Integer))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Usage("seeds must fit in a signed 64-bit integer".into()))?;
            table.insert("seeds".into(), Value::Array(seeds));
        }
        if let Some(o) = &self.output_dir {
            table.insert("output_dir".into(), path_value(o));
        }
        for kv in &self.overrides {
            apply_override(&mut table, kv)?;
        }
        let text = toml::to_string(&table).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        Ok(RunConfig::from_toml_str(&text)?)
    }
}

fn read_table(path: &Path) -> CliResult<Table> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        CliError::Data(sldsgcn::Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    text.parse::<Table>().map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Sets `a.b.c=value` in `table`. The value is read as a TOML literal, or
/// as a bare string when it is not one.
fn apply_override(table: &mut Table, kv: &str) -> CliResult<()> {
    let (key, raw) = kv
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("malformed key {key:?}")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = table;
    for p in parents {
        let entry = node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("{key}: {p} is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
