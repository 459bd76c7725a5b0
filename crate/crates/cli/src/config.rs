//! Loading the JSON experiment document and applying flag overrides.

use std::path::{Path, PathBuf};

use alpi::experiment::ExperimentConfig;
use clap::Args;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

const DEFAULT_OUTPUT: &str = "out";

/// Flags that replace top-level keys of the config document.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// Replaces `seeds`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Replaces `backend` (`tree` or `dp`).
    #[arg(long)]
    pub backend: Option<String>,
    /// Replaces `max_iters`.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Replaces `output`.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// `KEY=JSON`, replaces any other top-level key.
    #[arg(long = "set", value_name = "KEY=JSON")]
    pub set: Vec<String>,
}

impl Overrides {
    fn apply(&self, doc: &mut Map<String, Value>) -> CliResult<()> {
        for entry in &self.set {
            let (key, raw) = entry.split_once('=').ok_or_else(|| {
                CliError::Config(format!("--set expects KEY=JSON, got `{entry}`"))
            })?;
            let value = serde_json::from_str(raw)
                .or_else(|_| serde_json::to_value(raw))
                .map_err(|e| CliError::Config(e.to_string()))?;
            doc.insert(key.to_string(), value);
        }
        if let Some(seeds) = &self.seeds {
            doc.insert("seeds".into(), Value::from(seeds.clone()));
        }
        if let Some(backend) = &self.backend {
            doc.insert("backend".into(), Value::from(backend.clone()));
        }
        if let Some(max_iters) = self.max_iters {
            doc.insert("max_iters".into(), Value::from(max_iters));
        }
        if let Some(output) = &self.output {
            doc.insert(
                "output".into(),
                Value::from(output.to_string_lossy().into_owned()),
            );
        }
        Ok(())
    }
}

pub fn load(path: &Path, overrides: &Overrides) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let Value::Object(mut doc) = value else {
        return Err(CliError::Config(format!(
            "{}: top level must be an object",
            path.display()
        )));
    };
    overrides.apply(&mut doc)?;
    let config: ExperimentConfig = serde_json::from_value(Value::Object(doc))
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}
