use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use fieldkde_core::report::{to_canonical_json, CSV_SCHEMA_VERSION};
use fieldkde_core::Verdict;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Record of one invocation; enough to rerun it bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub started: String,
    pub finished: String,
    /// Absent when the config failed to load.
    pub config: Option<RunConfig>,
    pub master_seed: Option<u64>,
    pub threads: Option<usize>,
    pub csv_schema_version: u32,
    pub outputs: Vec<PathBuf>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub status: String,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            started: now(),
            finished: String::new(),
            config: None,
            master_seed: None,
            threads: None,
            csv_schema_version: CSV_SCHEMA_VERSION,
            outputs: Vec::new(),
            verdicts: BTreeMap::new(),
            status: "running".into(),
            error: None,
        }
    }

    pub fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        self.finished = now();
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.manifest.json", self.subcommand));
        std::fs::write(&path, to_canonical_json(self)?)?;
        Ok(path)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
