use anyhow::{Context, Result};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};
use toml::{Table, Value};

use crate::io::{read_toml, write_toml};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Record of one CLI run. `config` is the fully resolved configuration, so
/// `replay` can rerun the subcommand without the original flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Table,
    pub root_seed: u64,
    pub version: String,
    pub workers: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub exit_code: i32,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn version_string() -> String {
    format!("attncap {}", env!("CARGO_PKG_VERSION"))
}

impl RunManifest {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        t.insert("subcommand".into(), self.subcommand.clone().into());
        t.insert("root_seed".into(), Value::String(self.root_seed.to_string()));
        t.insert("version".into(), self.version.clone().into());
        t.insert("workers".into(), (self.workers as i64).into());
        t.insert("started_unix".into(), self.started_unix.into());
        t.insert("finished_unix".into(), self.finished_unix.into());
        t.insert("exit_code".into(), (self.exit_code as i64).into());
        t.insert("config".into(), Value::Table(self.config.clone()));
        t
    }

    pub fn from_table(t: &Table) -> Result<Self> {
        let s = |k: &str| -> Result<String> {
            Ok(t.get(k).and_then(Value::as_str).with_context(|| format!("manifest field {k:?} missing"))?.to_string())
        };
        let f = |k: &str| t.get(k).and_then(Value::as_float).unwrap_or(0.0);
        Ok(Self {
            subcommand: s("subcommand")?,
            config: t.get("config").and_then(Value::as_table).context("manifest has no [config] table")?.clone(),
            root_seed: s("root_seed")?.parse().context("root_seed must be an unsigned integer")?,
            version: s("version")?,
            workers: t.get("workers").and_then(Value::as_integer).unwrap_or(1) as usize,
            started_unix: f("started_unix"),
            finished_unix: f("finished_unix"),
            exit_code: t.get("exit_code").and_then(Value::as_integer).unwrap_or(0) as i32,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_toml(&dir.join(MANIFEST_FILE), &self.to_table())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        Self::from_table(&read_toml(&path)?)
    }
}
