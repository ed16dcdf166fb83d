use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Context, Result};

/// Output directory of one run.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
    metrics: Vec<(String, String)>,
}

impl RunDir {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root,
            metrics: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Echo the arguments of a subcommand as `run-config.json`.
    pub fn write_config<A: Serialize>(&self, command: &str, args: &A) -> Result<()> {
        let value = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "args": args,
        });
        let text = serde_json::to_string_pretty(&value).expect("arguments serialise") + "\n";
        self.write("run-config.json", &text)
    }

    pub fn write(&self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).context(|| format!("writing {}", path.display()))
    }

    pub fn metric(&mut self, key: &str, value: impl Display) {
        self.metrics.push((key.to_string(), value.to_string()));
    }

    /// Write the collected metrics as `metrics.txt`, one `key<TAB>value`
    /// per line.
    pub fn finish(&self) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.metrics {
            text.push_str(&format!("{k}\t{v}\n"));
        }
        self.write("metrics.txt", &text)
    }
}
