//! Atomic artifact writing and the run manifest.
//!
//! Artifacts are staged as temporary files in the output directory and only
//! renamed into place once every one of them has been written. If anything
//! fails first, the temporaries are dropped and deleted.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use tempfile::NamedTempFile;

pub struct Artifacts {
    dir: PathBuf,
    staged: Vec<(String, NamedTempFile)>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    pub fn add_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let mut tmp = NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("staging {name} in {}", self.dir.display()))?;
        tmp.write_all(bytes)?;
        tmp.flush()?;
        self.staged.push((name.to_string(), tmp));
        Ok(())
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add_bytes(name, text.as_bytes())
    }

    pub fn names(&self) -> Vec<String> {
        self.staged.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Add `manifest.json`, then move every staged file into place.
    pub fn commit(mut self, manifest: Manifest) -> Result<Vec<PathBuf>> {
        let manifest = Manifest {
            artifacts: self.names(),
            ..manifest
        };
        self.add_json("manifest.json", &manifest)?;
        let mut written = Vec::with_capacity(self.staged.len());
        for (name, tmp) in self.staged {
            let path = self.dir.join(&name);
            tmp.persist(&path)
                .with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Print `text` to stdout. A closed pipe (for example `| head`) is not an
/// error: the artifacts are already on disk by the time this runs.
pub fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Provenance record written next to every run's artifacts. It carries the
/// wall time, so unlike the other artifacts it differs between reruns.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<String>,
    pub wall_time_secs: f64,
}

impl Manifest {
    pub fn new(subcommand: &'static str, config: Value, seeds: Vec<u64>, wall: f64) -> Self {
        Self {
            tool: "permlearn",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config,
            seeds,
            artifacts: Vec::new(),
            wall_time_secs: wall,
        }
    }
}
