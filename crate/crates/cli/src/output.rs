//! Output directory handling: atomic file writes and the run manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::DataArgs;

pub const MANIFEST: &str = "manifest.json";

/// Collects the files written by one command and finishes with the manifest.
pub struct RunDir {
    dir: PathBuf,
    outputs: Vec<String>,
    started: Instant,
}

impl RunDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Writes `name` through a temporary file in the same directory, renamed
    /// into place only after `fill` succeeds.
    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let target = self.dir.join(name);
        let tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("creating temporary file in {}", self.dir.display()))?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            fill(&mut w).with_context(|| format!("writing {name}"))?;
            w.flush().with_context(|| format!("writing {name}"))?;
        }
        tmp.persist(&target)
            .with_context(|| format!("renaming into {}", target.display()))?;
        if name != MANIFEST {
            self.outputs.push(name.to_string());
        }
        Ok(())
    }

    pub fn finish<F: Serialize>(mut self, command: &str, flags: &F, data: &DataArgs) -> Result<()> {
        let manifest = Manifest {
            command: command.to_string(),
            flags: serde_json::to_value(flags)?,
            seed: data.seed,
            dataset_sha256: fingerprint(&data.wells, &data.picks)?,
            outputs: self.outputs.clone(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        self.write(MANIFEST, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    flags: serde_json::Value,
    seed: u64,
    dataset_sha256: String,
    outputs: Vec<String>,
    wall_time_s: f64,
}

/// SHA-256 over the wells file followed by the picks file.
pub fn fingerprint(wells: &Path, picks: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for p in [wells, picks] {
        let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}
