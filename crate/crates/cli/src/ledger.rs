//! Progress ledger for resumable training. Timestamps live only here.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use veracity_core::config::ExperimentConfig;
use veracity_core::train::RunRecord;
use veracity_core::{Error, Result};

pub const FILE_NAME: &str = "ledger.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub repetition: usize,
    pub fold: usize,
    /// Relative to the output directory.
    pub checkpoint: String,
    pub finished_at: u64,
    pub record: RunRecord,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ledger {
    /// Hash of the config and every input file.
    pub fingerprint: String,
    pub config: ExperimentConfig,
    pub data: String,
    pub started_at: u64,
    pub completed_at: Option<u64>,
    pub entries: Vec<LedgerEntry>,
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Ledger {
    pub fn new(fingerprint: String, config: ExperimentConfig, data: String) -> Self {
        Self {
            fingerprint,
            config,
            data,
            started_at: now(),
            completed_at: None,
            entries: Vec::new(),
        }
    }

    /// Loads the ledger in `out` if it belongs to the same experiment.
    pub fn resume(out: &Path, fresh: Ledger) -> Result<Ledger> {
        let path = out.join(FILE_NAME);
        if !path.exists() {
            return Ok(fresh);
        }
        let text = fs::read_to_string(&path).map_err(|source| Error::File { path: path.clone(), source })?;
        let old: Ledger = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if old.fingerprint != fresh.fingerprint {
            return Err(Error::Config(format!(
                "{} belongs to a different experiment; choose another --out",
                path.display()
            )));
        }
        Ok(old)
    }

    /// Records whose checkpoint is still on disk.
    pub fn completed(&self, out: &Path) -> Vec<RunRecord> {
        self.entries
            .iter()
            .filter(|e| out.join(&e.checkpoint).is_file())
            .map(|e| e.record.clone())
            .collect()
    }

    pub fn push(&mut self, entry: LedgerEntry) {
        self.entries.retain(|e| (e.repetition, e.fold) != (entry.repetition, entry.fold));
        self.entries.push(entry);
        self.entries.sort_by_key(|e| (e.repetition, e.fold));
    }

    /// Writes atomically via a temporary file.
    pub fn write(&self, out: &Path) -> Result<()> {
        let path = out.join(FILE_NAME);
        let tmp = out.join(format!("{FILE_NAME}.tmp"));
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&tmp, text).map_err(|source| Error::File { path: tmp.clone(), source })?;
        fs::rename(&tmp, &path).map_err(|source| Error::File { path, source })
    }
}
