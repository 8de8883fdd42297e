//! Run histories and their line-delimited JSON form.
//!
//! A history file holds one metadata object on its first line followed by
//! one [`Record`] per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::configspace::{ConfigSpace, Configuration};
use crate::{Error, Result};

/// How a record's configuration was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Initial,
    RandomInterleave,
    Acquisition,
    Fallback,
    RandomSearch,
    Evolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub trial: usize,
    pub config: Configuration,
    pub objectives: Vec<f64>,
    /// Scalarization weights in effect when the configuration was proposed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Whether the proposal came from a reduced space.
    #[serde(default)]
    pub reduced: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub important: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shapley: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Configuration>,
    pub source: Source,
}

impl Record {
    pub fn new(trial: usize, config: Configuration, objectives: Vec<f64>, source: Source) -> Self {
        Self {
            trial,
            config,
            objectives,
            weights: None,
            reduced: false,
            important: None,
            shapley: None,
            anchor: None,
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryMeta {
    pub task: String,
    pub optimizer: String,
    pub seed: u64,
    pub budget: usize,
    pub objectives: usize,
    pub settings: serde_json::Value,
    pub space: ConfigSpace,
    /// Set when the run stopped early because the space was exhausted.
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub meta: HistoryMeta,
    records: Vec<Record>,
}

impl RunHistory {
    pub fn new(meta: HistoryMeta) -> Self {
        Self {
            meta,
            records: Vec::new(),
        }
    }

    /// Appends a record; its trial index is assigned here.
    pub fn push(&mut self, mut record: Record) -> Result<()> {
        if self.records.len() >= self.meta.budget {
            return Err(Error::InvalidSettings(format!(
                "history already holds the full budget of {}",
                self.meta.budget
            )));
        }
        record.trial = self.records.len();
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.objectives.clone()).collect()
    }

    pub fn configurations(&self) -> Vec<Configuration> {
        self.records.iter().map(|r| r.config.clone()).collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.meta)?;
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::MalformedHistory("empty file".into()))?;
        let meta: HistoryMeta = serde_json::from_str(first)
            .map_err(|e| Error::MalformedHistory(format!("metadata line: {e}")))?;
        let mut records = Vec::new();
        for (n, line) in lines {
            let record: Record = serde_json::from_str(line)
                .map_err(|e| Error::MalformedHistory(format!("line {}: {e}", n + 1)))?;
            if record.trial != records.len() {
                return Err(Error::MalformedHistory(format!(
                    "line {}: trial index {} out of sequence",
                    n + 1,
                    record.trial
                )));
            }
            if record.objectives.len() != meta.objectives {
                return Err(Error::MalformedHistory(format!(
                    "line {}: expected {} objectives",
                    n + 1,
                    meta.objectives
                )));
            }
            records.push(record);
        }
        Ok(Self { meta, records })
    }

    /// Writes through a temporary sibling file and renames, so a partially
    /// written history never appears under the final name.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.to_jsonl()?.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }
}
