use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub losses: BTreeMap<String, f64>,
    /// Seconds since the start of the run.
    pub wall_time: f64,
}

pub fn format_metrics(records: &[StepRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect()
}

pub fn parse_metrics(text: &str, path: &Path) -> Result<Vec<StepRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse { path: path.to_path_buf(), line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn read_metrics(path: &Path) -> Result<Vec<StepRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text, path)
}

pub fn write_metrics(path: &Path, records: &[StepRecord]) -> Result<()> {
    std::fs::write(path, format_metrics(records)).map_err(|e| Error::io(path, e))
}

/// Append-only writer used during training.
pub struct MetricsWriter {
    file: std::io::BufWriter<std::fs::File>,
    path: std::path::PathBuf,
}

impl MetricsWriter {
    /// Start a log containing `existing`, replacing whatever was at `path`.
    pub fn create(path: &Path, existing: &[StepRecord]) -> Result<Self> {
        write_metrics(path, existing)?;
        let file = std::fs::OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self { file: std::io::BufWriter::new(file), path: path.to_path_buf() })
    }

    pub fn append(&mut self, r: &StepRecord) -> Result<()> {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(self.file, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}
