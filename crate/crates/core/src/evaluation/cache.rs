//! Append-only evaluation log keyed by canonical point encoding.
//!
//! The first line is a header carrying fingerprints of the evaluation setup
//! and of the baselines; a log whose header disagrees with the caller's is
//! refused. Every further line is one record:
//!
//! ```text
//! {"point":"tasks=0,2|P=1|ops=rnn","metrics":{"0":0.58,"2":0.19},"gains":{"0":0.03,"2":0.01},"source":"synthetic","timestamp":4}
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvaluationRecord, EvaluationSource, GainVector};
use crate::error::{Error, Result};
use crate::space::{SearchPoint, SearchSpaceConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheHeader {
    #[serde(rename = "type")]
    pub kind: String,
    pub version: u32,
    pub config_fingerprint: String,
    pub baselines_fingerprint: String,
}

impl CacheHeader {
    pub fn new(config_fingerprint: impl Into<String>, baselines_fingerprint: impl Into<String>) -> Self {
        CacheHeader {
            kind: "header".into(),
            version: 1,
            config_fingerprint: config_fingerprint.into(),
            baselines_fingerprint: baselines_fingerprint.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    point: String,
    metrics: BTreeMap<usize, f64>,
    gains: BTreeMap<usize, f64>,
    source: EvaluationSource,
    timestamp: u64,
}

fn record_to_line(rec: &EvaluationRecord) -> String {
    serde_json::to_string(&RecordLine {
        point: rec.point.encode(),
        metrics: rec.metrics.clone(),
        gains: rec.gains.per_task.clone(),
        source: rec.source,
        timestamp: rec.timestamp,
    })
    .expect("record serialization cannot fail")
}

fn line_to_record(line: &str, space: &SearchSpaceConfig) -> std::result::Result<EvaluationRecord, String> {
    let raw: RecordLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let point = SearchPoint::decode(&raw.point, space).map_err(|e| e.to_string())?;
    let members: Vec<usize> = point.combination.members().map(|t| t.index()).collect();
    if raw.metrics.keys().copied().ne(members.iter().copied()) || raw.gains.keys().copied().ne(members.iter().copied())
    {
        return Err("metrics/gains keys do not match the combination".into());
    }
    Ok(EvaluationRecord {
        point,
        metrics: raw.metrics,
        gains: GainVector { per_task: raw.gains },
        source: raw.source,
        timestamp: raw.timestamp,
    })
}

#[derive(Debug)]
pub struct EvaluationCache {
    header: CacheHeader,
    path: Option<PathBuf>,
    writer: Option<BufWriter<File>>,
    records: Vec<EvaluationRecord>,
    index: HashMap<String, usize>,
    skipped_lines: usize,
}

impl EvaluationCache {
    pub fn in_memory(header: CacheHeader) -> Self {
        EvaluationCache {
            header,
            path: None,
            writer: None,
            records: Vec::new(),
            index: HashMap::new(),
            skipped_lines: 0,
        }
    }

    /// Opens (or creates) a durable log. Corrupt record lines are skipped with a warning.
    pub fn open(path: &Path, header: CacheHeader, space: &SearchSpaceConfig) -> Result<Self> {
        let mut cache = EvaluationCache::in_memory(header);
        cache.path = Some(path.to_path_buf());
        if path.exists() {
            let text = fs::read_to_string(path)?;
            let mut lines = text.lines();
            let first = lines.next().unwrap_or_default();
            let found: CacheHeader = serde_json::from_str(first)
                .map_err(|e| Error::checkpoint(path, format!("unreadable cache header: {e}")))?;
            if found != cache.header {
                return Err(Error::checkpoint(
                    path,
                    format!(
                        "cache fingerprints differ (log has config {} / baselines {}, expected {} / {})",
                        found.config_fingerprint,
                        found.baselines_fingerprint,
                        cache.header.config_fingerprint,
                        cache.header.baselines_fingerprint
                    ),
                ));
            }
            for (no, line) in lines.enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match line_to_record(line, space) {
                    Ok(rec) => {
                        let key = rec.point.encode();
                        if !cache.index.contains_key(&key) {
                            cache.index.insert(key, cache.records.len());
                            cache.records.push(rec);
                        }
                    }
                    Err(e) => {
                        log::warn!("{}: skipping corrupt line {}: {e}", path.display(), no + 2);
                        cache.skipped_lines += 1;
                    }
                }
            }
            let file = OpenOptions::new().append(true).open(path)?;
            cache.writer = Some(BufWriter::new(file));
        } else {
            cache.rewrite()?;
        }
        Ok(cache)
    }

    fn rewrite(&mut self) -> Result<()> {
        let Some(path) = self.path.clone() else {
            return Ok(());
        };
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "{}", serde_json::to_string(&self.header)?)?;
        for rec in &self.records {
            writeln!(w, "{}", record_to_line(rec))?;
        }
        w.flush()?;
        drop(w);
        self.writer = Some(BufWriter::new(OpenOptions::new().append(true).open(&path)?));
        Ok(())
    }

    pub fn header(&self) -> &CacheHeader {
        &self.header
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn contains(&self, point: &SearchPoint) -> bool {
        self.index.contains_key(&point.encode())
    }

    pub fn lookup(&self, point: &SearchPoint) -> Option<&EvaluationRecord> {
        self.index.get(&point.encode()).map(|&i| &self.records[i])
    }

    /// Appends a record, stamping it with the next logical timestamp.
    ///
    /// Storing an already cached point returns the existing record.
    pub fn store(&mut self, mut record: EvaluationRecord) -> Result<&EvaluationRecord> {
        let key = record.point.encode();
        if let Some(&i) = self.index.get(&key) {
            return Ok(&self.records[i]);
        }
        record.timestamp = self.records.len() as u64;
        if let Some(w) = self.writer.as_mut() {
            writeln!(w, "{}", record_to_line(&record))?;
            w.flush()?;
        }
        self.index.insert(key, self.records.len());
        self.records.push(record);
        Ok(self.records.last().unwrap())
    }

    /// Drops every record after the first `len` and rewrites the log.
    pub fn truncate(&mut self, len: usize) -> Result<()> {
        if len >= self.records.len() {
            return Ok(());
        }
        for rec in self.records.drain(len..) {
            self.index.remove(&rec.point.encode());
        }
        self.rewrite()
    }
}
