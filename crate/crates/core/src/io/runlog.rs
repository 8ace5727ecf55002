//! Append-only JSON-lines run log and resume support.
//!
//! Each run directory holds one `events.jsonl`. The first event is the run
//! configuration; search events follow in emission order; a `final` event
//! closes a completed run. Every line is flushed as it is written, so a
//! crash loses at most the line being written.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::BudgetLedger;
use crate::search::{
    EvaluationEvent, EventSink, FinalEvent, IterationSummary, ProposalEvent, RegimeReplay,
    SearchEvent, SweepReplay,
};
use crate::seq::StepSizeRegime;

pub const EVENTS_FILE: &str = "events.jsonl";

#[derive(Debug, Error)]
pub enum RunLogError {
    #[error("run log I/O: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt run log line {0}")]
    CorruptLine(usize),
    #[error("run log has no config event")]
    MissingConfig,
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    Config(serde_json::Value),
    Evaluation(EvaluationEvent),
    Proposal(ProposalEvent),
    IterationSummary(IterationSummary),
    Final(FinalEvent),
}

impl From<SearchEvent> for EventBody {
    fn from(e: SearchEvent) -> Self {
        match e {
            SearchEvent::Evaluation(x) => EventBody::Evaluation(x),
            SearchEvent::Proposal(x) => EventBody::Proposal(x),
            SearchEvent::IterationSummary(x) => EventBody::IterationSummary(x),
            SearchEvent::Final(x) => EventBody::Final(x),
        }
    }
}

impl EventBody {
    pub fn to_search_event(&self) -> Option<SearchEvent> {
        Some(match self {
            EventBody::Config(_) => return None,
            EventBody::Evaluation(x) => SearchEvent::Evaluation(x.clone()),
            EventBody::Proposal(x) => SearchEvent::Proposal(x.clone()),
            EventBody::IterationSummary(x) => SearchEvent::IterationSummary(x.clone()),
            EventBody::Final(x) => SearchEvent::Final(x.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub run_id: String,
    pub seq_no: u64,
    #[serde(flatten)]
    pub body: EventBody,
    /// Milliseconds since the Unix epoch; null in deterministic runs.
    pub timestamp: Option<u64>,
}

/// Writes events to a run log, one flushed line each.
#[derive(Debug)]
pub struct RunLogWriter {
    file: File,
    path: PathBuf,
    run_id: String,
    next_seq: u64,
    timestamps: bool,
}

impl RunLogWriter {
    /// Starts a new log in `dir`, replacing any existing one.
    pub fn create(dir: &Path, run_id: &str, timestamps: bool) -> Result<Self, RunLogError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(EVENTS_FILE);
        let file = File::create(&path)?;
        Ok(Self {
            file,
            path,
            run_id: run_id.to_string(),
            next_seq: 0,
            timestamps,
        })
    }

    /// Reopens a loaded log for appending. A torn last line is cut off first.
    pub fn resume(dir: &Path, loaded: &LoadedRun, timestamps: bool) -> Result<Self, RunLogError> {
        let path = dir.join(EVENTS_FILE);
        let file = OpenOptions::new().write(true).open(&path)?;
        file.set_len(loaded.valid_bytes)?;
        let mut file = OpenOptions::new().append(true).open(&path)?;
        file.flush()?;
        Ok(Self {
            file,
            path,
            run_id: loaded.run_id.clone(),
            next_seq: loaded.events.last().map_or(0, |e| e.seq_no + 1),
            timestamps,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, body: EventBody) -> Result<RunEvent, RunLogError> {
        let timestamp = self.timestamps.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64)
        });
        let event = RunEvent {
            run_id: self.run_id.clone(),
            seq_no: self.next_seq,
            body,
            timestamp,
        };
        let mut line = serde_json::to_string(&event)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.next_seq += 1;
        Ok(event)
    }
}

/// Search-event sink backed by a run log. The first `skip` events are
/// dropped; on resume they are the ones already in the log.
#[derive(Debug)]
pub struct RunLogSink {
    pub writer: RunLogWriter,
    pub skip: usize,
}

impl EventSink for RunLogSink {
    fn emit(&mut self, event: SearchEvent) -> Result<(), String> {
        if self.skip > 0 {
            self.skip -= 1;
            return Ok(());
        }
        self.writer
            .append(event.into())
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

/// A run log read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRun {
    pub run_id: String,
    pub events: Vec<RunEvent>,
    /// 1-based line where reading stopped, when the log ends in a torn or
    /// corrupt line.
    pub truncated_at: Option<usize>,
    /// Byte length of the valid prefix.
    pub valid_bytes: u64,
}

/// Reads `dir/events.jsonl`. Reading stops at the first line that does not
/// parse or breaks the `seq_no` order; the valid prefix is returned.
pub fn load_run(dir: &Path) -> Result<LoadedRun, RunLogError> {
    let bytes = fs::read(dir.join(EVENTS_FILE))?;
    let mut events: Vec<RunEvent> = Vec::new();
    let mut valid_bytes = 0u64;
    let mut truncated_at = None;
    let mut offset = 0usize;
    for (i, chunk) in bytes.split_inclusive(|&b| b == b'\n').enumerate() {
        offset += chunk.len();
        let complete = chunk.ends_with(b"\n");
        let parsed = complete
            .then(|| serde_json::from_slice::<RunEvent>(&chunk[..chunk.len() - 1]).ok())
            .flatten()
            .filter(|e| match events.last() {
                Some(prev) => e.seq_no == prev.seq_no + 1 && e.run_id == prev.run_id,
                None => matches!(e.body, EventBody::Config(_)),
            });
        match parsed {
            Some(e) => {
                events.push(e);
                valid_bytes = offset as u64;
            }
            None => {
                truncated_at = Some(i + 1);
                break;
            }
        }
    }
    let run_id = events
        .first()
        .map(|e| e.run_id.clone())
        .ok_or(RunLogError::MissingConfig)?;
    Ok(LoadedRun {
        run_id,
        events,
        truncated_at,
        valid_bytes,
    })
}

impl LoadedRun {
    pub fn config(&self) -> &serde_json::Value {
        match &self.events[0].body {
            EventBody::Config(c) => c,
            _ => unreachable!("load_run checks the first event"),
        }
    }

    pub fn search_events(&self) -> Vec<SearchEvent> {
        self.events
            .iter()
            .filter_map(|e| e.body.to_search_event())
            .collect()
    }

    pub fn replay(&self) -> SweepReplay {
        RegimeReplay::from_events(&self.search_events())
    }

    pub fn final_event(&self) -> Option<&FinalEvent> {
        self.events.iter().find_map(|e| match &e.body {
            EventBody::Final(f) => Some(f),
            _ => None,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.final_event().is_some()
    }

    /// Oracle spend per regime, one unit per logged evaluation.
    pub fn ledgers(&self, limit: usize) -> HashMap<StepSizeRegime, BudgetLedger> {
        let mut out: HashMap<StepSizeRegime, BudgetLedger> = HashMap::new();
        for e in &self.events {
            match &e.body {
                EventBody::Evaluation(ev) => {
                    out.entry(ev.regime)
                        .or_insert_with(|| BudgetLedger::new(limit))
                        .spent += 1
                }
                EventBody::IterationSummary(s) => {
                    out.entry(s.regime)
                        .or_insert_with(|| BudgetLedger::new(limit))
                        .cache_hits = s.cache_hits;
                }
                _ => {}
            }
        }
        out
    }

    /// Re-serializes the events, one per line.
    pub fn to_jsonl(&self) -> Result<String, RunLogError> {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

impl RunLogSink {
    /// Sink that continues a loaded run: events already in the log are
    /// skipped when the search replays them.
    pub fn resume(dir: &Path, loaded: &LoadedRun, timestamps: bool) -> Result<Self, RunLogError> {
        Ok(Self {
            writer: RunLogWriter::resume(dir, loaded, timestamps)?,
            skip: loaded.events.len() - 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, n: usize) -> RunLogWriter {
        let mut w = RunLogWriter::create(dir, "case-s1", false).unwrap();
        w.append(EventBody::Config(serde_json::json!({"seed": 1})))
            .unwrap();
        for i in 1..n {
            w.append(EventBody::Config(serde_json::json!({ "i": i })))
                .unwrap();
        }
        w
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        config(dir.path(), 5);
        let loaded = load_run(dir.path()).unwrap();
        assert_eq!(loaded.events.len(), 5);
        assert_eq!(loaded.truncated_at, None);
        let raw = fs::read_to_string(dir.path().join(EVENTS_FILE)).unwrap();
        assert_eq!(loaded.to_jsonl().unwrap(), raw);
    }

    #[test]
    fn torn_line_is_reported_and_cut_on_resume() {
        let dir = tempfile::tempdir().unwrap();
        config(dir.path(), 5);
        let path = dir.path().join(EVENTS_FILE);
        let raw = fs::read(&path).unwrap();
        let cut = raw.len() - 7;
        fs::write(&path, &raw[..cut]).unwrap();
        let loaded = load_run(dir.path()).unwrap();
        assert_eq!(loaded.events.len(), 4);
        assert_eq!(loaded.truncated_at, Some(5));

        let mut w = RunLogWriter::resume(dir.path(), &loaded, false).unwrap();
        w.append(EventBody::Config(serde_json::json!({ "i": 4 })))
            .unwrap();
        assert_eq!(fs::read(&path).unwrap(), raw);
    }

    #[test]
    fn garbage_and_gaps_stop_loading() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = config(dir.path(), 2);
        w.file.write_all(b"{not json}\n").unwrap();
        let loaded = load_run(dir.path()).unwrap();
        assert_eq!((loaded.events.len(), loaded.truncated_at), (2, Some(3)));

        fs::write(dir.path().join(EVENTS_FILE), "").unwrap();
        assert!(matches!(
            load_run(dir.path()),
            Err(RunLogError::MissingConfig)
        ));
    }
}
