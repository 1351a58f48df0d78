//! Append-only JSONL event log, one event per line.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{SessionError, SessionEvent};

/// Environment variable naming the directory that holds session logs.
pub const DATA_DIR_ENV: &str = "ADAPTUTOR_DATA_DIR";

pub fn log_path(dir: impl AsRef<Path>, session_id: &str) -> PathBuf {
    dir.as_ref().join(format!("{session_id}.jsonl"))
}

#[derive(Debug)]
pub struct JsonlLog {
    path: PathBuf,
    out: BufWriter<File>,
    written: usize,
}

impl JsonlLog {
    /// Start a new log; fails if the file exists.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().write(true).create_new(true).open(&path)?;
        Ok(Self { path, out: BufWriter::new(file), written: 0 })
    }

    /// Continue an existing log holding `written` events.
    pub fn open_append(path: impl AsRef<Path>, written: usize) -> Result<Self, SessionError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(Self { path, out: BufWriter::new(file), written })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn written(&self) -> usize {
        self.written
    }

    /// Write one event and flush it.
    pub fn append(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        let line = serde_json::to_string(event).expect("events serialize");
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        self.written += 1;
        Ok(())
    }
}

pub fn to_jsonl(events: &[SessionEvent]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&serde_json::to_string(e).expect("events serialize"));
        s.push('\n');
    }
    s
}

/// Parse JSONL text. Blank lines are skipped; errors carry 1-based line numbers.
pub fn parse_log(text: &str) -> Result<Vec<SessionEvent>, SessionError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(line)
            .map_err(|err| SessionError::LogParse { line: i + 1, message: err.to_string() })?;
        events.push(e);
    }
    Ok(events)
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<SessionEvent>, SessionError> {
    parse_log(&std::fs::read_to_string(path)?)
}
