//! Append-only JSONL store of labeling events.
//!
//! One writer per file at a time, enforced by a `<file>.lock` companion
//! created with `O_EXCL` semantics and removed when the writer drops.
//! Readers take no lock.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

use crate::combinatorics::ClassSpace;
use crate::error::{Error, Result};
use crate::labeling::LabelingEvent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Simulated,
    Human,
}

/// Wire form of a labeling event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredEvent {
    #[serde(flatten)]
    pub event: LabelingEvent,
    pub timestamp: DateTime<FixedOffset>,
    pub origin: Origin,
}

impl StoredEvent {
    /// Stamps `event` with the current UTC time.
    pub fn now(event: LabelingEvent, origin: Origin) -> Self {
        Self {
            event,
            timestamp: Utc::now().fixed_offset(),
            origin,
        }
    }
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".lock");
    path.with_file_name(name)
}

/// Exclusive appender for one store file.
#[derive(Debug)]
pub struct EventWriter {
    out: BufWriter<File>,
    lock: PathBuf,
    space: ClassSpace,
}

impl EventWriter {
    /// Fails with [`Error::Locked`] while another writer holds the file.
    pub fn open(path: &Path, space: ClassSpace) -> Result<Self> {
        let lock = lock_path(path);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Locked(path.to_path_buf()));
            }
            Err(e) => return Err(e.into()),
        }
        let file = match OpenOptions::new().create(true).append(true).open(path) {
            Ok(f) => f,
            Err(e) => {
                let _ = fs::remove_file(&lock);
                return Err(e.into());
            }
        };
        Ok(Self {
            out: BufWriter::new(file),
            lock,
            space,
        })
    }

    /// Validates every event first, then appends them and flushes.
    pub fn append(&mut self, events: &[StoredEvent]) -> Result<()> {
        for e in events {
            e.event.validate(self.space)?;
        }
        for e in events {
            serde_json::to_writer(&mut self.out, e)?;
            self.out.write_all(b"\n")?;
        }
        self.out.flush()?;
        Ok(())
    }
}

impl Drop for EventWriter {
    fn drop(&mut self) {
        let _ = self.out.flush();
        let _ = fs::remove_file(&self.lock);
    }
}

pub fn append_events(path: &Path, events: &[StoredEvent], space: ClassSpace) -> Result<()> {
    EventWriter::open(path, space)?.append(events)
}

/// Reads and validates every line; errors carry 1-based line numbers.
/// Blank lines are skipped.
pub fn read_events(path: &Path, space: ClassSpace) -> Result<Vec<StoredEvent>> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: StoredEvent = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        event
            .event
            .validate(space)
            .map_err(|e| Error::StoreViolation {
                line: line_no,
                message: e.to_string(),
            })?;
        events.push(event);
    }
    Ok(events)
}
