//! Append-only JSON-lines journal, one file per session.
//!
//! The first line records the session's creation; every accepted improvement
//! appends one line. Replaying the improvements through a fresh learner with the
//! same options reproduces the session exactly, since the learner is
//! deterministic given its seed.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use pcl_core::model::Value;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::session::SessionOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        session: Uuid,
        problem: String,
        options: SessionOptions,
    },
    Improvement {
        turn: u64,
        values: BTreeMap<String, Value>,
    },
}

#[derive(Clone, Debug)]
pub struct Journal {
    dir: PathBuf,
}

impl Journal {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Journal { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, id: Uuid) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    /// Appends one event and flushes it to disk before returning.
    pub fn append(&self, id: Uuid, event: &Event) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.path(id))?;
        let line = serde_json::to_string(event).map_err(std::io::Error::other)?;
        writeln!(f, "{line}")?;
        f.sync_data()
    }

    pub fn remove(&self, id: Uuid) -> std::io::Result<()> {
        match fs::remove_file(self.path(id)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }

    /// Journal files in the directory, sorted by name.
    pub fn files(&self) -> std::io::Result<Vec<PathBuf>> {
        let mut files: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        files.sort();
        Ok(files)
    }
}

pub fn read_events(path: &Path) -> std::io::Result<Vec<Event>> {
    let mut events = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
        events.push(event);
    }
    Ok(events)
}
