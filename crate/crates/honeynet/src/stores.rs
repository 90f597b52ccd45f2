//! Append-only evidence stores and their on-disk JSON Lines form.
//!
//! A run produces one directory with four store files plus a copy of the
//! effective configuration, so the a-posteriori tools (`report`, `tokens`)
//! work from files alone:
//!
//! - `packets.jsonl` — every packet the gateway saw, exactly once
//!   (the trace format of [`crate::netmodel`]);
//! - `events.jsonl` — one [`GatewayEvent`] per line;
//! - `capture.jsonl` — decoded capture records keyed by emitting host;
//! - `capture_raw.jsonl` — capture payloads that failed to decode;
//! - `config.json` — the run configuration, for offline classification.
//!
//! Loading is tolerant by default: forensic tooling must survive partial
//! evidence, so unreadable lines are counted, never fatal. The `replay`
//! path uses the strict reader instead, which reports the first bad line.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::capture::{RawCapture, StoredCaptureRecord};
use crate::honeywall::GatewayEvent;
use crate::netmodel::Packet;

pub const PACKETS_FILE: &str = "packets.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const CAPTURE_FILE: &str = "capture.jsonl";
pub const CAPTURE_RAW_FILE: &str = "capture_raw.jsonl";
pub const CONFIG_FILE: &str = "config.json";
pub const ALERTS_FILE: &str = "alerts.jsonl";

/// In-memory stores a run appends to.
#[derive(Debug, Clone, Default)]
pub struct Stores {
    pub packets: Vec<Packet>,
    pub events: Vec<GatewayEvent>,
    pub capture: Vec<StoredCaptureRecord>,
    pub capture_raw: Vec<RawCapture>,
}

impl Stores {
    /// Write all four store files into `dir` (created if missing).
    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(PACKETS_FILE), &self.packets)?;
        write_jsonl(&dir.join(EVENTS_FILE), &self.events)?;
        write_jsonl(&dir.join(CAPTURE_FILE), &self.capture)?;
        write_jsonl(&dir.join(CAPTURE_RAW_FILE), &self.capture_raw)?;
        Ok(())
    }
}

/// Store files loaded back for analysis, with the number of lines that
/// could not be decoded.
#[derive(Debug, Clone, Default)]
pub struct LoadedStores {
    pub packets: Vec<Packet>,
    pub events: Vec<GatewayEvent>,
    pub capture: Vec<StoredCaptureRecord>,
    pub capture_raw: Vec<RawCapture>,
    pub corrupt_lines: u64,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}:{line}: {msg}")]
    BadLine {
        path: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One item per line, `\n`-terminated, no trailing blank line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)
}

/// Strict reader: the first undecodable line is an error.
pub fn read_jsonl_strict<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let f = fs::File::open(path)?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| StoreError::BadLine {
            path: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Tolerant reader: a missing file is an empty store, undecodable lines are
/// counted and skipped.
pub fn read_jsonl_tolerant<T: DeserializeOwned>(path: &Path) -> io::Result<(Vec<T>, u64)> {
    let f = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(e),
    };
    let mut items = Vec::new();
    let mut corrupt = 0u64;
    for line in BufReader::new(f).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(item) => items.push(item),
            Err(_) => corrupt += 1,
        }
    }
    Ok((items, corrupt))
}

/// Load a store directory for offline analysis.
pub fn load_dir_tolerant(dir: &Path) -> io::Result<LoadedStores> {
    let (packets, c1) = read_jsonl_tolerant::<Packet>(&dir.join(PACKETS_FILE))?;
    let (events, c2) = read_jsonl_tolerant::<GatewayEvent>(&dir.join(EVENTS_FILE))?;
    let (capture, c3) = read_jsonl_tolerant::<StoredCaptureRecord>(&dir.join(CAPTURE_FILE))?;
    let (capture_raw, c4) = read_jsonl_tolerant::<RawCapture>(&dir.join(CAPTURE_RAW_FILE))?;
    // Structurally invalid packets count as corrupt evidence too.
    let mut corrupt = c1 + c2 + c3 + c4;
    let packets: Vec<Packet> = packets
        .into_iter()
        .filter(|p| {
            let ok = p.validate().is_ok();
            if !ok {
                corrupt += 1;
            }
            ok
        })
        .collect();
    Ok(LoadedStores {
        packets,
        events,
        capture,
        capture_raw,
        corrupt_lines: corrupt,
    })
}
