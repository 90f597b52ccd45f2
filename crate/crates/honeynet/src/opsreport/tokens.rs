//! Honeytokens: bait data planted on honeypots whose unique 16-byte marker
//! proves attacker access when it shows up anywhere in the evidence.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::hex_bytes;
use crate::rulelang::find_occurrences;
use crate::stores::LoadedStores;

pub const MARKER_LEN: usize = 16;

/// What the bait looks like to the attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenKind {
    Mail,
    Spreadsheet,
    EncryptedFile,
}

/// One planted token. Markers are unique across tokens and must never occur
/// in banners or scripted payloads, so any sighting is evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Honeytoken {
    pub id: String,
    pub kind: TokenKind,
    #[serde(with = "hex_bytes")]
    pub marker: Vec<u8>,
    /// Honeypot-local path label the token pretends to live at.
    pub planted_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("token {0}: marker must be {MARKER_LEN} bytes")]
    BadMarkerLength(String),
    #[error("duplicate token id {0}")]
    DuplicateId(String),
    #[error("duplicate marker between tokens {0} and {1}")]
    DuplicateMarker(String, String),
}

/// Ids and markers must be unique, markers the right size.
pub fn validate_tokens(tokens: &[Honeytoken]) -> Result<(), TokenError> {
    let mut ids = BTreeSet::new();
    for t in tokens {
        if t.marker.len() != MARKER_LEN {
            return Err(TokenError::BadMarkerLength(t.id.clone()));
        }
        if !ids.insert(&t.id) {
            return Err(TokenError::DuplicateId(t.id.clone()));
        }
    }
    for (i, a) in tokens.iter().enumerate() {
        for b in &tokens[i + 1..] {
            if a.marker == b.marker {
                return Err(TokenError::DuplicateMarker(a.id.clone(), b.id.clone()));
            }
        }
    }
    Ok(())
}

/// Attach tokens to a honeypot's planted list, enforcing marker uniqueness
/// across everything already planted there.
pub fn plant_tokens(planted: &mut Vec<Honeytoken>, new: &[Honeytoken]) -> Result<(), TokenError> {
    let mut combined: Vec<Honeytoken> = planted.clone();
    combined.extend(new.iter().cloned());
    validate_tokens(&combined)?;
    *planted = combined;
    Ok(())
}

/// Where a marker was sighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenSource {
    Packet,
    Capture,
}

/// One marker sighting: which token, where, and when.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenHit {
    pub token_id: String,
    #[serde(rename = "where")]
    pub source: TokenSource,
    pub time: u64,
}

/// Report every occurrence of any marker in packet payloads or capture
/// record data, with provenance and time. Hits come out in store order:
/// packets first, then capture records.
pub fn scan_for_tokens(stores: &LoadedStores, tokens: &[Honeytoken]) -> Vec<TokenHit> {
    let mut hits = Vec::new();
    for p in &stores.packets {
        for t in tokens {
            for _ in find_occurrences(&p.payload, &t.marker) {
                hits.push(TokenHit {
                    token_id: t.id.clone(),
                    source: TokenSource::Packet,
                    time: p.timestamp,
                });
            }
        }
    }
    for r in &stores.capture {
        for t in tokens {
            for _ in find_occurrences(&r.data, &t.marker) {
                hits.push(TokenHit {
                    token_id: t.id.clone(),
                    source: TokenSource::Capture,
                    time: r.time_us(),
                });
            }
        }
    }
    hits
}

/// Hosts named by alert rules must be configured honeypots.
pub(crate) fn is_known_honeypot(ip: Ipv4Addr, cfg: &crate::netmodel::NetConfig) -> bool {
    cfg.honeypot_ips.contains(&ip)
}
