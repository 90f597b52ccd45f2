//! Deterministic discrete-event network harness: a virtual microsecond
//! clock, scripted attacker hosts, banner-level honeypot service emulators,
//! and the inline gateway between them.
//!
//! A [`Scenario`] is a JSON document (schema in `docs/SCENARIOS.md`): hosts
//! with roles, an exploit byte marker, and timed steps. Compromise is
//! marker-based — a host falls when a delivered payload still contains the
//! marker — which is exactly what makes gateway rewriting observable: a
//! rewritten exploit arrives with the marker destroyed and the target
//! stands. Honeypot-originated attack steps only run once the honeypot is
//! compromised.
//!
//! Identical inputs (including the seed, which drives only scripted scan
//! jitter) produce byte-identical event logs and store files.

mod engine;

pub use engine::{run_scenario, RunOutput, LINK_DELAY_US, SERVICE_DELAY_US};

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::honeywall::GatewayEvent;
use crate::netmodel::{from_hex, hex_bytes, FlowKey, Ipv4Cidr, NetConfig};
use crate::opsreport::Honeytoken;

/// What a host is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Attacker,
    Honeypot,
    ExternalVictim,
}

/// Banner-level service emulators. No protocol state machines: connect,
/// banner, payload — the mechanisms under test act on payload bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Service {
    Http,
    Ftp,
    Ssh,
}

impl Service {
    pub fn banner(self) -> &'static [u8] {
        match self {
            Service::Http => b"HTTP/1.0 200 OK\r\nServer: Apache\r\n\r\n",
            Service::Ftp => b"220 FTP server ready\r\n",
            Service::Ssh => b"SSH-2.0-OpenSSH\r\n",
        }
    }
}

/// One declared host.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostSpec {
    pub role: Role,
    pub ip: Ipv4Addr,
    /// Listening services, port → emulator (honeypots only).
    #[serde(default)]
    pub services: BTreeMap<u16, Service>,
    /// Ids of configured honeytokens planted on this host.
    #[serde(default)]
    pub tokens: Vec<String>,
}

/// Payload bytes in scenario JSON: either text or hex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayloadSpec {
    Text { text: String },
    Hex { hex: String },
}

impl PayloadSpec {
    pub fn to_bytes(&self) -> Result<Vec<u8>, ScenarioError> {
        match self {
            PayloadSpec::Text { text } => Ok(text.as_bytes().to_vec()),
            PayloadSpec::Hex { hex } => {
                from_hex(hex).map_err(|_| ScenarioError::BadPayloadHex(hex.clone()))
            }
        }
    }

    pub fn empty() -> Self {
        PayloadSpec::Text {
            text: String::new(),
        }
    }
}

/// Scan targets: an explicit list or a whole subnet (ascending order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Subnet { subnet: Ipv4Cidr },
    List(Vec<Ipv4Addr>),
}

impl TargetSpec {
    pub fn targets(&self) -> Vec<Ipv4Addr> {
        match self {
            TargetSpec::Subnet { subnet } => subnet.iter().collect(),
            TargetSpec::List(list) => list.clone(),
        }
    }
}

fn default_scan_spacing() -> u64 {
    1_000
}

fn default_exploit_prefix() -> usize {
    5
}

/// One timed action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StepAction {
    /// TCP connection attempt (SYN). Honeypot services answer with a banner.
    Connect {
        from: Ipv4Addr,
        to: Ipv4Addr,
        dst_port: u16,
    },
    /// One data segment on a fresh ephemeral flow.
    Send {
        from: Ipv4Addr,
        to: Ipv4Addr,
        dst_port: u16,
        payload: PayloadSpec,
    },
    /// Attack payload: filler bytes followed by the scenario's exploit
    /// marker. Whoever receives the marker intact is compromised.
    Exploit {
        from: Ipv4Addr,
        to: Ipv4Addr,
        dst_port: u16,
        #[serde(default = "default_exploit_prefix")]
        prefix_len: usize,
    },
    /// One probe per target at `at + i·spacing (+ jitter)`.
    Scan {
        from: Ipv4Addr,
        targets: TargetSpec,
        dst_port: u16,
        #[serde(default = "PayloadSpec::empty")]
        payload: PayloadSpec,
        #[serde(default = "default_scan_spacing")]
        spacing_us: u64,
        #[serde(default)]
        jitter_us: u64,
    },
    /// Attacker keystrokes on a compromised honeypot; the sensor records
    /// them (and any output) over the capture channel.
    Command {
        host: Ipv4Addr,
        input: String,
        #[serde(default)]
        output: Option<String>,
    },
    /// Read a planted token on a compromised honeypot and ship its marker
    /// to an external drop. With `capture_read`, the read itself goes
    /// through the capture channel first.
    Exfiltrate {
        host: Ipv4Addr,
        token: String,
        to: Ipv4Addr,
        dst_port: u16,
        #[serde(default)]
        capture_read: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub at: u64,
    #[serde(flatten)]
    pub action: StepAction,
}

/// A complete scripted run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub duration_us: u64,
    /// Byte marker whose intact delivery means compromise.
    #[serde(default, with = "hex_bytes")]
    pub exploit_marker: Vec<u8>,
    pub hosts: Vec<HostSpec>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("duplicate host ip {0}")]
    DuplicateHostIp(Ipv4Addr),
    #[error("step {index}: scheduled at {at} µs, after scenario duration {duration} µs")]
    StepAfterDuration {
        index: usize,
        at: u64,
        duration: u64,
    },
    #[error("step {index}: {ip} is not a declared host")]
    UnknownHost { index: usize, ip: Ipv4Addr },
    #[error("step {index}: {ip} is not a honeypot")]
    NotAHoneypot { index: usize, ip: Ipv4Addr },
    #[error("step {index}: EXPLOIT used but the scenario has no exploit marker")]
    NoExploitMarker { index: usize },
    #[error("step {index}: token {id} is not planted on {ip}")]
    TokenNotPlanted {
        index: usize,
        id: String,
        ip: Ipv4Addr,
    },
    #[error("host {ip}: token id {id} is not defined in the configuration")]
    UnknownTokenId { ip: Ipv4Addr, id: String },
    #[error("honeypot {0} lies outside the honeynet subnet")]
    HoneypotOutsideSubnet(Ipv4Addr),
    #[error("honeypot {0} is not listed in the configuration's honeypot set")]
    HoneypotNotConfigured(Ipv4Addr),
    #[error("{role:?} host {ip} must lie outside the honeynet subnet")]
    RoleInsideSubnet { role: Role, ip: Ipv4Addr },
    #[error("malformed hex payload {0:?}")]
    BadPayloadHex(String),
    #[error("token {id}: marker occurs in a scripted payload or banner; markers may only enter traffic via exfiltration")]
    MarkerInScript { id: String },
    #[error("invalid tokens: {0}")]
    Tokens(#[from] crate::opsreport::TokenError),
}

impl Scenario {
    pub fn host(&self, ip: Ipv4Addr) -> Option<&HostSpec> {
        self.hosts.iter().find(|h| h.ip == ip)
    }

    /// Full validation against the run configuration and token definitions.
    /// Runs before any packet moves.
    pub fn validate(&self, cfg: &NetConfig, tokens: &[Honeytoken]) -> Result<(), ScenarioError> {
        let mut seen = std::collections::BTreeSet::new();
        for h in &self.hosts {
            if !seen.insert(h.ip) {
                return Err(ScenarioError::DuplicateHostIp(h.ip));
            }
            match h.role {
                Role::Honeypot => {
                    if !cfg.in_honeynet(h.ip) {
                        return Err(ScenarioError::HoneypotOutsideSubnet(h.ip));
                    }
                    if !cfg.honeypot_ips.contains(&h.ip) {
                        return Err(ScenarioError::HoneypotNotConfigured(h.ip));
                    }
                }
                Role::Attacker | Role::ExternalVictim => {
                    if cfg.in_honeynet(h.ip) {
                        return Err(ScenarioError::RoleInsideSubnet {
                            role: h.role,
                            ip: h.ip,
                        });
                    }
                }
            }
            for id in &h.tokens {
                if !tokens.iter().any(|t| &t.id == id) {
                    return Err(ScenarioError::UnknownTokenId {
                        ip: h.ip,
                        id: id.clone(),
                    });
                }
            }
        }

        let require_host = |index: usize, ip: Ipv4Addr| -> Result<&HostSpec, ScenarioError> {
            self.host(ip)
                .ok_or(ScenarioError::UnknownHost { index, ip })
        };
        let require_honeypot = |index: usize, ip: Ipv4Addr| -> Result<&HostSpec, ScenarioError> {
            let h = require_host(index, ip)?;
            if h.role != Role::Honeypot {
                return Err(ScenarioError::NotAHoneypot { index, ip });
            }
            Ok(h)
        };

        for (index, step) in self.steps.iter().enumerate() {
            if step.at > self.duration_us {
                return Err(ScenarioError::StepAfterDuration {
                    index,
                    at: step.at,
                    duration: self.duration_us,
                });
            }
            match &step.action {
                StepAction::Connect { from, .. } | StepAction::Scan { from, .. } => {
                    require_host(index, *from)?;
                }
                StepAction::Send { from, payload, .. } => {
                    require_host(index, *from)?;
                    payload.to_bytes()?;
                }
                StepAction::Exploit { from, .. } => {
                    require_host(index, *from)?;
                    if self.exploit_marker.is_empty() {
                        return Err(ScenarioError::NoExploitMarker { index });
                    }
                }
                StepAction::Command { host, .. } => {
                    require_honeypot(index, *host)?;
                }
                StepAction::Exfiltrate { host, token, .. } => {
                    let h = require_honeypot(index, *host)?;
                    if !h.tokens.iter().any(|id| id == token) {
                        return Err(ScenarioError::TokenNotPlanted {
                            index,
                            id: token.clone(),
                            ip: *host,
                        });
                    }
                }
            }
        }

        // Token markers must not occur in scripted traffic or banners: a
        // sighting proves exfiltration, so nothing else may emit one.
        for t in tokens {
            let in_banner = [Service::Http, Service::Ftp, Service::Ssh]
                .iter()
                .any(|s| contains(s.banner(), &t.marker));
            let in_marker = contains(&self.exploit_marker, &t.marker);
            let mut in_payload = false;
            for step in &self.steps {
                let payload = match &step.action {
                    StepAction::Send { payload, .. } | StepAction::Scan { payload, .. } => {
                        payload.to_bytes()?
                    }
                    StepAction::Command { input, output, .. } => {
                        let mut v = input.as_bytes().to_vec();
                        if let Some(o) = output {
                            v.extend_from_slice(o.as_bytes());
                        }
                        v
                    }
                    _ => continue,
                };
                if contains(&payload, &t.marker) {
                    in_payload = true;
                    break;
                }
            }
            if in_banner || in_marker || in_payload {
                return Err(ScenarioError::MarkerInScript { id: t.id.clone() });
            }
        }
        Ok(())
    }
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty()
        && haystack.len() >= needle.len()
        && haystack.windows(needle.len()).any(|w| w == needle)
}

/// One entry of the unified simulation log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub time: u64,
    pub seq: u64,
    pub kind: SimEventKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimEventKind {
    /// Mirror of an event appended to the event store.
    Gateway(GatewayEvent),
    /// A forwarded packet reached its destination host.
    Delivered { flow: FlowKey, byte_count: u64 },
    /// A host flipped to compromised (at most once per run).
    Compromised { host: Ipv4Addr },
    /// The sensor on `host` emitted a capture record.
    CaptureEmitted {
        host: Ipv4Addr,
        counter: u32,
        encoded: Vec<u8>,
    },
    /// A scripted step did not run (e.g. host not compromised yet).
    StepSkipped { index: usize, reason: String },
}

/// Time-ordered log of everything that happened, with a deterministic
/// tiebreak sequence number.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    entries: Vec<SimEvent>,
}

impl EventLog {
    pub(crate) fn push(&mut self, time: u64, kind: SimEventKind) {
        let seq = self.entries.len() as u64;
        debug_assert!(self.entries.last().is_none_or(|e| e.time <= time));
        self.entries.push(SimEvent { time, seq, kind });
    }

    pub fn entries(&self) -> &[SimEvent] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
