//! The inline gateway. Every packet crossing the bridge goes through
//! [`Gateway::process`], which runs a fixed pipeline:
//!
//! 1. tap — the packet is recorded in the packet store unconditionally,
//!    exactly once, whatever its fate (forwarded packets are stored in the
//!    form they leave the wall, dropped and diverted ones as received);
//! 2. direction classification;
//! 3. capture-channel packets are diverted to the collector — never
//!    forwarded, never counted against any quota;
//! 4. outbound connection initiations (TCP SYN without ACK on an unseen
//!    flow, or the first packet of an unseen UDP flow) are checked against
//!    the per-honeypot rolling 24-hour quota — over the limit means a silent
//!    drop (a transparent bridge that answered would reveal itself);
//! 5. signature rules are evaluated in rule order against the traversing
//!    packet: the first matching rule that carries `replace` rewrites the
//!    payload (once per packet); every other matching rule raises an alert
//!    event against the bytes actually being forwarded;
//! 6. the (possibly rewritten) packet is forwarded bit-identically —
//!    TTL, ports, addresses, and flags untouched.
//!
//! Checksum-invalid packets are tapped and forwarded like any others, with a
//! `bad-checksum` alert event. The gateway is a single-threaded state
//! machine: packets must arrive in timestamp order.

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::netmodel::{
    classify_direction, verify_checksums, Direction, FlowKey, NetConfig, Packet, Protocol, TcpFlags,
};
use crate::rulelang::{apply_replace, match_rule, RuleSet};
use crate::stores::Stores;

/// Rolling quota window: 24 hours of virtual time.
pub const QUOTA_WINDOW_US: u64 = 86_400_000_000;

/// Per-protocol outbound connection-initiation limits over a rolling
/// 24-hour window. A protocol without an entry is unlimited.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaPolicy {
    pub limits: BTreeMap<Protocol, u32>,
}

impl Default for QuotaPolicy {
    /// The deployed defaults: 15 TCP connections per honeypot per day,
    /// 20 UDP, ICMP unlimited.
    fn default() -> Self {
        QuotaPolicy {
            limits: [(Protocol::Tcp, 15), (Protocol::Udp, 20)]
                .into_iter()
                .collect(),
        }
    }
}

impl QuotaPolicy {
    pub fn unlimited() -> Self {
        QuotaPolicy {
            limits: BTreeMap::new(),
        }
    }

    pub fn limit(&self, p: Protocol) -> Option<u32> {
        self.limits.get(&p).copied()
    }

    /// Limits must be positive where present.
    pub fn validate(&self) -> Result<(), String> {
        for (proto, lim) in &self.limits {
            if *lim == 0 {
                return Err(format!("quota limit for {proto:?} must be positive"));
            }
        }
        Ok(())
    }
}

/// Mutable gateway state: the quota ledger, the seen-flow table, and the
/// virtual clock.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GatewayState {
    quota_ledger: BTreeMap<(Ipv4Addr, Protocol), Vec<u64>>,
    seen_flows: BTreeMap<FlowKey, u64>,
    clock: u64,
}

impl GatewayState {
    /// Fresh state: empty ledgers, no seen flows, clock at zero.
    pub fn new() -> Self {
        GatewayState::default()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn ledger_len(&self, host: Ipv4Addr, proto: Protocol) -> usize {
        self.quota_ledger.get(&(host, proto)).map_or(0, |v| v.len())
    }

    pub fn flow_seen(&self, key: &FlowKey) -> bool {
        self.seen_flows.contains_key(key)
    }

    /// Decide one initiation: allow iff the number of ledger entries for
    /// `(host, proto)` with timestamp strictly inside the rolling window
    /// `(t − 24h, t]` is below the limit; on allow, `t` joins the ledger.
    /// Protocols without a limit are always allowed and not ledgered.
    pub fn quota_check(
        &mut self,
        host: Ipv4Addr,
        proto: Protocol,
        t: u64,
        policy: &QuotaPolicy,
    ) -> bool {
        let Some(limit) = policy.limit(proto) else {
            return true;
        };
        let entries = self.quota_ledger.entry((host, proto)).or_default();
        debug_assert!(entries.last().is_none_or(|last| *last <= t));
        // The window is (t − 24h, t]; entries at or before its start can
        // never be counted again. Before 24h of virtual time everything is
        // inside the window.
        if let Some(window_start) = t.checked_sub(QUOTA_WINDOW_US) {
            entries.retain(|&ts| ts > window_start);
        }
        if (entries.len() as u32) < limit {
            entries.push(t);
            true
        } else {
            false
        }
    }
}

/// Kind of audit event, one line each in the append-only event store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Forwarded,
    Rewritten {
        sid: u32,
        offsets: Vec<usize>,
    },
    QuotaDropped {
        honeypot_ip: Ipv4Addr,
        protocol: Protocol,
    },
    DivertedCapture,
    Alert {
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sid: Option<u32>,
    },
}

/// One audit entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayEvent {
    pub time: u64,
    #[serde(flatten)]
    pub kind: EventKind,
    pub flow: FlowKey,
    pub direction: Direction,
    pub byte_count: u64,
}

impl GatewayEvent {
    pub fn new(p: &Packet, kind: EventKind, direction: Direction) -> Self {
        GatewayEvent {
            time: p.timestamp,
            kind,
            flow: p.flow_key(),
            direction,
            byte_count: p.wire_len(),
        }
    }

    pub fn alert(p: &Packet, direction: Direction, reason: String, sid: Option<u32>) -> Self {
        GatewayEvent::new(p, EventKind::Alert { reason, sid }, direction)
    }

    /// Sid associated with the event, for signature counting: rewrites and
    /// signature alerts carry one.
    pub fn sid(&self) -> Option<u32> {
        match &self.kind {
            EventKind::Rewritten { sid, .. } => Some(*sid),
            EventKind::Alert { sid, .. } => *sid,
            _ => None,
        }
    }
}

/// Why a packet was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Quota {
        honeypot_ip: Ipv4Addr,
        protocol: Protocol,
    },
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::Quota {
                honeypot_ip,
                protocol,
            } => write!(f, "quota exceeded for {honeypot_ip} ({protocol:?})"),
        }
    }
}

/// What the gateway did with a packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Forward(Packet),
    Drop(DropReason),
    DivertToCollector(Packet),
}

/// Decision plus the audit events the packet produced (also appended to the
/// event store).
#[derive(Debug, Clone)]
pub struct ProcessOutcome {
    pub decision: Decision,
    pub events: Vec<GatewayEvent>,
}

/// The honeywall itself: configuration, loaded rules, quota policy, and
/// mutable state.
#[derive(Debug, Clone)]
pub struct Gateway {
    cfg: NetConfig,
    rules: RuleSet,
    policy: QuotaPolicy,
    state: GatewayState,
}

impl Gateway {
    pub fn new(cfg: NetConfig, rules: RuleSet, policy: QuotaPolicy) -> Self {
        Gateway {
            cfg,
            rules,
            policy,
            state: GatewayState::new(),
        }
    }

    pub fn state(&self) -> &GatewayState {
        &self.state
    }

    pub fn cfg(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    /// Run one packet through the pipeline. Packets must be presented in
    /// timestamp order.
    pub fn process(&mut self, p: Packet, stores: &mut Stores) -> ProcessOutcome {
        assert!(
            self.state.clock <= p.timestamp,
            "gateway clock {} ahead of packet timestamp {}",
            self.state.clock,
            p.timestamp
        );
        self.state.clock = p.timestamp;

        let direction = classify_direction(&p, &self.cfg);
        let mut events = Vec::new();

        if !verify_checksums(&p) {
            events.push(GatewayEvent::alert(
                &p,
                direction,
                "bad-checksum".to_string(),
                None,
            ));
        }

        // Capture channel: diverted before anything else can touch it.
        if direction == Direction::CaptureChannel {
            events.push(GatewayEvent::new(&p, EventKind::DivertedCapture, direction));
            stores.packets.push(p.clone());
            stores.events.extend(events.iter().cloned());
            return ProcessOutcome {
                decision: Decision::DivertToCollector(p),
                events,
            };
        }

        // Outbound connection initiations face the quota.
        let fk = p.flow_key();
        let initiation = match p.protocol {
            Protocol::Tcp => {
                p.tcp_flags.contains(TcpFlags::SYN)
                    && !p.tcp_flags.contains(TcpFlags::ACK)
                    && !self.state.flow_seen(&fk)
            }
            Protocol::Udp => !self.state.flow_seen(&fk),
            _ => false,
        };
        if direction == Direction::Outbound
            && initiation
            && !self
                .state
                .quota_check(p.src_ip, p.protocol, p.timestamp, &self.policy)
        {
            events.push(GatewayEvent::new(
                &p,
                EventKind::QuotaDropped {
                    honeypot_ip: p.src_ip,
                    protocol: p.protocol,
                },
                direction,
            ));
            stores.packets.push(p.clone());
            stores.events.extend(events.iter().cloned());
            // A denied initiation does not mark the flow as seen: a retry of
            // the same connection is an initiation again.
            return ProcessOutcome {
                decision: Decision::Drop(DropReason::Quota {
                    honeypot_ip: p.src_ip,
                    protocol: p.protocol,
                }),
                events,
            };
        }
        self.state.seen_flows.entry(fk).or_insert(p.timestamp);

        // Rule evaluation against the bytes actually traversing: the first
        // match with replace rewrites, later matches only alert.
        let mut current = p;
        let mut rewritten = false;
        for rule in self.rules.rules() {
            if match_rule(rule, &current, &self.cfg).is_none() {
                continue;
            }
            if !rewritten && rule.replace.is_some() {
                let out = apply_replace(rule, current);
                current = out.packet;
                events.push(GatewayEvent::new(
                    &current,
                    EventKind::Rewritten {
                        sid: rule.sid,
                        offsets: out.offsets,
                    },
                    direction,
                ));
                rewritten = true;
            } else {
                events.push(GatewayEvent::alert(
                    &current,
                    direction,
                    format!("signature-match: {}", rule.msg),
                    Some(rule.sid),
                ));
            }
        }
        if !rewritten {
            events.push(GatewayEvent::new(&current, EventKind::Forwarded, direction));
        }

        stores.packets.push(current.clone());
        stores.events.extend(events.iter().cloned());
        ProcessOutcome {
            decision: Decision::Forward(current),
            events,
        }
    }
}
