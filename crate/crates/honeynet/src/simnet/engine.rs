//! The event loop: a time-ordered queue of pending work (scripted steps,
//! packets entering the gateway, deliveries) drained in (time, sequence)
//! order. Single-threaded, no wall clock, no I/O — determinism is the whole
//! point of the harness.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use super::{EventLog, HostSpec, Role, Scenario, ScenarioError, SimEventKind, StepAction};
use crate::capture::{decode_record, Collector, RecType, Sensor};
use crate::honeywall::{Decision, Gateway, QuotaPolicy};
use crate::netmodel::{recompute_checksums, MacAddr, NetConfig, Packet, Protocol, TcpFlags};
use crate::opsreport::{plant_tokens, Honeytoken};
use crate::rulelang::RuleSet;
use crate::stores::Stores;

/// Wire latency between any two hosts across the bridge.
pub const LINK_DELAY_US: u64 = 150;
/// Service think time before a banner goes out.
pub const SERVICE_DELAY_US: u64 = 1_000;

const EXPLOIT_FILLER: u8 = 0x90;
const EPHEMERAL_BASE: u16 = 40_000;

/// splitmix64; drives scripted scan jitter and nothing else.
struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

enum Pending {
    Step(usize),
    Send(Packet),
    Deliver(Packet),
}

struct HostState {
    spec: HostSpec,
    compromised: bool,
    planted: Vec<Honeytoken>,
    sensor: Option<Sensor>,
    next_port: u16,
    pid: u32,
}

/// Final role/compromise state of one host.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HostSummary {
    pub role: Role,
    pub compromised: bool,
}

/// Everything a scenario run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub log: EventLog,
    pub stores: Stores,
    pub hosts: BTreeMap<Ipv4Addr, HostSummary>,
}

impl RunOutput {
    pub fn compromised(&self, ip: Ipv4Addr) -> bool {
        self.hosts.get(&ip).is_some_and(|h| h.compromised)
    }

    pub fn compromised_victims(&self) -> usize {
        self.hosts
            .values()
            .filter(|h| h.role == Role::ExternalVictim && h.compromised)
            .count()
    }
}

struct Engine<'a> {
    scenario: &'a Scenario,
    queue: BTreeMap<(u64, u64), Pending>,
    next_seq: u64,
    hosts: BTreeMap<Ipv4Addr, HostState>,
    gateway: Gateway,
    collector: Collector,
    stores: Stores,
    log: EventLog,
    rng: SplitMix64,
}

/// Execute a scenario: validate, plant tokens, then drain the queue. Every
/// inter-host packet traverses the gateway exactly once.
pub fn run_scenario(
    scenario: &Scenario,
    cfg: &NetConfig,
    rules: &RuleSet,
    policy: &QuotaPolicy,
    tokens: &[Honeytoken],
) -> Result<RunOutput, ScenarioError> {
    scenario.validate(cfg, tokens)?;

    let mut hosts = BTreeMap::new();
    for (idx, spec) in scenario.hosts.iter().enumerate() {
        let mut planted = Vec::new();
        if spec.role == Role::Honeypot {
            let own: Vec<Honeytoken> = tokens
                .iter()
                .filter(|t| spec.tokens.contains(&t.id))
                .cloned()
                .collect();
            plant_tokens(&mut planted, &own)?;
        }
        hosts.insert(
            spec.ip,
            HostState {
                compromised: false,
                planted,
                sensor: (spec.role == Role::Honeypot).then(|| Sensor::new(spec.ip, cfg)),
                next_port: EPHEMERAL_BASE,
                pid: 4_000 + idx as u32,
                spec: spec.clone(),
            },
        );
    }

    let mut engine = Engine {
        scenario,
        queue: BTreeMap::new(),
        next_seq: 0,
        hosts,
        gateway: Gateway::new(cfg.clone(), rules.clone(), policy.clone()),
        collector: Collector::new(),
        stores: Stores::default(),
        log: EventLog::default(),
        rng: SplitMix64::new(scenario.seed),
    };
    for (i, step) in scenario.steps.iter().enumerate() {
        engine.schedule(step.at, Pending::Step(i));
    }
    Ok(engine.run())
}

#[allow(clippy::too_many_arguments)]
fn build_packet(
    src_ip: Ipv4Addr,
    src_port: u16,
    dst_ip: Ipv4Addr,
    dst_port: u16,
    protocol: Protocol,
    flags: TcpFlags,
    payload: Vec<u8>,
    timestamp: u64,
) -> Packet {
    recompute_checksums(Packet {
        src_mac: MacAddr::from_ip(src_ip),
        dst_mac: MacAddr::from_ip(dst_ip),
        src_ip,
        dst_ip,
        protocol,
        src_port,
        dst_port,
        tcp_flags: flags,
        ip_checksum: 0,
        l4_checksum: 0,
        payload,
        ttl: 64,
        timestamp,
    })
}

impl Engine<'_> {
    fn schedule(&mut self, time: u64, pending: Pending) {
        self.queue.insert((time, self.next_seq), pending);
        self.next_seq += 1;
    }

    fn run(mut self) -> RunOutput {
        while let Some(((time, _), pending)) = self.queue.pop_first() {
            match pending {
                Pending::Step(i) => self.exec_step(time, i),
                Pending::Send(p) => self.route(time, p),
                Pending::Deliver(p) => self.deliver(time, p),
            }
        }
        RunOutput {
            log: self.log,
            stores: self.stores,
            hosts: self
                .hosts
                .into_iter()
                .map(|(ip, h)| {
                    (
                        ip,
                        HostSummary {
                            role: h.spec.role,
                            compromised: h.compromised,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Pass one packet through the gateway and act on its decision.
    fn route(&mut self, now: u64, p: Packet) {
        let before = self.stores.events.len();
        let outcome = self.gateway.process(p, &mut self.stores);
        match outcome.decision {
            Decision::Forward(p) => {
                self.mirror_events(now, before);
                if self.hosts.contains_key(&p.dst_ip) {
                    self.schedule(now + LINK_DELAY_US, Pending::Deliver(p));
                }
            }
            Decision::DivertToCollector(p) => {
                self.collector.ingest(&p, &mut self.stores);
                self.mirror_events(now, before);
            }
            Decision::Drop(_) => self.mirror_events(now, before),
        }
    }

    /// Mirror freshly appended store events into the unified log.
    fn mirror_events(&mut self, now: u64, from: usize) {
        let new: Vec<_> = self.stores.events[from..].to_vec();
        for ev in new {
            self.log.push(now, SimEventKind::Gateway(ev));
        }
    }

    fn deliver(&mut self, now: u64, p: Packet) {
        self.log.push(
            now,
            SimEventKind::Delivered {
                flow: p.flow_key(),
                byte_count: p.wire_len(),
            },
        );
        let marker = &self.scenario.exploit_marker;
        let Some(host) = self.hosts.get_mut(&p.dst_ip) else {
            return;
        };

        // Marker-based compromise: the payload arrived with the exploit
        // bytes intact.
        if !marker.is_empty()
            && payload_contains(&p.payload, marker)
            && matches!(host.spec.role, Role::Honeypot | Role::ExternalVictim)
            && !host.compromised
        {
            host.compromised = true;
            self.log
                .push(now, SimEventKind::Compromised { host: p.dst_ip });
        }

        // Banner-level service emulation: a connection attempt to an open
        // honeypot port gets the banner back.
        if host.spec.role == Role::Honeypot
            && p.protocol == Protocol::Tcp
            && p.tcp_flags.contains(TcpFlags::SYN)
            && !p.tcp_flags.contains(TcpFlags::ACK)
        {
            if let Some(service) = host.spec.services.get(&p.dst_port) {
                let at = now + SERVICE_DELAY_US;
                let reply = build_packet(
                    p.dst_ip,
                    p.dst_port,
                    p.src_ip,
                    p.src_port,
                    Protocol::Tcp,
                    TcpFlags::PSH | TcpFlags::ACK,
                    service.banner().to_vec(),
                    at,
                );
                self.schedule(at, Pending::Send(reply));
            }
        }
    }

    fn alloc_port(&mut self, ip: Ipv4Addr) -> u16 {
        let host = self.hosts.get_mut(&ip).expect("validated host");
        let port = host.next_port;
        host.next_port = if host.next_port >= 60_000 {
            EPHEMERAL_BASE
        } else {
            host.next_port + 1
        };
        port
    }

    /// Honeypots only send attacker traffic once compromised.
    fn sender_gated(&mut self, now: u64, index: usize, from: Ipv4Addr) -> bool {
        let host = self.hosts.get(&from).expect("validated host");
        if host.spec.role == Role::Honeypot && !host.compromised {
            self.log.push(
                now,
                SimEventKind::StepSkipped {
                    index,
                    reason: format!("{from} is not compromised"),
                },
            );
            return true;
        }
        false
    }

    fn emit_capture(
        &mut self,
        now: u64,
        host_ip: Ipv4Addr,
        rec_type: RecType,
        fd: u32,
        data: &[u8],
    ) {
        let host = self.hosts.get_mut(&host_ip).expect("validated honeypot");
        let pid = host.pid;
        let sensor = host.sensor.as_mut().expect("honeypots carry a sensor");
        let packet = sensor
            .emit(rec_type, pid, 0, fd, "bash", data, now)
            .expect("scripted capture data fits a packet");
        let counter = decode_record(&packet.payload)
            .expect("sensor emits well-formed records")
            .counter;
        self.log.push(
            now,
            SimEventKind::CaptureEmitted {
                host: host_ip,
                counter,
                encoded: packet.payload.clone(),
            },
        );
        self.schedule(now, Pending::Send(packet));
    }

    fn exec_step(&mut self, now: u64, index: usize) {
        match &self.scenario.steps[index].action.clone() {
            StepAction::Connect { from, to, dst_port } => {
                if self.sender_gated(now, index, *from) {
                    return;
                }
                let sport = self.alloc_port(*from);
                let p = build_packet(
                    *from,
                    sport,
                    *to,
                    *dst_port,
                    Protocol::Tcp,
                    TcpFlags::SYN,
                    vec![],
                    now,
                );
                self.schedule(now, Pending::Send(p));
            }
            StepAction::Send {
                from,
                to,
                dst_port,
                payload,
            } => {
                if self.sender_gated(now, index, *from) {
                    return;
                }
                let bytes = payload.to_bytes().expect("validated payload");
                let sport = self.alloc_port(*from);
                let p = build_packet(
                    *from,
                    sport,
                    *to,
                    *dst_port,
                    Protocol::Tcp,
                    TcpFlags::PSH | TcpFlags::ACK,
                    bytes,
                    now,
                );
                self.schedule(now, Pending::Send(p));
            }
            StepAction::Exploit {
                from,
                to,
                dst_port,
                prefix_len,
            } => {
                if self.sender_gated(now, index, *from) {
                    return;
                }
                let mut payload = vec![EXPLOIT_FILLER; *prefix_len];
                payload.extend_from_slice(&self.scenario.exploit_marker);
                let sport = self.alloc_port(*from);
                let p = build_packet(
                    *from,
                    sport,
                    *to,
                    *dst_port,
                    Protocol::Tcp,
                    TcpFlags::PSH | TcpFlags::ACK,
                    payload,
                    now,
                );
                self.schedule(now, Pending::Send(p));
            }
            StepAction::Scan {
                from,
                targets,
                dst_port,
                payload,
                spacing_us,
                jitter_us,
            } => {
                if self.sender_gated(now, index, *from) {
                    return;
                }
                let bytes = payload.to_bytes().expect("validated payload");
                for (i, target) in targets.targets().into_iter().enumerate() {
                    let jitter = if *jitter_us > 0 {
                        self.rng.next_u64() % (*jitter_us + 1)
                    } else {
                        0
                    };
                    let at = now + i as u64 * spacing_us + jitter;
                    let sport = self.alloc_port(*from);
                    let p = build_packet(
                        *from,
                        sport,
                        target,
                        *dst_port,
                        Protocol::Tcp,
                        TcpFlags::SYN,
                        bytes.clone(),
                        at,
                    );
                    self.schedule(at, Pending::Send(p));
                }
            }
            StepAction::Command {
                host,
                input,
                output,
            } => {
                if !self.hosts[host].compromised {
                    self.log.push(
                        now,
                        SimEventKind::StepSkipped {
                            index,
                            reason: format!("{host} is not compromised"),
                        },
                    );
                    return;
                }
                self.emit_capture(now, *host, RecType::Input, 0, input.as_bytes());
                if let Some(out) = output {
                    self.emit_capture(now, *host, RecType::Output, 1, out.as_bytes());
                }
            }
            StepAction::Exfiltrate {
                host,
                token,
                to,
                dst_port,
                capture_read,
            } => {
                if !self.hosts[host].compromised {
                    self.log.push(
                        now,
                        SimEventKind::StepSkipped {
                            index,
                            reason: format!("{host} is not compromised"),
                        },
                    );
                    return;
                }
                let t = self.hosts[host]
                    .planted
                    .iter()
                    .find(|t| &t.id == token)
                    .cloned()
                    .expect("validated token");
                if *capture_read {
                    let keystrokes = format!("cat {}\n", t.planted_path);
                    self.emit_capture(now, *host, RecType::Input, 0, keystrokes.as_bytes());
                    self.emit_capture(now, *host, RecType::Output, 1, &t.marker);
                }
                let sport = self.alloc_port(*host);
                let p = build_packet(
                    *host,
                    sport,
                    *to,
                    *dst_port,
                    Protocol::Tcp,
                    TcpFlags::PSH | TcpFlags::ACK,
                    t.marker.clone(),
                    now,
                );
                self.schedule(now, Pending::Send(p));
            }
        }
    }
}

fn payload_contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.len() >= needle.len() && haystack.windows(needle.len()).any(|w| w == needle)
}
