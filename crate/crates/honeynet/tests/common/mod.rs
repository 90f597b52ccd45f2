//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)]

use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use honeynet::netmodel::{recompute_checksums, MacAddr, NetConfig, Packet, Protocol, TcpFlags};
use honeynet::opsreport::RunConfig;
use honeynet::simnet::Scenario;

/// Repository root (two levels up from the crate manifest).
pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("repo root")
}

pub fn rules_path(name: &str) -> PathBuf {
    repo_root().join("rules").join(name)
}

pub fn scenario_path(name: &str) -> PathBuf {
    repo_root().join("scenarios").join(name)
}

pub fn config_path() -> PathBuf {
    repo_root().join("config/reference.json")
}

pub fn load_reference_config() -> RunConfig {
    RunConfig::load(&config_path()).expect("reference config loads")
}

pub fn load_rules(name: &str) -> honeynet::rulelang::RuleSet {
    let text = std::fs::read_to_string(rules_path(name)).expect("rules file");
    honeynet::rulelang::parse_ruleset(&text).expect("rules parse")
}

pub fn load_scenario(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_path(name)).expect("scenario file");
    serde_json::from_str(&text).expect("scenario parses")
}

/// splitmix64, for deterministic test-side generators.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }
}

#[allow(clippy::too_many_arguments)]
pub fn packet(
    src_ip: Ipv4Addr,
    dst_ip: Ipv4Addr,
    protocol: Protocol,
    src_port: u16,
    dst_port: u16,
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

/// FNV-1a over an iterator of byte chunks; used for trace-hash comparisons.
pub fn fnv1a<'a>(chunks: impl Iterator<Item = &'a [u8]>) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for chunk in chunks {
        for b in chunk {
            hash ^= u64::from(*b);
            hash = hash.wrapping_mul(0x1000_0000_01B3);
        }
    }
    hash
}

pub fn reference_net() -> NetConfig {
    load_reference_config().net
}
