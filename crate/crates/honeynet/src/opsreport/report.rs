//! Aggregate metrics computed offline from the store files: traffic volume,
//! distinct inbound sources, per-signature counts, per-service connection
//! attempts, time to first contact, quota drops, and token exfiltrations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tokens::{scan_for_tokens, Honeytoken};
use crate::netmodel::{classify_direction, Direction, FlowKey, NetConfig, Protocol};
use crate::stores::LoadedStores;

/// The metrics of one analysis run. All counts are non-negative by type;
/// `time_to_first_contact_us` is absent when nothing inbound was recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub total_packets: u64,
    /// Sum of nominal wire lengths (headers + payload) over the packet store.
    pub total_bytes: u64,
    /// Distinct source addresses of inbound packets.
    pub unique_source_ips: u64,
    /// Signature hits (rewrites and alerts) per sid.
    pub per_sid_counts: BTreeMap<u32, u64>,
    /// Distinct inbound TCP/UDP flows per honeypot service port.
    pub per_service_attempts: BTreeMap<u16, u64>,
    pub time_to_first_contact_us: Option<u64>,
    pub quota_drops: u64,
    /// Distinct tokens sighted anywhere in the evidence.
    pub tokens_exfiltrated: u64,
    /// Store lines that could not be decoded (reported, never fatal).
    pub corrupt_lines: u64,
}

/// Compute the report from loaded stores. Inbound classification uses the
/// run configuration stored alongside the evidence.
pub fn compute_report(stores: &LoadedStores, cfg: &NetConfig, tokens: &[Honeytoken]) -> Report {
    let mut total_bytes = 0u64;
    let mut inbound_sources = BTreeSet::new();
    let mut service_flows: BTreeMap<u16, BTreeSet<FlowKey>> = BTreeMap::new();
    let mut first_contact: Option<u64> = None;

    for p in &stores.packets {
        total_bytes += p.wire_len();
        if classify_direction(p, cfg) != Direction::Inbound {
            continue;
        }
        inbound_sources.insert(p.src_ip);
        first_contact = Some(match first_contact {
            Some(t) => t.min(p.timestamp),
            None => p.timestamp,
        });
        if cfg.honeypot_ips.contains(&p.dst_ip)
            && matches!(p.protocol, Protocol::Tcp | Protocol::Udp)
        {
            service_flows
                .entry(p.dst_port)
                .or_default()
                .insert(p.flow_key());
        }
    }

    let mut per_sid_counts: BTreeMap<u32, u64> = BTreeMap::new();
    let mut quota_drops = 0u64;
    for ev in &stores.events {
        if let Some(sid) = ev.sid() {
            *per_sid_counts.entry(sid).or_default() += 1;
        }
        if matches!(ev.kind, crate::honeywall::EventKind::QuotaDropped { .. }) {
            quota_drops += 1;
        }
    }

    let sighted: BTreeSet<String> = scan_for_tokens(stores, tokens)
        .into_iter()
        .map(|h| h.token_id)
        .collect();

    Report {
        total_packets: stores.packets.len() as u64,
        total_bytes,
        unique_source_ips: inbound_sources.len() as u64,
        per_sid_counts,
        per_service_attempts: service_flows
            .into_iter()
            .map(|(port, flows)| (port, flows.len() as u64))
            .collect(),
        time_to_first_contact_us: first_contact,
        quota_drops,
        tokens_exfiltrated: sighted.len() as u64,
        corrupt_lines: stores.corrupt_lines,
    }
}

impl Report {
    /// Human-readable two-column table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| {
            out.push_str(&format!("{k:<28} {v}\n"));
        };
        row("total packets", self.total_packets.to_string());
        row("total bytes", self.total_bytes.to_string());
        row(
            "unique inbound source IPs",
            self.unique_source_ips.to_string(),
        );
        row(
            "time to first contact",
            match self.time_to_first_contact_us {
                Some(us) => format!("{:.6} s", us as f64 / 1e6),
                None => "none".to_string(),
            },
        );
        row("quota drops", self.quota_drops.to_string());
        row("tokens exfiltrated", self.tokens_exfiltrated.to_string());
        row("corrupt store lines", self.corrupt_lines.to_string());
        if self.per_sid_counts.is_empty() {
            row("signature hits", "none".to_string());
        } else {
            for (sid, n) in &self.per_sid_counts {
                row(&format!("signature hits (sid {sid})"), n.to_string());
            }
        }
        if self.per_service_attempts.is_empty() {
            row("service attempts", "none".to_string());
        } else {
            for (port, n) in &self.per_service_attempts {
                row(&format!("service attempts (port {port})"), n.to_string());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::TcpFlags;
    use crate::testutil::{reference_config, tcp_packet};
    use std::net::Ipv4Addr;

    const HP: Ipv4Addr = Ipv4Addr::new(10, 1, 0, 5);

    #[test]
    fn empty_stores_give_zero_report() {
        let cfg = reference_config();
        let report = compute_report(&LoadedStores::default(), &cfg, &[]);
        assert_eq!(report.total_packets, 0);
        assert_eq!(report.total_bytes, 0);
        assert_eq!(report.unique_source_ips, 0);
        assert_eq!(report.time_to_first_contact_us, None);
        assert!(report.per_sid_counts.is_empty());
        assert!(report.per_service_attempts.is_empty());
    }

    #[test]
    fn repeated_source_counts_once() {
        let cfg = reference_config();
        let mut stores = LoadedStores::default();
        let src = Ipv4Addr::new(203, 0, 113, 9);
        for i in 0..1_000u64 {
            stores.packets.push(tcp_packet(
                src,
                HP,
                (1_000 + (i % 60_000)) as u16,
                80,
                TcpFlags::SYN,
                vec![],
                i,
            ));
        }
        let report = compute_report(&stores, &cfg, &[]);
        assert_eq!(report.unique_source_ips, 1);
        assert_eq!(report.total_packets, 1_000);
        assert_eq!(report.time_to_first_contact_us, Some(0));
    }

    #[test]
    fn service_attempts_count_distinct_flows() {
        let cfg = reference_config();
        let mut stores = LoadedStores::default();
        let src = Ipv4Addr::new(203, 0, 113, 9);
        // Two distinct flows to port 80, the second repeated.
        for (port, reps) in [(5_000u16, 1), (5_001, 3)] {
            for i in 0..reps {
                stores
                    .packets
                    .push(tcp_packet(src, HP, port, 80, TcpFlags::SYN, vec![], i));
            }
        }
        let report = compute_report(&stores, &cfg, &[]);
        assert_eq!(report.per_service_attempts.get(&80), Some(&2));
    }

    #[test]
    fn report_json_round_trips() {
        let cfg = reference_config();
        let mut stores = LoadedStores::default();
        stores.packets.push(tcp_packet(
            "203.0.113.1".parse().unwrap(),
            HP,
            1,
            80,
            TcpFlags::SYN,
            vec![1, 2, 3],
            42,
        ));
        let report = compute_report(&stores, &cfg, &[]);
        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(report.render_table().contains("total packets"));
    }
}
