//! Shared fixtures for unit tests.

use crate::netmodel::{MacAddr, NetConfig, Packet, Protocol, TcpFlags};
use std::net::Ipv4Addr;

/// The reference deployment: a 64-address subnet, two honeypots, and a
/// collector outside the subnet listening on the capture port.
pub fn reference_config() -> NetConfig {
    NetConfig {
        honeynet_subnet: "10.1.0.0/26".parse().unwrap(),
        collector_ip: Ipv4Addr::new(192, 0, 2, 9),
        capture_port: 1101,
        honeypot_ips: [Ipv4Addr::new(10, 1, 0, 5), Ipv4Addr::new(10, 1, 0, 6)]
            .into_iter()
            .collect(),
    }
}

/// A TCP packet between two fixed hosts; adjust fields per test.
pub fn tcp_packet(
    src_ip: Ipv4Addr,
    dst_ip: Ipv4Addr,
    src_port: u16,
    dst_port: u16,
    flags: TcpFlags,
    payload: Vec<u8>,
    timestamp: u64,
) -> Packet {
    crate::netmodel::recompute_checksums(Packet {
        src_mac: MacAddr::from_ip(src_ip),
        dst_mac: MacAddr::from_ip(dst_ip),
        src_ip,
        dst_ip,
        protocol: Protocol::Tcp,
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

pub fn udp_packet(
    src_ip: Ipv4Addr,
    dst_ip: Ipv4Addr,
    src_port: u16,
    dst_port: u16,
    payload: Vec<u8>,
    timestamp: u64,
) -> Packet {
    crate::netmodel::recompute_checksums(Packet {
        src_mac: MacAddr::from_ip(src_ip),
        dst_mac: MacAddr::from_ip(dst_ip),
        src_ip,
        dst_ip,
        protocol: Protocol::Udp,
        src_port,
        dst_port,
        tcp_flags: TcpFlags::empty(),
        ip_checksum: 0,
        l4_checksum: 0,
        payload,
        ttl: 64,
        timestamp,
    })
}

/// The verbatim rule text from the deployed signature set (x86 stealth-NOOP
/// shellcode rewrite), spanning multiple source lines.
pub const SHELLCODE_RULE_TEXT: &str = concat!(
    "alert ip $HONEYNET any -> $EXTERNAL_NET any\n",
    "(msg:\"SHELLCODE x86 stealth NOOP\"; rev:6; sid:651;\n",
    "content:\"|EB 02 EB 02 EB 02|\";\n",
    "replace:\"|24 00 99 DE 6C 3E|\";)\n",
);

pub const SHELLCODE_CONTENT: [u8; 6] = [0xEB, 0x02, 0xEB, 0x02, 0xEB, 0x02];
pub const SHELLCODE_REPLACE: [u8; 6] = [0x24, 0x00, 0x99, 0xDE, 0x6C, 0x3E];

pub use arb::arb_packet;

mod arb {
    use super::*;
    use proptest::prelude::*;

    fn arb_protocol() -> impl Strategy<Value = Protocol> {
        prop_oneof![
            Just(Protocol::Tcp),
            Just(Protocol::Udp),
            Just(Protocol::Icmp),
            Just(Protocol::Other),
        ]
    }

    prop_compose! {
        pub fn arb_packet()(
            src in any::<u32>(),
            dst in any::<u32>(),
            protocol in arb_protocol(),
            src_port in any::<u16>(),
            dst_port in any::<u16>(),
            syn in any::<bool>(),
            ack in any::<bool>(),
            psh in any::<bool>(),
            payload in proptest::collection::vec(any::<u8>(), 0..256),
            ttl in any::<u8>(),
            timestamp in any::<u64>(),
        ) -> Packet {
            let mut tcp_flags = TcpFlags::empty();
            if protocol == Protocol::Tcp {
                if syn { tcp_flags = tcp_flags | TcpFlags::SYN; }
                if ack { tcp_flags = tcp_flags | TcpFlags::ACK; }
                if psh { tcp_flags = tcp_flags | TcpFlags::PSH; }
            }
            Packet {
                src_mac: MacAddr::from_ip(Ipv4Addr::from(src)),
                dst_mac: MacAddr::from_ip(Ipv4Addr::from(dst)),
                src_ip: Ipv4Addr::from(src),
                dst_ip: Ipv4Addr::from(dst),
                protocol,
                src_port,
                dst_port,
                tcp_flags,
                ip_checksum: 0,
                l4_checksum: 0,
                payload,
                ttl,
                timestamp,
            }
        }
    }
}
