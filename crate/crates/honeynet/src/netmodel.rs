//! Packet representation, addressing, flow identity, traffic-direction
//! classification, and checksum arithmetic.
//!
//! The frame model is deliberately simplified: IPv4 only, no options, no
//! fragmentation. The mechanisms built on top (signature rewriting, quotas,
//! capture diversion) operate on payload bytes and 5-tuples, so nothing more
//! is needed.
//!
//! Checksum coverage is fixed and documented here because rewritten packets
//! must stay deliverable:
//! - `ip_checksum` covers a 12-byte serialization of the header fields:
//!   `src_ip(4) dst_ip(4) protocol_number(1) ttl(1) payload_len_be(2)`.
//! - `l4_checksum` covers the classic pseudo-header
//!   `src_ip(4) dst_ip(4) 0x00 protocol_number(1) payload_len_be(2)`
//!   followed by the payload bytes.
//!
//! Both are RFC 1071 16-bit one's-complement sums. Protocol numbers are the
//! IANA values (TCP 6, UDP 17, ICMP 1) with 0 standing in for other
//! IP-carried protocols.
//!
//! Trace format (shared with `simnet` and `opsreport`): JSON Lines, one
//! packet per line, field names exactly as in [`Packet`], payload as a
//! lowercase hex string, timestamps as integer microseconds of virtual time.

use std::collections::BTreeSet;
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest payload a packet may carry (65 535 minus 20 IP + 20 TCP header bytes).
pub const MAX_PAYLOAD: usize = 65_495;

/// A 48-bit link-layer address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    /// Deterministic locally-administered MAC derived from an IPv4 address.
    pub fn from_ip(ip: Ipv4Addr) -> Self {
        let o = ip.octets();
        MacAddr([0x02, 0x00, o[0], o[1], o[2], o[3]])
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            m[0], m[1], m[2], m[3], m[4], m[5]
        )
    }
}

impl FromStr for MacAddr {
    type Err = PacketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 6];
        let mut parts = s.split(':');
        for slot in &mut out {
            let p = parts.next().ok_or(PacketError::BadMac)?;
            if p.len() != 2 {
                return Err(PacketError::BadMac);
            }
            *slot = u8::from_str_radix(p, 16).map_err(|_| PacketError::BadMac)?;
        }
        if parts.next().is_some() {
            return Err(PacketError::BadMac);
        }
        Ok(MacAddr(out))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Transport protocol of a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
    /// Any other IP-carried protocol.
    Other,
}

impl Protocol {
    /// Wire number used in the checksum serializations.
    pub fn number(self) -> u8 {
        match self {
            Protocol::Tcp => 6,
            Protocol::Udp => 17,
            Protocol::Icmp => 1,
            Protocol::Other => 0,
        }
    }
}

/// TCP flag bitset. Empty for non-TCP packets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TcpFlags(u8);

impl TcpFlags {
    pub const SYN: TcpFlags = TcpFlags(1 << 0);
    pub const ACK: TcpFlags = TcpFlags(1 << 1);
    pub const FIN: TcpFlags = TcpFlags(1 << 2);
    pub const RST: TcpFlags = TcpFlags(1 << 3);
    pub const PSH: TcpFlags = TcpFlags(1 << 4);

    pub fn empty() -> Self {
        TcpFlags(0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, other: TcpFlags) -> bool {
        self.0 & other.0 == other.0
    }
}

impl std::ops::BitOr for TcpFlags {
    type Output = TcpFlags;
    fn bitor(self, rhs: TcpFlags) -> TcpFlags {
        TcpFlags(self.0 | rhs.0)
    }
}

const FLAG_NAMES: [(TcpFlags, &str); 5] = [
    (TcpFlags::SYN, "SYN"),
    (TcpFlags::ACK, "ACK"),
    (TcpFlags::FIN, "FIN"),
    (TcpFlags::RST, "RST"),
    (TcpFlags::PSH, "PSH"),
];

impl Serialize for TcpFlags {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let names: Vec<&str> = FLAG_NAMES
            .iter()
            .filter(|(f, _)| self.contains(*f))
            .map(|(_, n)| *n)
            .collect();
        names.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TcpFlags {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        let mut flags = TcpFlags::empty();
        for n in names {
            let f = FLAG_NAMES
                .iter()
                .find(|(_, name)| *name == n)
                .map(|(f, _)| *f)
                .ok_or_else(|| D::Error::custom(format!("unknown tcp flag {n:?}")))?;
            flags = flags | f;
        }
        Ok(flags)
    }
}

/// Serde adapter: byte vectors as lowercase hex strings.
pub mod hex_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_hex(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        from_hex(&s).map_err(D::Error::custom)
    }
}

/// Lowercase hex encoding of a byte slice.
pub fn to_hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Decode a hex string (upper or lower case, no separators).
pub fn from_hex(s: &str) -> Result<Vec<u8>, PacketError> {
    if !s.len().is_multiple_of(2) {
        return Err(PacketError::BadHex);
    }
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(s.len() / 2);
    for pair in bytes.chunks_exact(2) {
        let hi = (pair[0] as char).to_digit(16).ok_or(PacketError::BadHex)?;
        let lo = (pair[1] as char).to_digit(16).ok_or(PacketError::BadHex)?;
        out.push((hi * 16 + lo) as u8);
    }
    Ok(out)
}

/// One simplified L2/L3/L4 frame — the unit flowing through simulator and
/// gateway, and one line of the packet trace format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub src_mac: MacAddr,
    pub dst_mac: MacAddr,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub protocol: Protocol,
    pub src_port: u16,
    pub dst_port: u16,
    pub tcp_flags: TcpFlags,
    pub ip_checksum: u16,
    pub l4_checksum: u16,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
    pub ttl: u8,
    /// Virtual time in microseconds since scenario start.
    pub timestamp: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PacketError {
    #[error("payload length {0} exceeds maximum {MAX_PAYLOAD}")]
    PayloadTooLong(usize),
    #[error("non-TCP packet carries TCP flags")]
    FlagsOnNonTcp,
    #[error("malformed MAC address")]
    BadMac,
    #[error("malformed hex string")]
    BadHex,
}

impl Packet {
    /// Structural validity: payload bound and flags-only-on-TCP.
    pub fn validate(&self) -> Result<(), PacketError> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(PacketError::PayloadTooLong(self.payload.len()));
        }
        if self.protocol != Protocol::Tcp && !self.tcp_flags.is_empty() {
            return Err(PacketError::FlagsOnNonTcp);
        }
        Ok(())
    }

    /// Five-tuple flow identity (order-sensitive: A→B ≠ B→A).
    pub fn flow_key(&self) -> FlowKey {
        flow_key(self)
    }

    /// Nominal on-the-wire length used for byte accounting: 14 (Ethernet)
    /// + 20 (IPv4) + transport header (TCP 20, UDP/ICMP 8, other 0) + payload.
    pub fn wire_len(&self) -> u64 {
        let l4 = match self.protocol {
            Protocol::Tcp => 20,
            Protocol::Udp | Protocol::Icmp => 8,
            Protocol::Other => 0,
        };
        14 + 20 + l4 + self.payload.len() as u64
    }
}

/// Order-sensitive five-tuple identifying a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub protocol: Protocol,
    pub src_port: u16,
    pub dst_port: u16,
}

/// Projection of the five tuple fields.
pub fn flow_key(p: &Packet) -> FlowKey {
    FlowKey {
        src_ip: p.src_ip,
        dst_ip: p.dst_ip,
        protocol: p.protocol,
        src_port: p.src_port,
        dst_port: p.dst_port,
    }
}

/// Traffic direction of a packet relative to the honeynet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Inbound,
    Outbound,
    Internal,
    CaptureChannel,
    ExternalTransit,
}

/// An IPv4 CIDR block, e.g. `10.1.0.0/26`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ipv4Cidr {
    pub base: Ipv4Addr,
    pub prefix: u8,
}

impl Ipv4Cidr {
    pub fn new(base: Ipv4Addr, prefix: u8) -> Result<Self, ConfigError> {
        if prefix > 32 {
            return Err(ConfigError::BadPrefix(prefix));
        }
        Ok(Ipv4Cidr { base, prefix })
    }

    fn mask(&self) -> u32 {
        if self.prefix == 0 {
            0
        } else {
            u32::MAX << (32 - self.prefix)
        }
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        (u32::from(ip) & self.mask()) == (u32::from(self.base) & self.mask())
    }

    /// Number of addresses in the block.
    pub fn size(&self) -> u64 {
        1u64 << (32 - self.prefix)
    }

    /// Addresses of the block in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = Ipv4Addr> {
        let start = u32::from(self.base) & self.mask();
        let n = self.size();
        (0..n).map(move |i| Ipv4Addr::from(start + i as u32))
    }
}

impl fmt::Display for Ipv4Cidr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base, self.prefix)
    }
}

impl FromStr for Ipv4Cidr {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ip, prefix) = s.split_once('/').ok_or(ConfigError::BadCidr)?;
        let base: Ipv4Addr = ip.parse().map_err(|_| ConfigError::BadCidr)?;
        let prefix: u8 = prefix.parse().map_err(|_| ConfigError::BadCidr)?;
        Ipv4Cidr::new(base, prefix)
    }
}

impl Serialize for Ipv4Cidr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ipv4Cidr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("malformed CIDR block")]
    BadCidr,
    #[error("CIDR prefix {0} out of range 0..=32")]
    BadPrefix(u8),
    #[error("honeypot {0} lies outside the honeynet subnet")]
    HoneypotOutsideSubnet(Ipv4Addr),
    #[error("collector address {0} must lie outside the honeynet subnet")]
    CollectorInsideSubnet(Ipv4Addr),
}

/// Static addressing of the monitored network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub honeynet_subnet: Ipv4Cidr,
    pub collector_ip: Ipv4Addr,
    pub capture_port: u16,
    pub honeypot_ips: BTreeSet<Ipv4Addr>,
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for ip in &self.honeypot_ips {
            if !self.honeynet_subnet.contains(*ip) {
                return Err(ConfigError::HoneypotOutsideSubnet(*ip));
            }
        }
        if self.honeynet_subnet.contains(self.collector_ip) {
            return Err(ConfigError::CollectorInsideSubnet(self.collector_ip));
        }
        Ok(())
    }

    pub fn in_honeynet(&self, ip: Ipv4Addr) -> bool {
        self.honeynet_subnet.contains(ip)
    }
}

/// Classify a packet's direction under a configuration. Total and
/// deterministic; the capture channel takes precedence over every other
/// class so collector-bound records are never mistaken for ordinary traffic.
pub fn classify_direction(p: &Packet, cfg: &NetConfig) -> Direction {
    if p.protocol == Protocol::Udp && p.dst_ip == cfg.collector_ip && p.dst_port == cfg.capture_port
    {
        return Direction::CaptureChannel;
    }
    match (cfg.in_honeynet(p.src_ip), cfg.in_honeynet(p.dst_ip)) {
        (true, false) => Direction::Outbound,
        (false, true) => Direction::Inbound,
        (true, true) => Direction::Internal,
        (false, false) => Direction::ExternalTransit,
    }
}

/// RFC 1071 internet checksum: one's complement of the one's-complement
/// 16-bit sum, big-endian words, odd trailing byte padded with zero.
pub fn internet_checksum(data: &[u8]) -> u16 {
    let mut sum = 0u32;
    let mut chunks = data.chunks_exact(2);
    for pair in &mut chunks {
        sum += u32::from(u16::from_be_bytes([pair[0], pair[1]]));
    }
    if let [last] = chunks.remainder() {
        sum += u32::from(*last) << 8;
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

fn ip_header_bytes(p: &Packet) -> [u8; 12] {
    let mut buf = [0u8; 12];
    buf[0..4].copy_from_slice(&p.src_ip.octets());
    buf[4..8].copy_from_slice(&p.dst_ip.octets());
    buf[8] = p.protocol.number();
    buf[9] = p.ttl;
    buf[10..12].copy_from_slice(&(p.payload.len() as u16).to_be_bytes());
    buf
}

fn l4_bytes(p: &Packet) -> Vec<u8> {
    let mut buf = Vec::with_capacity(12 + p.payload.len());
    buf.extend_from_slice(&p.src_ip.octets());
    buf.extend_from_slice(&p.dst_ip.octets());
    buf.push(0);
    buf.push(p.protocol.number());
    buf.extend_from_slice(&(p.payload.len() as u16).to_be_bytes());
    buf.extend_from_slice(&p.payload);
    buf
}

/// Return the packet with both checksum fields recomputed; every other field
/// is untouched. Idempotent.
pub fn recompute_checksums(mut p: Packet) -> Packet {
    p.ip_checksum = internet_checksum(&ip_header_bytes(&p));
    p.l4_checksum = internet_checksum(&l4_bytes(&p));
    p
}

/// True iff both stored checksums match a fresh recomputation.
pub fn verify_checksums(p: &Packet) -> bool {
    p.ip_checksum == internet_checksum(&ip_header_bytes(p))
        && p.l4_checksum == internet_checksum(&l4_bytes(p))
}
