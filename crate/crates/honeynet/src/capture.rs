//! The covert activity-capture channel: a bit-exact record codec, the
//! honeypot-side sensor that ships records to the collector over UDP, the
//! collector that persists them, and session reassembly for forensics.
//!
//! Wire layout, all multi-byte integers big-endian, fixed 48-byte header
//! followed by `data_len` bytes of data:
//!
//! ```text
//! offset  size  field
//!      0     4  magic      = 0xD0D0D0D0
//!      4     2  version    = 1
//!      6     2  rec_type   (0 = input/keystroke, 1 = output)
//!      8     4  counter    (per-host strictly increasing)
//!     12     4  time_sec
//!     16     4  time_usec
//!     20     4  pid
//!     24     4  uid
//!     28     4  fd
//!     32    12  command    (NUL-padded)
//!     44     4  data_len
//!     48     -  data
//! ```
//!
//! Covertness in this model is positional: sensor packets are addressed to
//! the collector's UDP port, the gateway diverts everything so classified
//! before any other handling, and no host ever sees a capture packet on the
//! wire. The channel carries no encryption.
//!
//! Capture store: JSON Lines of decoded records keyed by emitting host, data
//! hex-encoded, plus a raw sidecar store for payloads that fail to decode —
//! a forensic store never discards evidence.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{
    hex_bytes, recompute_checksums, MacAddr, NetConfig, Packet, Protocol, TcpFlags, MAX_PAYLOAD,
};
use crate::stores::Stores;

pub const CAPTURE_MAGIC: u32 = 0xD0D0_D0D0;
pub const CAPTURE_VERSION: u16 = 1;
pub const RECORD_HEADER_LEN: usize = 48;
/// Largest data block that still fits a packet payload alongside the header.
pub const MAX_CAPTURE_DATA: usize = MAX_PAYLOAD - RECORD_HEADER_LEN;
/// Fixed UDP source port sensors emit from.
pub const SENSOR_SOURCE_PORT: u16 = 31101;

/// Kind of activity a record carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecType {
    /// Input (keystrokes) — these form the session transcript.
    Input,
    /// Output produced by the host.
    Output,
}

impl RecType {
    pub fn wire(self) -> u16 {
        match self {
            RecType::Input => 0,
            RecType::Output => 1,
        }
    }

    pub fn from_wire(v: u16) -> Option<Self> {
        match v {
            0 => Some(RecType::Input),
            1 => Some(RecType::Output),
            _ => None,
        }
    }
}

/// One decoded activity record. `magic`, `version`, and `data_len` are
/// implicit: the first two are constants checked on decode, the length is
/// `data.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    pub rec_type: RecType,
    pub counter: u32,
    pub time_sec: u32,
    pub time_usec: u32,
    pub pid: u32,
    pub uid: u32,
    pub fd: u32,
    pub command: [u8; 12],
    pub data: Vec<u8>,
}

impl CaptureRecord {
    /// Command as text, up to the first NUL.
    pub fn command_str(&self) -> String {
        let end = self
            .command
            .iter()
            .position(|&b| b == 0)
            .unwrap_or(self.command.len());
        String::from_utf8_lossy(&self.command[..end]).into_owned()
    }
}

/// NUL-pad (or truncate) a command name to the fixed 12-byte field.
pub fn command_field(command: &str) -> [u8; 12] {
    let mut out = [0u8; 12];
    let bytes = command.as_bytes();
    let n = bytes.len().min(12);
    out[..n].copy_from_slice(&bytes[..n]);
    out
}

/// Serialize a record to its wire form: 48-byte header followed by data.
pub fn encode_record(r: &CaptureRecord) -> Vec<u8> {
    let mut out = Vec::with_capacity(RECORD_HEADER_LEN + r.data.len());
    out.extend_from_slice(&CAPTURE_MAGIC.to_be_bytes());
    out.extend_from_slice(&CAPTURE_VERSION.to_be_bytes());
    out.extend_from_slice(&r.rec_type.wire().to_be_bytes());
    out.extend_from_slice(&r.counter.to_be_bytes());
    out.extend_from_slice(&r.time_sec.to_be_bytes());
    out.extend_from_slice(&r.time_usec.to_be_bytes());
    out.extend_from_slice(&r.pid.to_be_bytes());
    out.extend_from_slice(&r.uid.to_be_bytes());
    out.extend_from_slice(&r.fd.to_be_bytes());
    out.extend_from_slice(&r.command);
    out.extend_from_slice(&(r.data.len() as u32).to_be_bytes());
    out.extend_from_slice(&r.data);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("short buffer: need {need} bytes, got {got}")]
    ShortBuffer { need: usize, got: usize },
    #[error("bad magic {0:#010x}")]
    BadMagic(u32),
    #[error("unsupported version {0}")]
    BadVersion(u16),
    #[error("unknown record type {0}")]
    BadRecType(u16),
    #[error("data_len {declared} inconsistent with buffer ({available} bytes after header)")]
    LengthMismatch { declared: u32, available: usize },
}

fn be_u32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn be_u16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

/// Parse a wire buffer back into a record. Inverse of [`encode_record`] on
/// its image; rejects anything else with a distinct reason.
pub fn decode_record(b: &[u8]) -> Result<CaptureRecord, DecodeError> {
    if b.len() < RECORD_HEADER_LEN {
        return Err(DecodeError::ShortBuffer {
            need: RECORD_HEADER_LEN,
            got: b.len(),
        });
    }
    let magic = be_u32(b, 0);
    if magic != CAPTURE_MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    let version = be_u16(b, 4);
    if version != CAPTURE_VERSION {
        return Err(DecodeError::BadVersion(version));
    }
    let rec_type = RecType::from_wire(be_u16(b, 6)).ok_or(DecodeError::BadRecType(be_u16(b, 6)))?;
    let data_len = be_u32(b, 44);
    let available = b.len() - RECORD_HEADER_LEN;
    if data_len as usize != available {
        return Err(DecodeError::LengthMismatch {
            declared: data_len,
            available,
        });
    }
    let mut command = [0u8; 12];
    command.copy_from_slice(&b[32..44]);
    Ok(CaptureRecord {
        rec_type,
        counter: be_u32(b, 8),
        time_sec: be_u32(b, 12),
        time_usec: be_u32(b, 16),
        pid: be_u32(b, 20),
        uid: be_u32(b, 24),
        fd: be_u32(b, 28),
        command,
        data: b[RECORD_HEADER_LEN..].to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("capture data too long: {0} bytes (max {MAX_CAPTURE_DATA})")]
    DataTooLong(usize),
}

/// Honeypot-side sensor state: the per-host counter plus the collector
/// addressing baked in from the configuration.
#[derive(Debug, Clone)]
pub struct Sensor {
    pub host_ip: Ipv4Addr,
    collector_ip: Ipv4Addr,
    capture_port: u16,
    next_counter: u32,
}

impl Sensor {
    pub fn new(host_ip: Ipv4Addr, cfg: &NetConfig) -> Self {
        Sensor {
            host_ip,
            collector_ip: cfg.collector_ip,
            capture_port: cfg.capture_port,
            next_counter: 1,
        }
    }

    /// Wrap an activity record into a UDP packet bound for the collector and
    /// advance the counter. The packet classifies as capture-channel traffic
    /// by construction.
    #[allow(clippy::too_many_arguments)]
    pub fn emit(
        &mut self,
        rec_type: RecType,
        pid: u32,
        uid: u32,
        fd: u32,
        command: &str,
        data: &[u8],
        clock: u64,
    ) -> Result<Packet, EmitError> {
        if data.len() > MAX_CAPTURE_DATA {
            return Err(EmitError::DataTooLong(data.len()));
        }
        let record = CaptureRecord {
            rec_type,
            counter: self.next_counter,
            time_sec: (clock / 1_000_000) as u32,
            time_usec: (clock % 1_000_000) as u32,
            pid,
            uid,
            fd,
            command: command_field(command),
            data: data.to_vec(),
        };
        self.next_counter += 1;
        Ok(recompute_checksums(Packet {
            src_mac: MacAddr::from_ip(self.host_ip),
            dst_mac: MacAddr::from_ip(self.collector_ip),
            src_ip: self.host_ip,
            dst_ip: self.collector_ip,
            protocol: Protocol::Udp,
            src_port: SENSOR_SOURCE_PORT,
            dst_port: self.capture_port,
            tcp_flags: TcpFlags::empty(),
            ip_checksum: 0,
            l4_checksum: 0,
            payload: encode_record(&record),
            ttl: 64,
            timestamp: clock,
        }))
    }
}

/// One line of the capture store: a decoded record keyed by emitting host.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredCaptureRecord {
    pub host_ip: Ipv4Addr,
    pub magic: u32,
    pub version: u16,
    pub rec_type: u16,
    pub counter: u32,
    pub time_sec: u32,
    pub time_usec: u32,
    pub pid: u32,
    pub uid: u32,
    pub fd: u32,
    pub command: String,
    pub data_len: u32,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl StoredCaptureRecord {
    pub fn from_record(host_ip: Ipv4Addr, r: &CaptureRecord, flag: Option<String>) -> Self {
        StoredCaptureRecord {
            host_ip,
            magic: CAPTURE_MAGIC,
            version: CAPTURE_VERSION,
            rec_type: r.rec_type.wire(),
            counter: r.counter,
            time_sec: r.time_sec,
            time_usec: r.time_usec,
            pid: r.pid,
            uid: r.uid,
            fd: r.fd,
            command: r.command_str(),
            data_len: r.data.len() as u32,
            data: r.data.clone(),
            flag,
        }
    }

    /// Rebuild the wire record (command re-padded with NULs).
    pub fn to_record(&self) -> Option<CaptureRecord> {
        Some(CaptureRecord {
            rec_type: RecType::from_wire(self.rec_type)?,
            counter: self.counter,
            time_sec: self.time_sec,
            time_usec: self.time_usec,
            pid: self.pid,
            uid: self.uid,
            fd: self.fd,
            command: command_field(&self.command),
            data: self.data.clone(),
        })
    }

    /// Virtual-time microsecond timestamp reconstructed from the record clock.
    pub fn time_us(&self) -> u64 {
        self.time_sec as u64 * 1_000_000 + self.time_usec as u64
    }
}

/// One line of the raw sidecar store: a capture-channel payload that failed
/// to decode, kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCapture {
    pub host_ip: Ipv4Addr,
    pub time: u64,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
    pub error: String,
}

/// The collecting server: decodes diverted capture packets into the capture
/// store. Never loses data — undecodable payloads land in the raw sidecar
/// with an alert, duplicate counters are stored and flagged.
#[derive(Debug, Default)]
pub struct Collector {
    seen_counters: BTreeMap<Ipv4Addr, BTreeSet<u32>>,
}

impl Collector {
    pub fn new() -> Self {
        Collector::default()
    }

    /// Ingest one capture-channel packet.
    pub fn ingest(&mut self, p: &Packet, stores: &mut Stores) {
        match decode_record(&p.payload) {
            Ok(record) => {
                let seen = self.seen_counters.entry(p.src_ip).or_default();
                let flag = if seen.insert(record.counter) {
                    None
                } else {
                    Some("duplicate-counter".to_string())
                };
                stores
                    .capture
                    .push(StoredCaptureRecord::from_record(p.src_ip, &record, flag));
            }
            Err(e) => {
                stores.capture_raw.push(RawCapture {
                    host_ip: p.src_ip,
                    time: p.timestamp,
                    payload: p.payload.clone(),
                    error: e.to_string(),
                });
                stores.events.push(crate::honeywall::GatewayEvent::alert(
                    p,
                    crate::netmodel::Direction::CaptureChannel,
                    format!("undecodable-capture: {e}"),
                    None,
                ));
            }
        }
    }
}

/// Reassembled per-host activity: records in counter order with duplicates
/// dropped (first stored instance wins) and the keystroke transcript, i.e.
/// the concatenated data of input-type records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub host_ip: Ipv4Addr,
    pub records: Vec<StoredCaptureRecord>,
    pub transcript: Vec<u8>,
}

pub fn reassemble_session(store: &[StoredCaptureRecord], host_ip: Ipv4Addr) -> Session {
    let mut records: Vec<StoredCaptureRecord> = store
        .iter()
        .filter(|r| r.host_ip == host_ip)
        .cloned()
        .collect();
    // Stable sort keeps ingest order among equal counters, so dedup keeps
    // the first stored instance.
    records.sort_by_key(|r| r.counter);
    records.dedup_by_key(|r| r.counter);
    let transcript = records
        .iter()
        .filter(|r| r.rec_type == RecType::Input.wire())
        .flat_map(|r| r.data.iter().copied())
        .collect();
    Session {
        host_ip,
        records,
        transcript,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{classify_direction, Direction};
    use crate::testutil::reference_config;
    use proptest::prelude::*;

    fn sample_record() -> CaptureRecord {
        CaptureRecord {
            rec_type: RecType::Input,
            counter: 1,
            time_sec: 0,
            time_usec: 500_000,
            pid: 4242,
            uid: 0,
            fd: 0,
            command: command_field("bash"),
            data: b"ls\n".to_vec(),
        }
    }

    /// Golden wire bytes assembled field-by-field from the layout table,
    /// independently of the encoder.
    fn golden_bytes() -> Vec<u8> {
        let mut g = Vec::new();
        g.extend_from_slice(&[0xD0, 0xD0, 0xD0, 0xD0]); // magic
        g.extend_from_slice(&[0x00, 0x01]); // version 1
        g.extend_from_slice(&[0x00, 0x00]); // rec_type input
        g.extend_from_slice(&[0x00, 0x00, 0x00, 0x01]); // counter 1
        g.extend_from_slice(&[0x00, 0x00, 0x00, 0x00]); // time_sec 0
        g.extend_from_slice(&[0x00, 0x07, 0xA1, 0x20]); // time_usec 500000
        g.extend_from_slice(&[0x00, 0x00, 0x10, 0x92]); // pid 4242
        g.extend_from_slice(&[0x00, 0x00, 0x00, 0x00]); // uid 0
        g.extend_from_slice(&[0x00, 0x00, 0x00, 0x00]); // fd 0
        g.extend_from_slice(b"bash\0\0\0\0\0\0\0\0"); // command, NUL-padded
        g.extend_from_slice(&[0x00, 0x00, 0x00, 0x03]); // data_len 3
        g.extend_from_slice(b"ls\n"); // data
        g
    }

    #[test]
    fn encode_matches_golden_bytes() {
        let encoded = encode_record(&sample_record());
        assert_eq!(encoded.len(), RECORD_HEADER_LEN + 3);
        assert_eq!(encoded, golden_bytes());
    }

    #[test]
    fn golden_bytes_decode_to_the_record() {
        assert_eq!(decode_record(&golden_bytes()).unwrap(), sample_record());
    }

    #[test]
    fn empty_data_encodes_to_header_only() {
        let mut r = sample_record();
        r.data.clear();
        assert_eq!(encode_record(&r).len(), RECORD_HEADER_LEN);
    }

    #[test]
    fn decode_error_reasons_are_distinct() {
        let golden = golden_bytes();

        let mut corrupt = golden.clone();
        corrupt[0] ^= 0xFF;
        assert!(matches!(
            decode_record(&corrupt),
            Err(DecodeError::BadMagic(_))
        ));

        assert_eq!(
            decode_record(&golden[..RECORD_HEADER_LEN - 9]),
            Err(DecodeError::ShortBuffer {
                need: RECORD_HEADER_LEN,
                got: RECORD_HEADER_LEN - 9
            })
        );

        let mut bad_ver = golden.clone();
        bad_ver[5] = 2;
        assert_eq!(decode_record(&bad_ver), Err(DecodeError::BadVersion(2)));

        let mut bad_type = golden.clone();
        bad_type[7] = 9;
        assert_eq!(decode_record(&bad_type), Err(DecodeError::BadRecType(9)));

        let mut truncated = golden.clone();
        truncated.pop();
        assert_eq!(
            decode_record(&truncated),
            Err(DecodeError::LengthMismatch {
                declared: 3,
                available: 2
            })
        );

        let mut trailing = golden;
        trailing.push(0);
        assert!(matches!(
            decode_record(&trailing),
            Err(DecodeError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn emit_counters_are_consecutive() {
        let cfg = reference_config();
        let mut sensor = Sensor::new("10.1.0.5".parse().unwrap(), &cfg);
        let p1 = sensor
            .emit(RecType::Input, 1, 0, 0, "bash", b"a", 10)
            .unwrap();
        let p2 = sensor
            .emit(RecType::Input, 1, 0, 0, "bash", b"b", 20)
            .unwrap();
        let r1 = decode_record(&p1.payload).unwrap();
        let r2 = decode_record(&p2.payload).unwrap();
        assert_eq!(r2.counter, r1.counter + 1);
    }

    #[test]
    fn emitted_packet_is_capture_channel() {
        let cfg = reference_config();
        let mut sensor = Sensor::new("10.1.0.5".parse().unwrap(), &cfg);
        let p = sensor
            .emit(RecType::Output, 7, 0, 1, "sshd", b"motd", 99)
            .unwrap();
        assert_eq!(classify_direction(&p, &cfg), Direction::CaptureChannel);
        assert!(crate::netmodel::verify_checksums(&p));
    }

    #[test]
    fn emit_rejects_oversized_data() {
        let cfg = reference_config();
        let mut sensor = Sensor::new("10.1.0.5".parse().unwrap(), &cfg);
        let big = vec![0u8; MAX_CAPTURE_DATA + 1];
        assert_eq!(
            sensor.emit(RecType::Output, 1, 0, 0, "dd", &big, 0),
            Err(EmitError::DataTooLong(MAX_CAPTURE_DATA + 1))
        );
        // At the boundary it fits.
        assert!(sensor
            .emit(RecType::Output, 1, 0, 0, "dd", &big[..MAX_CAPTURE_DATA], 0)
            .is_ok());
    }

    #[test]
    fn collector_stores_valid_records() {
        let cfg = reference_config();
        let mut sensor = Sensor::new("10.1.0.5".parse().unwrap(), &cfg);
        let mut collector = Collector::new();
        let mut stores = Stores::default();
        let p = sensor
            .emit(RecType::Input, 1, 0, 0, "bash", b"id\n", 42)
            .unwrap();
        collector.ingest(&p, &mut stores);
        assert_eq!(stores.capture.len(), 1);
        assert_eq!(stores.capture[0].data, b"id\n");
        assert_eq!(stores.capture[0].flag, None);
        assert!(stores.capture_raw.is_empty());
    }

    #[test]
    fn collector_flags_duplicate_counters() {
        let cfg = reference_config();
        let mut sensor = Sensor::new("10.1.0.5".parse().unwrap(), &cfg);
        let mut collector = Collector::new();
        let mut stores = Stores::default();
        let p = sensor
            .emit(RecType::Input, 1, 0, 0, "bash", b"x", 42)
            .unwrap();
        collector.ingest(&p, &mut stores);
        collector.ingest(&p, &mut stores);
        assert_eq!(stores.capture.len(), 2);
        assert_eq!(stores.capture[0].flag, None);
        assert_eq!(stores.capture[1].flag.as_deref(), Some("duplicate-counter"));
    }

    #[test]
    fn collector_keeps_garbage_raw_with_alert() {
        let cfg = reference_config();
        let mut collector = Collector::new();
        let mut stores = Stores::default();
        let garbage = crate::testutil::udp_packet(
            "10.1.0.5".parse().unwrap(),
            cfg.collector_ip,
            SENSOR_SOURCE_PORT,
            cfg.capture_port,
            b"not a record".to_vec(),
            7,
        );
        collector.ingest(&garbage, &mut stores);
        assert!(stores.capture.is_empty());
        assert_eq!(stores.capture_raw.len(), 1);
        assert_eq!(stores.capture_raw[0].payload, b"not a record");
        assert_eq!(stores.events.len(), 1);
    }

    #[test]
    fn reassembly_sorts_by_counter() {
        let host: Ipv4Addr = "10.1.0.5".parse().unwrap();
        let mk = |counter: u32, data: &[u8]| {
            let mut r = sample_record();
            r.counter = counter;
            r.data = data.to_vec();
            StoredCaptureRecord::from_record(host, &r, None)
        };
        let store = vec![mk(3, b"c"), mk(1, b"a"), mk(2, b"b")];
        let session = reassemble_session(&store, host);
        assert_eq!(session.transcript, b"abc");
        assert_eq!(
            session
                .records
                .iter()
                .map(|r| r.counter)
                .collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn reassembly_of_empty_store_is_empty() {
        let session = reassemble_session(&[], "10.1.0.5".parse().unwrap());
        assert!(session.records.is_empty());
        assert!(session.transcript.is_empty());
    }

    #[test]
    fn transcript_filters_output_records_and_first_duplicate_wins() {
        let host: Ipv4Addr = "10.1.0.5".parse().unwrap();
        let mk = |counter: u32, rec_type: RecType, data: &[u8]| {
            let mut r = sample_record();
            r.counter = counter;
            r.rec_type = rec_type;
            r.data = data.to_vec();
            StoredCaptureRecord::from_record(host, &r, None)
        };
        let store = vec![
            mk(1, RecType::Input, b"ls"),
            mk(2, RecType::Output, b"file1 file2"),
            mk(3, RecType::Input, b"\n"),
            mk(3, RecType::Input, b"IGNORED"),
        ];
        let session = reassemble_session(&store, host);
        assert_eq!(session.transcript, b"ls\n");
        assert_eq!(session.records.len(), 3);
    }

    fn arb_record() -> impl Strategy<Value = CaptureRecord> {
        (
            any::<bool>(),
            any::<u32>(),
            any::<u32>(),
            0u32..1_000_000,
            any::<u32>(),
            any::<u32>(),
            any::<u32>(),
            proptest::collection::vec(any::<u8>(), 12),
            proptest::collection::vec(any::<u8>(), 0..200),
        )
            .prop_map(
                |(input, counter, time_sec, time_usec, pid, uid, fd, cmd, data)| {
                    let mut command = [0u8; 12];
                    command.copy_from_slice(&cmd);
                    CaptureRecord {
                        rec_type: if input {
                            RecType::Input
                        } else {
                            RecType::Output
                        },
                        counter,
                        time_sec,
                        time_usec,
                        pid,
                        uid,
                        fd,
                        command,
                        data,
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn codec_round_trip(r in arb_record()) {
            let encoded = encode_record(&r);
            prop_assert_eq!(encoded.len(), RECORD_HEADER_LEN + r.data.len());
            prop_assert_eq!(decode_record(&encoded).unwrap(), r);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..128)) {
            let _ = decode_record(&bytes);
        }
    }
}
