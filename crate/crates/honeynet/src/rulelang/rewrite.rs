//! Payload matching and in-place rewriting.

use super::Rule;
use crate::netmodel::{recompute_checksums, NetConfig, Packet};

/// Location of a content match inside a payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchSpan {
    pub offset: usize,
    pub length: usize,
}

/// All non-overlapping occurrences of `needle` in `haystack`, scanned left
/// to right. Empty needles never occur.
pub fn find_occurrences(haystack: &[u8], needle: &[u8]) -> Vec<usize> {
    let mut out = Vec::new();
    if needle.is_empty() || haystack.len() < needle.len() {
        return out;
    }
    let mut i = 0;
    while i + needle.len() <= haystack.len() {
        if &haystack[i..i + needle.len()] == needle {
            out.push(i);
            i += needle.len();
        } else {
            i += 1;
        }
    }
    out
}

/// Does the rule apply to this packet, and if so, where does its content
/// first occur? Protocol, address, and port selectors must all match (under
/// the honeynet bindings in `cfg`) and the content bytes must occur in the
/// payload; the lowest offset wins.
pub fn match_rule(rule: &Rule, p: &Packet, cfg: &NetConfig) -> Option<MatchSpan> {
    if !rule.protocol.matches(p.protocol) {
        return None;
    }
    if !rule.src_addr.matches(p.src_ip, cfg) || !rule.src_port.matches(p.src_port) {
        return None;
    }
    if !rule.dst_addr.matches(p.dst_ip, cfg) || !rule.dst_port.matches(p.dst_port) {
        return None;
    }
    if rule.content.is_empty() || p.payload.len() < rule.content.len() {
        return None;
    }
    p.payload
        .windows(rule.content.len())
        .position(|w| w == rule.content.as_slice())
        .map(|offset| MatchSpan {
            offset,
            length: rule.content.len(),
        })
}

/// Result of [`apply_replace`]: the rewritten packet and the payload offsets
/// that hold the replace bytes afterwards (empty when nothing matched).
#[derive(Debug, Clone)]
pub struct Rewritten {
    pub packet: Packet,
    pub offsets: Vec<usize>,
}

/// Overwrite every occurrence of the rule's content with its equal-length
/// replace bytes and refresh the checksums. Payload length and all other
/// fields are unchanged.
///
/// The scan repeats until the content pattern no longer occurs anywhere: a
/// single left-to-right pass can leave an occurrence that straddles a
/// replacement boundary when content and replace share a border, and a
/// forwarded packet must never carry the signature. Each substitution moves
/// the payload strictly in one lexicographic direction (the first byte where
/// replace differs from content is fixed), so the loop terminates.
///
/// Offsets whose replace bytes were later partially overwritten by another
/// substitution are dropped from the reported list, so every reported offset
/// holds the replace bytes in the final payload.
pub fn apply_replace(rule: &Rule, p: Packet) -> Rewritten {
    let content = &rule.content;
    let replace = rule
        .replace
        .as_ref()
        .expect("apply_replace requires a rule with replace");
    debug_assert_eq!(content.len(), replace.len());

    let mut packet = p;
    let mut offsets: Vec<usize> = Vec::new();
    if content == replace {
        // Writing identical bytes is a no-op; one pass reports where the
        // "rewrites" landed and the loop below would never terminate.
        offsets = find_occurrences(&packet.payload, content);
    } else {
        loop {
            let occ = find_occurrences(&packet.payload, content);
            if occ.is_empty() {
                break;
            }
            for off in occ {
                packet.payload[off..off + replace.len()].copy_from_slice(replace);
                offsets.retain(|&o| o + replace.len() <= off || o >= off + replace.len());
                offsets.push(off);
            }
        }
        offsets.sort_unstable();
        offsets.dedup();
    }
    Rewritten {
        packet: recompute_checksums(packet),
        offsets,
    }
}
