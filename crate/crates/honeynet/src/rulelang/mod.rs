//! Parser, matcher, and payload rewriter for the inline signature rule
//! subset.
//!
//! One rule names the traffic it applies to (protocol, source and
//! destination address/port specs bound against the honeynet configuration)
//! and the byte pattern to find (`content`), optionally with an equal-length
//! byte pattern to write over it (`replace`) so that forwarded attack
//! payloads are defused instead of blocked.
//!
//! Grammar (full reference in `docs/RULES.md`):
//!
//! ```text
//! rule    := action proto addr port "->" addr port "(" option (";" option)* ";"? ")"
//! action  := "alert"
//! proto   := "ip" | "tcp" | "udp"
//! addr    := "$HONEYNET" | "$EXTERNAL_NET" | "any" | ipv4 "/" prefix
//! port    := "any" | 0..=65535
//! option  := "msg" ":" quoted | "content" ":" quoted | "replace" ":" quoted
//!            | "sid" ":" int | "rev" ":" int
//! ```
//!
//! Quoted pattern values mix literal characters with `|HH HH ..|` hex spans.
//! `#` starts a comment outside quotes; blank lines are ignored; a rule ends
//! at the closing `)` of its options block and may wrap onto further lines.
//! Unknown options are a parse error rather than being skipped: silently
//! ignoring a typo in a security rule would disable it.

mod parser;
mod rewrite;

pub use parser::{parse_pattern, parse_ruleset, ParseError, ParseReason, PatternError};
pub use rewrite::{apply_replace, find_occurrences, match_rule, MatchSpan, Rewritten};

use crate::netmodel::{Ipv4Cidr, NetConfig, Protocol};
use std::fmt;
use std::net::Ipv4Addr;

/// Rule action. Only `alert` exists in this subset: the gateway never blocks
/// matched traffic, it modifies and records it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Alert,
}

/// Protocol selector of a rule. `ip` matches any IP-carried protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleProtocol {
    Ip,
    Tcp,
    Udp,
}

impl RuleProtocol {
    pub fn matches(self, p: Protocol) -> bool {
        match self {
            RuleProtocol::Ip => true,
            RuleProtocol::Tcp => p == Protocol::Tcp,
            RuleProtocol::Udp => p == Protocol::Udp,
        }
    }
}

impl fmt::Display for RuleProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleProtocol::Ip => "ip",
            RuleProtocol::Tcp => "tcp",
            RuleProtocol::Udp => "udp",
        })
    }
}

/// Address selector. The two variables are bound against [`NetConfig`]:
/// `$HONEYNET` means inside the honeynet subnet, `$EXTERNAL_NET` outside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddrSpec {
    Honeynet,
    ExternalNet,
    Any,
    Cidr(Ipv4Cidr),
}

impl AddrSpec {
    pub fn matches(self, ip: Ipv4Addr, cfg: &NetConfig) -> bool {
        match self {
            AddrSpec::Honeynet => cfg.in_honeynet(ip),
            AddrSpec::ExternalNet => !cfg.in_honeynet(ip),
            AddrSpec::Any => true,
            AddrSpec::Cidr(c) => c.contains(ip),
        }
    }
}

impl fmt::Display for AddrSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AddrSpec::Honeynet => f.write_str("$HONEYNET"),
            AddrSpec::ExternalNet => f.write_str("$EXTERNAL_NET"),
            AddrSpec::Any => f.write_str("any"),
            AddrSpec::Cidr(c) => write!(f, "{c}"),
        }
    }
}

/// Port selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortSpec {
    Any,
    One(u16),
}

impl PortSpec {
    pub fn matches(self, port: u16) -> bool {
        match self {
            PortSpec::Any => true,
            PortSpec::One(p) => p == port,
        }
    }
}

impl fmt::Display for PortSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortSpec::Any => f.write_str("any"),
            PortSpec::One(p) => write!(f, "{p}"),
        }
    }
}

/// One parsed signature rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub action: Action,
    pub protocol: RuleProtocol,
    pub src_addr: AddrSpec,
    pub src_port: PortSpec,
    pub dst_addr: AddrSpec,
    pub dst_port: PortSpec,
    pub msg: String,
    pub sid: u32,
    pub rev: u32,
    /// Bytes to find in the payload. Never empty.
    pub content: Vec<u8>,
    /// Equal-length bytes written over every occurrence of `content`.
    pub replace: Option<Vec<u8>>,
}

impl Rule {
    /// Canonical single-line form; parses back to an equal rule.
    pub fn render(&self) -> String {
        let mut line = format!(
            "alert {} {} {} -> {} {} (msg:\"{}\"; content:\"{}\";",
            self.protocol,
            self.src_addr,
            self.src_port,
            self.dst_addr,
            self.dst_port,
            self.msg,
            render_pattern(&self.content),
        );
        if let Some(rep) = &self.replace {
            line.push_str(&format!(" replace:\"{}\";", render_pattern(rep)));
        }
        line.push_str(&format!(" sid:{}; rev:{};)", self.sid, self.rev));
        line
    }
}

/// Ordered rule collection with unique sids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn empty() -> Self {
        RuleSet::default()
    }

    pub(crate) fn from_rules(rules: Vec<Rule>) -> Self {
        RuleSet { rules }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn by_sid(&self, sid: u32) -> Option<&Rule> {
        self.rules.iter().find(|r| r.sid == sid)
    }

    /// Canonical text form, one rule per line. `parse_ruleset(render(..))`
    /// yields an equal rule set.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            out.push_str(&r.render());
            out.push('\n');
        }
        out
    }
}

/// Render pattern bytes as a quoted-value body. A pattern of plain
/// printable ASCII stays a literal string; anything containing a byte that
/// could not appear literally is rendered as one `|HH HH ..|` hex span, so
/// binary signatures read as hex throughout instead of flapping between
/// the two syntaxes.
pub fn render_pattern(bytes: &[u8]) -> String {
    let printable = |b: &u8| (0x20..=0x7E).contains(b) && *b != b'|' && *b != b'"';
    if bytes.iter().all(printable) {
        bytes.iter().map(|&b| b as char).collect()
    } else {
        let hex: Vec<String> = bytes.iter().map(|b| format!("{b:02X}")).collect();
        format!("|{}|", hex.join(" "))
    }
}
