//! Hand-rolled scanner and recursive-descent parser for the rule language.
//!
//! Every error carries a 1-based (line, column) position. Columns count
//! bytes; the grammar itself is ASCII, multi-byte text can only appear
//! inside quoted values.

use super::{Action, AddrSpec, PortSpec, Rule, RuleProtocol, RuleSet};
use std::collections::BTreeSet;
use thiserror::Error;

/// Positioned parse failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub reason: ParseReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseReason {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),
    #[error("unknown variable `${0}`")]
    UnknownVariable(String),
    #[error("unknown option `{0}`")]
    UnknownOption(String),
    #[error("duplicate option `{0}`")]
    DuplicateOption(&'static str),
    #[error("missing option `{0}`")]
    MissingOption(&'static str),
    #[error("content pattern is empty")]
    EmptyContent,
    #[error("replace without content")]
    ReplaceWithoutContent,
    #[error("replace length mismatch: content is {content} bytes, replace is {replace} bytes")]
    ReplaceLengthMismatch { content: usize, replace: usize },
    #[error("duplicate sid {0}")]
    DuplicateSid(u32),
    #[error("malformed address spec (expected $HONEYNET, $EXTERNAL_NET, any, or CIDR)")]
    BadAddr,
    #[error("malformed port (expected `any` or 0..=65535)")]
    BadPort,
    #[error("`{0}` must be a positive integer")]
    BadInteger(&'static str),
    #[error("unterminated string")]
    UnterminatedString,
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("{0}")]
    Pattern(PatternErrorKind),
}

/// Failure inside a quoted pattern value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("at offset {at}: {kind}")]
pub struct PatternError {
    /// Byte offset into the pattern text.
    pub at: usize,
    pub kind: PatternErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PatternErrorKind {
    #[error("unterminated `|` hex span")]
    UnterminatedHexSpan,
    #[error("malformed hex span: `{0}` is not a hex digit")]
    BadHexDigit(char),
    #[error("malformed hex span: odd number of hex digits")]
    OddHexDigits,
}

/// Decode the inside of a quoted option value: literal characters stand for
/// their byte values, `|HH HH ..|` spans for hex bytes (whitespace between
/// digits is ignored, digits pair up left to right).
pub fn parse_pattern(s: &str) -> Result<Vec<u8>, PatternError> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'|' {
            let span_start = i;
            i += 1;
            let mut digits: Vec<u8> = Vec::new();
            loop {
                match b.get(i) {
                    None => {
                        return Err(PatternError {
                            at: span_start,
                            kind: PatternErrorKind::UnterminatedHexSpan,
                        })
                    }
                    Some(b'|') => {
                        i += 1;
                        break;
                    }
                    Some(c) if c.is_ascii_whitespace() => i += 1,
                    Some(c) if c.is_ascii_hexdigit() => {
                        digits.push(*c);
                        i += 1;
                    }
                    Some(&c) => {
                        return Err(PatternError {
                            at: i,
                            kind: PatternErrorKind::BadHexDigit(c as char),
                        })
                    }
                }
            }
            if !digits.len().is_multiple_of(2) {
                return Err(PatternError {
                    at: span_start,
                    kind: PatternErrorKind::OddHexDigits,
                });
            }
            for pair in digits.chunks_exact(2) {
                let hi = (pair[0] as char).to_digit(16).unwrap() as u8;
                let lo = (pair[1] as char).to_digit(16).unwrap() as u8;
                out.push(hi * 16 + lo);
            }
        } else {
            out.push(b[i]);
            i += 1;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

struct Scanner<'a> {
    src: &'a [u8],
    i: usize,
    line: usize,
    col: usize,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str) -> Self {
        Scanner {
            src: src.as_bytes(),
            i: 0,
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.i).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.i += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, reason: ParseReason) -> ParseError {
        self.err_at(self.pos(), reason)
    }

    fn err_at(&self, pos: Pos, reason: ParseReason) -> ParseError {
        ParseError {
            line: pos.line,
            col: pos.col,
            reason,
        }
    }

    /// Skip whitespace and `#` comments (to end of line).
    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'#') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    /// Consume a run of word bytes (stops at whitespace and punctuation that
    /// structures the grammar).
    fn word(&mut self) -> (String, Pos) {
        let start = self.pos();
        let from = self.i;
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() || matches!(c, b'(' | b')' | b';' | b':' | b'"' | b'#') {
                break;
            }
            self.bump();
        }
        (
            String::from_utf8_lossy(&self.src[from..self.i]).into_owned(),
            start,
        )
    }

    fn expect_byte(&mut self, want: u8, what: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(ParseReason::Expected(what)))
        }
    }

    /// Consume a quoted value starting at the opening `"`. Returns the raw
    /// inner text and the position just after the opening quote. Newlines
    /// are not allowed inside quotes.
    fn quoted(&mut self) -> Result<(String, Pos), ParseError> {
        let open = self.pos();
        self.expect_byte(b'"', "`\"`")?;
        let value_pos = self.pos();
        let from = self.i;
        loop {
            match self.peek() {
                None | Some(b'\n') => {
                    return Err(self.err_at(open, ParseReason::UnterminatedString))
                }
                Some(b'"') => {
                    let raw = String::from_utf8_lossy(&self.src[from..self.i]).into_owned();
                    self.bump();
                    return Ok((raw, value_pos));
                }
                _ => {
                    self.bump();
                }
            }
        }
    }
}

fn parse_addr(word: &str, pos: Pos, sc: &Scanner) -> Result<AddrSpec, ParseError> {
    if let Some(var) = word.strip_prefix('$') {
        return match var {
            "HONEYNET" => Ok(AddrSpec::Honeynet),
            "EXTERNAL_NET" => Ok(AddrSpec::ExternalNet),
            _ => Err(sc.err_at(pos, ParseReason::UnknownVariable(var.to_string()))),
        };
    }
    if word == "any" {
        return Ok(AddrSpec::Any);
    }
    word.parse()
        .map(AddrSpec::Cidr)
        .map_err(|_| sc.err_at(pos, ParseReason::BadAddr))
}

fn parse_port(word: &str, pos: Pos, sc: &Scanner) -> Result<PortSpec, ParseError> {
    if word == "any" {
        return Ok(PortSpec::Any);
    }
    word.parse()
        .map(PortSpec::One)
        .map_err(|_| sc.err_at(pos, ParseReason::BadPort))
}

struct OptionAcc {
    msg: Option<String>,
    content: Option<Vec<u8>>,
    content_pos: Pos,
    replace: Option<Vec<u8>>,
    replace_pos: Pos,
    sid: Option<u32>,
    sid_pos: Pos,
    rev: Option<u32>,
}

fn parse_rule(sc: &mut Scanner) -> Result<(Rule, Pos), ParseError> {
    let (action_word, action_pos) = sc.word();
    if action_word != "alert" {
        return Err(sc.err_at(action_pos, ParseReason::UnknownAction(action_word)));
    }

    sc.skip_trivia();
    let (proto_word, proto_pos) = sc.word();
    let protocol = match proto_word.as_str() {
        "ip" => RuleProtocol::Ip,
        "tcp" => RuleProtocol::Tcp,
        "udp" => RuleProtocol::Udp,
        _ => return Err(sc.err_at(proto_pos, ParseReason::UnknownProtocol(proto_word))),
    };

    sc.skip_trivia();
    let (w, p) = sc.word();
    let src_addr = parse_addr(&w, p, sc)?;
    sc.skip_trivia();
    let (w, p) = sc.word();
    let src_port = parse_port(&w, p, sc)?;

    sc.skip_trivia();
    let (arrow, arrow_pos) = sc.word();
    if arrow != "->" {
        return Err(sc.err_at(arrow_pos, ParseReason::Expected("`->`")));
    }

    sc.skip_trivia();
    let (w, p) = sc.word();
    let dst_addr = parse_addr(&w, p, sc)?;
    sc.skip_trivia();
    let (w, p) = sc.word();
    let dst_port = parse_port(&w, p, sc)?;

    sc.skip_trivia();
    sc.expect_byte(b'(', "`(`")?;

    let nowhere = Pos { line: 0, col: 0 };
    let mut acc = OptionAcc {
        msg: None,
        content: None,
        content_pos: nowhere,
        replace: None,
        replace_pos: nowhere,
        sid: None,
        sid_pos: nowhere,
        rev: None,
    };

    loop {
        sc.skip_trivia();
        if sc.peek() == Some(b')') {
            sc.bump();
            break;
        }
        let (key, key_pos) = sc.word();
        sc.skip_trivia();
        sc.expect_byte(b':', "`:`")?;
        sc.skip_trivia();
        match key.as_str() {
            "msg" => {
                let (raw, _) = sc.quoted()?;
                if acc.msg.replace(raw).is_some() {
                    return Err(sc.err_at(key_pos, ParseReason::DuplicateOption("msg")));
                }
            }
            "content" => {
                let (raw, val_pos) = sc.quoted()?;
                let bytes = parse_pattern(&raw).map_err(|e| {
                    sc.err_at(
                        Pos {
                            line: val_pos.line,
                            col: val_pos.col + e.at,
                        },
                        ParseReason::Pattern(e.kind),
                    )
                })?;
                if acc.content.replace(bytes).is_some() {
                    return Err(sc.err_at(key_pos, ParseReason::DuplicateOption("content")));
                }
                acc.content_pos = val_pos;
            }
            "replace" => {
                let (raw, val_pos) = sc.quoted()?;
                let bytes = parse_pattern(&raw).map_err(|e| {
                    sc.err_at(
                        Pos {
                            line: val_pos.line,
                            col: val_pos.col + e.at,
                        },
                        ParseReason::Pattern(e.kind),
                    )
                })?;
                if acc.replace.replace(bytes).is_some() {
                    return Err(sc.err_at(key_pos, ParseReason::DuplicateOption("replace")));
                }
                acc.replace_pos = key_pos;
            }
            "sid" => {
                let (w, p) = sc.word();
                let v: u32 = w
                    .parse()
                    .ok()
                    .filter(|v| *v > 0)
                    .ok_or_else(|| sc.err_at(p, ParseReason::BadInteger("sid")))?;
                if acc.sid.replace(v).is_some() {
                    return Err(sc.err_at(key_pos, ParseReason::DuplicateOption("sid")));
                }
                acc.sid_pos = p;
            }
            "rev" => {
                let (w, p) = sc.word();
                let v: u32 = w
                    .parse()
                    .ok()
                    .filter(|v| *v > 0)
                    .ok_or_else(|| sc.err_at(p, ParseReason::BadInteger("rev")))?;
                if acc.rev.replace(v).is_some() {
                    return Err(sc.err_at(key_pos, ParseReason::DuplicateOption("rev")));
                }
            }
            _ => return Err(sc.err_at(key_pos, ParseReason::UnknownOption(key))),
        }
        sc.skip_trivia();
        match sc.peek() {
            Some(b';') => {
                sc.bump();
            }
            Some(b')') => {
                sc.bump();
                break;
            }
            _ => return Err(sc.err(ParseReason::Expected("`;` or `)`"))),
        }
    }

    // Cross-option validation.
    if acc.content.is_none() && acc.replace.is_some() {
        return Err(sc.err_at(acc.replace_pos, ParseReason::ReplaceWithoutContent));
    }
    let content = acc
        .content
        .ok_or_else(|| sc.err_at(action_pos, ParseReason::MissingOption("content")))?;
    if content.is_empty() {
        return Err(sc.err_at(acc.content_pos, ParseReason::EmptyContent));
    }
    if let Some(rep) = &acc.replace {
        if rep.len() != content.len() {
            return Err(sc.err_at(
                acc.replace_pos,
                ParseReason::ReplaceLengthMismatch {
                    content: content.len(),
                    replace: rep.len(),
                },
            ));
        }
    }
    let msg = acc
        .msg
        .ok_or_else(|| sc.err_at(action_pos, ParseReason::MissingOption("msg")))?;
    let sid = acc
        .sid
        .ok_or_else(|| sc.err_at(action_pos, ParseReason::MissingOption("sid")))?;
    let rev = acc
        .rev
        .ok_or_else(|| sc.err_at(action_pos, ParseReason::MissingOption("rev")))?;

    Ok((
        Rule {
            action: Action::Alert,
            protocol,
            src_addr,
            src_port,
            dst_addr,
            dst_port,
            msg,
            sid,
            rev,
            content,
            replace: acc.replace,
        },
        acc.sid_pos,
    ))
}

/// Parse a whole rule file. Order is preserved; sids must be unique.
pub fn parse_ruleset(text: &str) -> Result<RuleSet, ParseError> {
    let mut sc = Scanner::new(text);
    let mut rules = Vec::new();
    let mut sids = BTreeSet::new();
    loop {
        sc.skip_trivia();
        if sc.peek().is_none() {
            break;
        }
        let (rule, sid_pos) = parse_rule(&mut sc)?;
        if !sids.insert(rule.sid) {
            return Err(sc.err_at(sid_pos, ParseReason::DuplicateSid(rule.sid)));
        }
        rules.push(rule);
    }
    Ok(RuleSet::from_rules(rules))
}
