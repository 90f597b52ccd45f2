//! The alert engine: enum-backed predicates watched over the event stream
//! and token sightings, Swatch-style.
//!
//! A honeypot has no production role, so the very first inbound contact is
//! already suspect — that is exactly what `INBOUND_CONTACT` fires on.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokens::{is_known_honeypot, Honeytoken, TokenHit};
use crate::honeywall::{EventKind, GatewayEvent};
use crate::netmodel::{Direction, NetConfig};
use crate::rulelang::RuleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Low,
    Medium,
    High,
    Critical,
}

/// What to watch for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlertPredicate {
    SignatureSeen { sid: u32 },
    TokenSeen { token_id: String },
    QuotaExceeded { host: Ipv4Addr },
    InboundContact { host: Ipv4Addr },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertRule {
    pub predicate: AlertPredicate,
    pub severity: Severity,
}

/// One fired alert.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub time: u64,
    pub severity: Severity,
    pub predicate: AlertPredicate,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlertConfigError {
    #[error("alert rule references unknown sid {0}")]
    UnknownSid(u32),
    #[error("alert rule references unknown token {0}")]
    UnknownToken(String),
    #[error("alert rule references unknown host {0}")]
    UnknownHost(Ipv4Addr),
}

/// Alert predicates must point at things that exist: sids in the loaded
/// rule set, token ids in the configuration, honeypot addresses in the net
/// config. Checked at load time so a typo cannot silently disarm a rule.
pub fn validate_alert_rules(
    rules: &[AlertRule],
    ruleset: &RuleSet,
    tokens: &[Honeytoken],
    cfg: &NetConfig,
) -> Result<(), AlertConfigError> {
    for r in rules {
        match &r.predicate {
            AlertPredicate::SignatureSeen { sid } => {
                if ruleset.by_sid(*sid).is_none() {
                    return Err(AlertConfigError::UnknownSid(*sid));
                }
            }
            AlertPredicate::TokenSeen { token_id } => {
                if !tokens.iter().any(|t| &t.id == token_id) {
                    return Err(AlertConfigError::UnknownToken(token_id.clone()));
                }
            }
            AlertPredicate::QuotaExceeded { host } | AlertPredicate::InboundContact { host } => {
                if !is_known_honeypot(*host, cfg) {
                    return Err(AlertConfigError::UnknownHost(*host));
                }
            }
        }
    }
    Ok(())
}

/// Run every alert rule over the recorded events and token sightings. One
/// alert per (rule, triggering event); `INBOUND_CONTACT` fires once, on the
/// first inbound flow to the named host. Output is in time order.
pub fn evaluate_alerts(
    events: &[GatewayEvent],
    token_hits: &[TokenHit],
    rules: &[AlertRule],
) -> Vec<Alert> {
    let mut alerts = Vec::new();
    for rule in rules {
        match &rule.predicate {
            AlertPredicate::SignatureSeen { sid } => {
                for ev in events.iter().filter(|e| e.sid() == Some(*sid)) {
                    alerts.push(Alert {
                        time: ev.time,
                        severity: rule.severity,
                        predicate: rule.predicate.clone(),
                        message: format!("signature {sid} seen on flow to {}", ev.flow.dst_ip),
                    });
                }
            }
            AlertPredicate::TokenSeen { token_id } => {
                for hit in token_hits.iter().filter(|h| &h.token_id == token_id) {
                    alerts.push(Alert {
                        time: hit.time,
                        severity: rule.severity,
                        predicate: rule.predicate.clone(),
                        message: format!("token {token_id} sighted ({:?})", hit.source),
                    });
                }
            }
            AlertPredicate::QuotaExceeded { host } => {
                for ev in events.iter().filter(|e| {
                    matches!(&e.kind, EventKind::QuotaDropped { honeypot_ip, .. } if honeypot_ip == host)
                }) {
                    alerts.push(Alert {
                        time: ev.time,
                        severity: rule.severity,
                        predicate: rule.predicate.clone(),
                        message: format!("outbound connection quota exceeded for {host}"),
                    });
                }
            }
            AlertPredicate::InboundContact { host } => {
                if let Some(ev) = events
                    .iter()
                    .find(|e| e.direction == Direction::Inbound && &e.flow.dst_ip == host)
                {
                    alerts.push(Alert {
                        time: ev.time,
                        severity: rule.severity,
                        predicate: rule.predicate.clone(),
                        message: format!(
                            "first inbound contact to {host} from {}",
                            ev.flow.src_ip
                        ),
                    });
                }
            }
        }
    }
    alerts.sort_by_key(|a| a.time);
    alerts
}
