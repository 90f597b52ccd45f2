//! Forensic back end and operator surface: honeytoken planting and
//! detection, the alert engine, metric reports over the stores, and the run
//! configuration file.
//!
//! Everything here works offline from store files — reports are never
//! computed from in-memory run state, so the store formats themselves get
//! exercised on every analysis.

mod alerts;
mod report;
mod tokens;

pub use alerts::{
    evaluate_alerts, validate_alert_rules, Alert, AlertConfigError, AlertPredicate, AlertRule,
    Severity,
};
pub use report::{compute_report, Report};
pub use tokens::{
    plant_tokens, scan_for_tokens, validate_tokens, Honeytoken, TokenError, TokenHit, TokenKind,
    TokenSource,
};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::honeywall::QuotaPolicy;
use crate::netmodel::NetConfig;
use crate::rulelang::RuleSet;

/// The run configuration file: addressing, quota limits, token definitions,
/// and alert rules, as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub net: NetConfig,
    #[serde(default)]
    pub quota: QuotaPolicy,
    #[serde(default)]
    pub tokens: Vec<Honeytoken>,
    #[serde(default)]
    pub alert_rules: Vec<AlertRule>,
}

#[derive(Debug, Error)]
pub enum ConfigLoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid net config: {0}")]
    Net(#[from] crate::netmodel::ConfigError),
    #[error("invalid quota policy: {0}")]
    Quota(String),
    #[error("invalid tokens: {0}")]
    Tokens(#[from] TokenError),
    #[error("invalid alert rules: {0}")]
    Alerts(#[from] AlertConfigError),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigLoadError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigLoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|source| ConfigLoadError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        cfg.validate_structure()?;
        Ok(cfg)
    }

    /// Structural checks that need no rule set: addressing, quota limits,
    /// token uniqueness.
    pub fn validate_structure(&self) -> Result<(), ConfigLoadError> {
        self.net.validate()?;
        self.quota.validate().map_err(ConfigLoadError::Quota)?;
        tokens::validate_tokens(&self.tokens)?;
        Ok(())
    }

    /// Full validation once the rule set is known: alert predicates must
    /// reference existing sids, tokens, and honeypots.
    pub fn validate_against(&self, rules: &RuleSet) -> Result<(), ConfigLoadError> {
        self.validate_structure()?;
        validate_alert_rules(&self.alert_rules, rules, &self.tokens, &self.net)?;
        Ok(())
    }
}
