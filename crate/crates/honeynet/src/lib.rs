//! Deterministic honeynet-in-a-box: an inline honeywall gateway (outbound
//! connection quotas, signature-based payload rewriting), a covert per-host
//! activity capture channel with a collecting server, honeytoken tracking,
//! an alert engine, redundant append-only evidence stores, and a report
//! generator — all running on a discrete-event network simulator with a
//! virtual clock, so every run is bit-reproducible.
//!
//! Module map:
//! - [`netmodel`] — packets, addressing, flow identity, direction
//!   classification, RFC 1071 checksums, and the JSON Lines trace format.
//! - [`rulelang`] — parser/matcher/rewriter for the signature rule subset
//!   (content/replace with hex spans).
//! - [`honeywall`] — the inline gateway pipeline: tap, classify, quota,
//!   rewrite, divert, audit events.
//! - [`capture`] — the covert activity channel: bit-exact record codec,
//!   honeypot-side sensor, collector, session reassembly.
//! - [`simnet`] — scenario model and the deterministic event loop driving
//!   attackers, honeypot service emulators, and the gateway.
//! - [`opsreport`] — honeytokens, alert rules, metric reports, run config.
//! - [`stores`] — append-only JSON Lines store files shared by the above.

pub mod capture;
pub mod honeywall;
pub mod netmodel;
pub mod opsreport;
pub mod rulelang;
pub mod simnet;
pub mod stores;

#[cfg(test)]
pub(crate) mod testutil;
