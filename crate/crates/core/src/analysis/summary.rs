use serde::{Deserialize, Serialize};

use super::alias::RouterObservation;
use super::matching::Outcomes;

/// What kinds of reply a router sent across all probes that reached it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouterClass {
    EchoOnly,
    ErrorOnly,
    /// Echo Replies for some probes, errors for others.
    Ambiguous,
}

pub fn classify_router(obs: &RouterObservation) -> RouterClass {
    let echo = obs.kinds().any(|k| k.is_echo_reply());
    let error = obs.kinds().any(|k| !k.is_echo_reply());
    match (echo, error) {
        (true, false) => RouterClass::EchoOnly,
        (false, true) => RouterClass::ErrorOnly,
        _ => RouterClass::Ambiguous,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub targets_probed: u64,
    /// Replies matched to a probe.
    pub replies_total: u64,
    pub echo_replies: u64,
    pub error_replies: u64,
    pub unsolicited: u64,
    pub distinct_router_ips: u64,
    pub echo_only: u64,
    pub error_only: u64,
    pub ambiguous: u64,
    /// `replies_total / targets_probed`, 0 when nothing was probed.
    pub reply_rate: f64,
}

impl ScanSummary {
    /// Router-count share of each class, in (echo_only, error_only,
    /// ambiguous) order.
    pub fn class_ratios(&self) -> (f64, f64, f64) {
        let n = self.distinct_router_ips.max(1) as f64;
        (
            self.echo_only as f64 / n,
            self.error_only as f64 / n,
            self.ambiguous as f64 / n,
        )
    }
}

pub fn reply_rate(replies: u64, targets: u64) -> f64 {
    if targets == 0 {
        0.0
    } else {
        replies as f64 / targets as f64
    }
}

pub fn summarize(outcomes: &Outcomes, observations: &[RouterObservation]) -> ScanSummary {
    let mut s = ScanSummary {
        targets_probed: outcomes.targets_probed(),
        unsolicited: outcomes.unsolicited.len() as u64,
        distinct_router_ips: observations.len() as u64,
        ..Default::default()
    };
    for (kind, _) in outcomes.per_target.values().flatten() {
        s.replies_total += 1;
        if kind.is_echo_reply() {
            s.echo_replies += 1;
        } else if kind.is_error() {
            s.error_replies += 1;
        }
    }
    for obs in observations {
        match classify_router(obs) {
            RouterClass::EchoOnly => s.echo_only += 1,
            RouterClass::ErrorOnly => s.error_only += 1,
            RouterClass::Ambiguous => s.ambiguous += 1,
        }
    }
    s.reply_rate = reply_rate(s.replies_total, s.targets_probed);
    s
}
