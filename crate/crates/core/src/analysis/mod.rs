//! Reply matching, alias filtering and the reports built on top of them.

mod alias;
mod compare;
mod loops;
mod matching;
pub mod report;
mod stability;
mod summary;

use std::net::Ipv6Addr;

pub use alias::{alias_filter, RouterObservation};
pub use compare::{compare_by_label, compare_datasets, CompareError, OverlapTable, PairOverlap, MAX_SETS};
pub use loops::{detect_loops, LoopOptions, LoopReport, RouterLoopStats};
pub use matching::{match_replies, Outcomes};
pub use stability::{
    classify_visibility, reprobe_matrix, responders, sra_stability, visibility, Baseline, ResponderMap, ScanStability,
    StabilityError, StabilityReport, Visibility, VisibilityReport,
};
pub use summary::{classify_router, reply_rate, summarize, RouterClass, ScanSummary};

pub use crate::lpm::{PrefixTable, TableError, UNKNOWN};

/// Longest-prefix-match label of `addr`, or `"unknown"`.
pub fn lpm_lookup<V: AsRef<str>>(addr: Ipv6Addr, table: &PrefixTable<V>) -> &str {
    table.label(addr)
}
