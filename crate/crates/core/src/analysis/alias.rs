use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv6Addr;

use serde::Serialize;

use super::matching::Outcomes;
use crate::lpm::PrefixTable;
use crate::probe::ReplyKind;

/// One router address and the probes that revealed it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RouterObservation {
    pub router_ip: Ipv6Addr,
    pub elicited_by: BTreeSet<(Ipv6Addr, ReplyKind)>,
    pub scan_id: String,
}

impl RouterObservation {
    pub fn kinds(&self) -> impl Iterator<Item = ReplyKind> + '_ {
        self.elicited_by.iter().map(|(_, k)| *k)
    }
}

/// Drops replies that look like aliasing and groups the rest by source.
///
/// A reply is discarded when it comes from the probed address itself or
/// from inside a listed aliased prefix. Observations come out sorted by
/// router address.
pub fn alias_filter<V>(outcomes: &Outcomes, aliased: &PrefixTable<V>, scan_id: &str) -> Vec<RouterObservation> {
    let mut by_router: BTreeMap<Ipv6Addr, BTreeSet<(Ipv6Addr, ReplyKind)>> = BTreeMap::new();
    for (target, replies) in &outcomes.per_target {
        for (kind, src) in replies {
            if src == target || aliased.contains(*src) {
                continue;
            }
            by_router.entry(*src).or_default().insert((*target, *kind));
        }
    }
    by_router
        .into_iter()
        .map(|(router_ip, elicited_by)| RouterObservation {
            router_ip,
            elicited_by,
            scan_id: scan_id.to_string(),
        })
        .collect()
}
