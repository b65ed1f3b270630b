use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};

use super::matching::Outcomes;
use crate::lpm::PrefixTable;
use crate::prefix::Ipv6Prefix;
use crate::probe::ReplyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopOptions {
    /// Time Exceeded replies a probe needs before its subnet counts as
    /// looping.
    pub threshold: usize,
    /// Granularity at which looping subnets are reported.
    pub subnet_len: u8,
}

impl Default for LoopOptions {
    fn default() -> Self {
        Self {
            threshold: 1,
            subnet_len: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterLoopStats {
    pub router_ip: Ipv6Addr,
    pub loop_subnet_count: u64,
    /// Most replies this router sent in answer to a single looping probe.
    pub amplification_factor: u64,
    pub amplifying: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopReport {
    pub looping_subnets: BTreeSet<Ipv6Prefix>,
    /// Sorted by router address.
    pub routers: Vec<RouterLoopStats>,
}

impl LoopReport {
    pub fn amplifying(&self) -> impl Iterator<Item = &RouterLoopStats> {
        self.routers.iter().filter(|r| r.amplifying)
    }

    pub fn router(&self, ip: Ipv6Addr) -> Option<&RouterLoopStats> {
        self.routers
            .binary_search_by_key(&ip, |r| r.router_ip)
            .ok()
            .map(|i| &self.routers[i])
    }

    /// Number of looping subnets per label (country or ASN).
    pub fn by_label<V: AsRef<str>>(&self, table: &PrefixTable<V>) -> BTreeMap<String, u64> {
        let mut m = BTreeMap::new();
        for s in &self.looping_subnets {
            *m.entry(table.label(s.network()).to_string()).or_insert(0) += 1;
        }
        m
    }
}

/// Finds probes that expired in a loop and attributes them to the routers
/// that reported the expiry.
pub fn detect_loops(outcomes: &Outcomes, opts: &LoopOptions) -> LoopReport {
    let mut looping_subnets = BTreeSet::new();
    let mut subnets_per_router: HashMap<Ipv6Addr, BTreeSet<Ipv6Prefix>> = HashMap::new();
    let mut amplification: HashMap<Ipv6Addr, u64> = HashMap::new();

    for (target, replies) in &outcomes.per_target {
        let expired = replies
            .iter()
            .filter(|(k, _)| matches!(k, ReplyKind::TimeExceeded(_)))
            .count();
        if expired == 0 || expired < opts.threshold {
            continue;
        }
        let subnet = Ipv6Prefix::truncate(u128::from(*target), opts.subnet_len);
        looping_subnets.insert(subnet);

        let mut per_source: HashMap<Ipv6Addr, u64> = HashMap::new();
        for (_, src) in replies {
            *per_source.entry(*src).or_default() += 1;
        }
        for (kind, src) in replies {
            if matches!(kind, ReplyKind::TimeExceeded(_)) {
                subnets_per_router.entry(*src).or_default().insert(subnet);
                let e = amplification.entry(*src).or_default();
                *e = (*e).max(per_source[src]);
            }
        }
    }

    let mut routers: Vec<RouterLoopStats> = subnets_per_router
        .into_iter()
        .map(|(router_ip, subnets)| {
            let factor = amplification.get(&router_ip).copied().unwrap_or(1);
            RouterLoopStats {
                router_ip,
                loop_subnet_count: subnets.len() as u64,
                amplification_factor: factor,
                amplifying: factor > 1,
            }
        })
        .collect();
    routers.sort_by_key(|r| r.router_ip);
    LoopReport {
        looping_subnets,
        routers,
    }
}
