use std::collections::BTreeMap;
use std::net::Ipv6Addr;

use crate::probe::{ReplyKind, ReplyRecord};

/// Replies grouped by the probe that elicited them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcomes {
    /// Every probed target, including those that drew no reply.
    pub per_target: BTreeMap<Ipv6Addr, Vec<(ReplyKind, Ipv6Addr)>>,
    /// Replies without an authenticated target, or naming a target that was
    /// never probed.
    pub unsolicited: Vec<ReplyRecord>,
}

impl Outcomes {
    pub fn targets_probed(&self) -> u64 {
        self.per_target.len() as u64
    }

    pub fn replies_total(&self) -> u64 {
        self.per_target.values().map(|v| v.len() as u64).sum()
    }

    /// Combines results from disjoint or overlapping target shards. Reply
    /// lists are kept sorted so the result does not depend on merge order.
    pub fn merge(mut self, other: Outcomes) -> Outcomes {
        for (t, mut replies) in other.per_target {
            self.per_target.entry(t).or_default().append(&mut replies);
        }
        for replies in self.per_target.values_mut() {
            replies.sort_unstable();
        }
        self.unsolicited.extend(other.unsolicited);
        self.unsolicited
            .sort_unstable_by_key(|r| (r.timestamp_ns, r.source, r.embedded_target, r.kind));
        self
    }
}

/// Attributes each reply to the probe named by its authenticated payload.
pub fn match_replies<P, R>(probes: P, replies: R) -> Outcomes
where
    P: IntoIterator<Item = Ipv6Addr>,
    R: IntoIterator<Item = ReplyRecord>,
{
    let mut out = Outcomes {
        per_target: probes.into_iter().map(|t| (t, Vec::new())).collect(),
        unsolicited: Vec::new(),
    };
    for r in replies {
        match r.embedded_target.and_then(|t| out.per_target.get_mut(&t)) {
            Some(list) => list.push((r.kind, r.source)),
            None => out.unsolicited.push(r),
        }
    }
    out
}
