//! Randomised tree topologies with an independently derived answer key.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::net::Ipv6Addr;
use std::time::Duration;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use srascan::analysis::{alias_filter, match_replies, PrefixTable, RouterObservation};
use srascan::netsim::{Interface, NextHop, ReplySource, SimRouter, SimTopology, SimTransport};
use srascan::probe::{run_scan, ProbeConfig, ReplyRecord};
use srascan::{Ipv6Prefix, ProbeTarget};

pub const SCANNER: Ipv6Addr = Ipv6Addr::new(0x3fff, 0xffff, 0, 0, 0, 0, 0, 1);

pub struct Tree {
    pub topology: SimTopology,
    /// One /44 per router, each holding its LANs, dark space and maybe an
    /// aliased /48.
    pub announced: Vec<Ipv6Prefix>,
    pub aliased: Vec<Ipv6Prefix>,
    /// Addresses that must answer SRA probes into `announced`.
    pub sra_responders: BTreeSet<Ipv6Addr>,
}

fn prefix(bits: u128, len: u8) -> Ipv6Prefix {
    Ipv6Prefix::new(bits, len).unwrap()
}

fn addr(bits: u128) -> Ipv6Addr {
    Ipv6Addr::from(bits)
}

/// /44 for router `i`: 2001:db8:XXX0::/44 with XXX = i.
fn block(i: usize) -> u128 {
    (0x2001_0db8_u128 << 96) | ((i as u128) << 84)
}

fn lan(i: usize, j: u128) -> u128 {
    block(i) | (j << 80)
}

fn link(i: usize) -> u128 {
    (0x3fff_0000_u128 << 96) | ((i as u128) << 80)
}

/// Random tree of up to `max_routers` routers rooted at the entry router.
pub fn random_tree(rng: &mut ChaCha8Rng, max_routers: usize) -> Tree {
    let n = rng.random_range(1..=max_routers);
    let parent: Vec<Option<usize>> = (0..n).map(|i| (i > 0).then(|| rng.random_range(0..i))).collect();
    let children = |r: usize| -> Vec<usize> { (0..n).filter(|&c| parent[c] == Some(r)).collect() };

    let mut routers = Vec::with_capacity(n);
    let mut aliased = Vec::new();
    let mut sra_responders = BTreeSet::new();
    for i in 0..n {
        // First interface faces the parent (or the scanner for the root).
        let mut interfaces = vec![Interface {
            addr: addr(link(i) | if i == 0 { 1 } else { 2 }),
            subnet: prefix(link(i), 64),
        }];
        for c in children(i) {
            interfaces.push(Interface {
                addr: addr(link(c) | 1),
                subnet: prefix(link(c), 64),
            });
        }
        let mut lans: Vec<u128> = (0..15).collect();
        for k in 0..lans.len() {
            let j = rng.random_range(k..lans.len());
            lans.swap(k, j);
        }
        lans.truncate(rng.random_range(0..=4));
        for &j in &lans {
            interfaces.push(Interface {
                addr: addr(lan(i, j) | 1),
                subnet: prefix(lan(i, j), 48),
            });
        }
        if rng.random_bool(0.3) {
            aliased.push(prefix(lan(i, 15), 48));
        }

        let mut r = SimRouter::new(i as u32 + 1, interfaces);
        r.sra_enabled = rng.random_bool(0.75);
        r.reply_source = match rng.random_range(0..3) {
            0 => ReplySource::Ingress,
            1 => ReplySource::Subnet,
            _ => ReplySource::Loopback(addr((0x3fff_00ff_u128 << 96) | (i as u128 + 1))),
        };
        r.error_rate = rng.random_range(0..50);
        r.error_burst = rng.random_range(1..50);
        r = r.route(prefix(block(i), 44), NextHop::Local);
        let mut stack = children(i);
        while let Some(c) = stack.pop() {
            let via = {
                let mut v = c;
                while parent[v] != Some(i) {
                    v = parent[v].unwrap();
                }
                v
            };
            r = r.route(prefix(block(c), 44), NextHop::Router(via as u32 + 1));
            stack.extend(children(c));
        }
        r = r.route(
            prefix(0, 0),
            match parent[i] {
                Some(p) => NextHop::Router(p as u32 + 1),
                None => NextHop::Default,
            },
        );

        if r.sra_enabled {
            for &j in &lans {
                sra_responders.insert(match r.reply_source {
                    ReplySource::Ingress => r.interfaces[0].addr,
                    ReplySource::Subnet => addr(lan(i, j) | 1),
                    ReplySource::Loopback(a) => a,
                });
            }
        }
        routers.push(r);
    }
    let mut topology = SimTopology::new(1, routers);
    topology.aliased_prefixes = aliased.clone();
    topology.seed = rng.random();
    Tree {
        topology,
        announced: (0..n).map(|i| prefix(block(i), 44)).collect(),
        aliased,
        sra_responders,
    }
}

pub fn scan_config(secret: u64, hop_limit: u8) -> ProbeConfig {
    ProbeConfig {
        send_rate: 5_000_000,
        hop_limit,
        cooldown: Duration::from_secs(5),
        secret,
        source_address: SCANNER,
        ..ProbeConfig::default()
    }
}

/// Runs `targets` through the scan engine over a simulated topology whose
/// virtual send rate is `virtual_rate` probes per second.
pub fn sim_scan(
    topology: &SimTopology,
    targets: Vec<ProbeTarget>,
    cfg: &ProbeConfig,
    virtual_rate: u64,
) -> Vec<ReplyRecord> {
    let transport = SimTransport::new(topology.clone(), virtual_rate).unwrap();
    let mut replies = Vec::new();
    run_scan(targets, &transport, cfg, |r| replies.push(r)).unwrap();
    replies
}

/// gen output → scan → match → alias filter.
pub fn observe(
    topology: &SimTopology,
    targets: Vec<ProbeTarget>,
    aliased: &[Ipv6Prefix],
    cfg: &ProbeConfig,
) -> Vec<RouterObservation> {
    let probed: Vec<Ipv6Addr> = targets.iter().map(|t| t.address).collect();
    let replies = sim_scan(topology, targets, cfg, 100_000);
    let outcomes = match_replies(probed, replies);
    let table: PrefixTable<()> = aliased.iter().copied().collect();
    alias_filter(&outcomes, &table, "test")
}

pub fn echo_sources(obs: &[RouterObservation]) -> BTreeSet<Ipv6Addr> {
    obs.iter()
        .filter(|o| o.kinds().any(|k| k.is_echo_reply()))
        .map(|o| o.router_ip)
        .collect()
}
