//! Discrete-event forwarding engine.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};

use super::bucket::TokenBucket;
use super::topology::{NextHop, ReplySource, RouterId, SimTopology, TopologyError};
use crate::lpm::PrefixTable;
use crate::prefix::{sra_address, Ipv6Prefix};
use crate::probe::{
    build_icmpv6_packet, parse_ipv6, ICMP_DEST_UNREACHABLE, ICMP_ECHO_REPLY, ICMP_ECHO_REQUEST, ICMP_TIME_EXCEEDED,
    IPV6_HEADER_LEN, NEXT_HEADER_ICMPV6,
};

pub const DEFAULT_EVENT_CAP: u64 = 10_000_000;
/// Virtual time for one router-to-router (or router-to-scanner) hop.
pub const HOP_DELAY_NS: u64 = 1_000;
/// Hop limit routers use for packets they originate.
pub const ORIGIN_HOP_LIMIT: u8 = 64;
const MIN_MTU: usize = 1280;

const UNREACH_NO_ROUTE: u8 = 0;
const UNREACH_ADDRESS: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("malformed packet: {0}")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Forward(usize),
    Local,
    Exit,
}

/// Packet emitted towards the scanner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emitted {
    pub time_ns: u64,
    pub packet: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub injected: u64,
    pub events: u64,
    pub forwarded: u64,
    pub echo_replies: u64,
    pub errors_sent: u64,
    pub errors_suppressed: u64,
    pub exited: u64,
    pub dropped: u64,
    /// The event cap was reached and pending events were discarded.
    pub truncated: bool,
}

impl SimStats {
    pub fn emitted(&self) -> u64 {
        self.echo_replies + self.errors_sent
    }
}

struct Pending {
    time: u64,
    router_id: RouterId,
    seq: u64,
    at: usize,
    from: Option<usize>,
    hops: u32,
    packet: Vec<u8>,
}

impl Pending {
    fn key(&self) -> (u64, RouterId, u64) {
        (self.time, self.router_id, self.seq)
    }
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

struct Node {
    table: PrefixTable<Action>,
    own: HashSet<Ipv6Addr>,
}

/// How a locally delivered packet is handled.
enum LocalTarget {
    /// An interface of another router on the same link.
    Neighbor(usize),
    Link(Option<Ipv6Prefix>),
}

/// Deterministic single-threaded simulation of one topology.
pub struct Simulator {
    topo: SimTopology,
    nodes: Vec<Node>,
    entry: usize,
    aliased: PrefixTable<()>,
    owners: HashMap<Ipv6Addr, usize>,
    buckets: Vec<TokenBucket>,
    queue: BinaryHeap<Reverse<Pending>>,
    outbox: BinaryHeap<Reverse<(u64, u64, Vec<u8>)>>,
    seq: u64,
    now: u64,
    event_cap: u64,
    stats: SimStats,
}

impl Simulator {
    pub fn new(topo: SimTopology) -> Result<Self, SimError> {
        topo.validate()?;
        let index = topo.index();
        let nodes = topo
            .routers
            .iter()
            .map(|r| {
                let mut table = PrefixTable::new();
                for route in &r.routes {
                    let action = match route.next_hop {
                        NextHop::Router(id) => Action::Forward(index[&id]),
                        NextHop::Local => Action::Local,
                        NextHop::Default => Action::Exit,
                    };
                    table.insert(route.prefix, action);
                }
                // connected subnets take precedence over an identical static route
                for i in &r.interfaces {
                    table.insert(i.subnet, Action::Local);
                }
                Node {
                    table,
                    own: r.interfaces.iter().map(|i| i.addr).collect(),
                }
            })
            .collect();
        let buckets = topo
            .routers
            .iter()
            .map(|r| TokenBucket::new(r.error_rate, r.error_burst))
            .collect();
        let owners = topo
            .routers
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.interfaces.iter().map(move |f| (f.addr, i)))
            .collect();
        Ok(Self {
            entry: index[&topo.entry_router],
            owners,
            aliased: topo.aliased_prefixes.iter().copied().collect(),
            nodes,
            buckets,
            topo,
            queue: BinaryHeap::new(),
            outbox: BinaryHeap::new(),
            seq: 0,
            now: 0,
            event_cap: DEFAULT_EVENT_CAP,
            stats: SimStats::default(),
        })
    }

    pub fn with_event_cap(mut self, cap: u64) -> Self {
        self.event_cap = cap;
        self
    }

    pub fn topology(&self) -> &SimTopology {
        &self.topo
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn now_ns(&self) -> u64 {
        self.now
    }

    /// Current error-bucket level per router, in billionths of a token.
    pub fn token_levels(&self) -> Vec<(RouterId, u64)> {
        self.topo
            .routers
            .iter()
            .zip(&self.buckets)
            .map(|(r, b)| (r.id, u64::try_from(b.level_nano()).unwrap_or(u64::MAX)))
            .collect()
    }

    /// Hands a packet from the scanner to the entry router at `time_ns`
    /// (clamped to the current virtual time).
    pub fn inject(&mut self, time_ns: u64, packet: Vec<u8>) -> Result<(), SimError> {
        let (hdr, next, _) = parse_ipv6(&packet, false).ok_or(SimError::Malformed("not a complete IPv6 packet"))?;
        if hdr.hop_limit == 0 {
            return Err(SimError::Malformed("hop limit 0"));
        }
        if next != NEXT_HEADER_ICMPV6 {
            return Err(SimError::Malformed("not ICMPv6"));
        }
        self.stats.injected += 1;
        let at = self.entry;
        self.push(time_ns.max(self.now), at, None, 0, packet);
        Ok(())
    }

    fn push(&mut self, time: u64, at: usize, from: Option<usize>, hops: u32, packet: Vec<u8>) {
        self.seq += 1;
        self.queue.push(Reverse(Pending {
            time,
            router_id: self.topo.routers[at].id,
            seq: self.seq,
            at,
            from,
            hops,
            packet,
        }));
    }

    /// Processes every event scheduled at or before `t_ns`.
    pub fn run_until(&mut self, t_ns: u64) {
        while self.queue.peek().is_some_and(|Reverse(p)| p.time <= t_ns) {
            let Reverse(ev) = self.queue.pop().expect("peeked");
            self.step(ev);
        }
        self.now = self.now.max(t_ns);
    }

    /// Runs until no events remain (or the cap is hit).
    pub fn run(&mut self) {
        while let Some(Reverse(ev)) = self.queue.pop() {
            self.step(ev);
        }
    }

    /// Removes and returns emitted packets that reach the scanner by `t_ns`,
    /// in arrival order.
    pub fn take_emitted_until(&mut self, t_ns: u64) -> Vec<Emitted> {
        let mut out = Vec::new();
        while self.outbox.peek().is_some_and(|Reverse((t, _, _))| *t <= t_ns) {
            let Reverse((time_ns, _, packet)) = self.outbox.pop().expect("peeked");
            out.push(Emitted { time_ns, packet });
        }
        out
    }

    pub fn take_emitted(&mut self) -> Vec<Emitted> {
        self.take_emitted_until(u64::MAX)
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    fn step(&mut self, ev: Pending) {
        if self.stats.events >= self.event_cap {
            self.stats.truncated = true;
            self.queue.clear();
            return;
        }
        self.stats.events += 1;
        self.now = ev.time;
        let Pending {
            at, from, hops, packet, ..
        } = ev;

        let dst = Ipv6Addr::from(<[u8; 16]>::try_from(&packet[24..40]).expect("validated"));
        let icmp_type =
            (packet[6] == NEXT_HEADER_ICMPV6 && packet.len() > IPV6_HEADER_LEN).then(|| packet[IPV6_HEADER_LEN]);
        let is_echo_request = icmp_type == Some(ICMP_ECHO_REQUEST);
        let is_error = icmp_type.is_some_and(|t| t < 128);

        if self.nodes[at].own.contains(&dst) {
            if is_echo_request {
                self.echo_reply(dst, &packet, hops);
            } else {
                self.stats.dropped += 1;
            }
            return;
        }

        match self.nodes[at].table.lookup(dst).map(|(_, a)| *a) {
            Some(Action::Local) => match self.local_target(at, dst) {
                LocalTarget::Neighbor(n) => self.forward(at, n, from, hops, packet, is_error),
                LocalTarget::Link(subnet) => {
                    self.deliver_local(at, from, hops, &packet, subnet, is_echo_request, is_error)
                }
            },
            Some(Action::Forward(next)) => self.forward(at, next, from, hops, packet, is_error),
            Some(Action::Exit) => self.stats.exited += 1,
            None => {
                if !is_error {
                    let src = self.reply_source(at, from, None);
                    self.error(at, src, &packet, hops, ICMP_DEST_UNREACHABLE, UNREACH_NO_ROUTE);
                }
            }
        }
    }

    fn local_target(&self, at: usize, dst: Ipv6Addr) -> LocalTarget {
        let subnet = self.topo.routers[at]
            .interfaces
            .iter()
            .map(|i| i.subnet)
            .filter(|s| s.contains(dst))
            .max_by_key(|s| s.len());
        match (self.owners.get(&dst), subnet) {
            (Some(&n), Some(_)) if n != at => LocalTarget::Neighbor(n),
            _ => LocalTarget::Link(subnet),
        }
    }

    fn forward(&mut self, at: usize, next: usize, from: Option<usize>, hops: u32, mut packet: Vec<u8>, is_error: bool) {
        let hop_limit = packet[7];
        if hop_limit <= 1 {
            if !is_error {
                let src = self.reply_source(at, from, None);
                self.error(at, src, &packet, hops, ICMP_TIME_EXCEEDED, 0);
            }
            return;
        }
        packet[7] = hop_limit - 1;
        let copies = self.topo.routers[at].replication_factor;
        let when = self.now + HOP_DELAY_NS;
        for _ in 1..copies {
            self.stats.forwarded += 1;
            self.push(when, next, Some(at), hops + 1, packet.clone());
        }
        self.stats.forwarded += 1;
        self.push(when, next, Some(at), hops + 1, packet);
    }

    /// Delivery onto a connected link (or a `local` route without one).
    #[allow(clippy::too_many_arguments)]
    fn deliver_local(
        &mut self,
        at: usize,
        from: Option<usize>,
        hops: u32,
        packet: &[u8],
        subnet: Option<Ipv6Prefix>,
        is_echo_request: bool,
        is_error: bool,
    ) {
        let dst = Ipv6Addr::from(<[u8; 16]>::try_from(&packet[24..40]).expect("validated"));
        if self.aliased.contains(dst) {
            if is_echo_request {
                self.echo_reply(dst, packet, hops);
            } else {
                self.stats.dropped += 1;
            }
        } else if subnet.is_some_and(|s| sra_address(&s) == dst) {
            if self.topo.routers[at].sra_enabled && is_echo_request {
                let src = self.reply_source(at, from, subnet);
                self.echo_reply(src, packet, hops);
            } else {
                self.stats.dropped += 1;
            }
        } else if !is_error {
            let src = self.reply_source(at, from, subnet);
            self.error(at, src, packet, hops, ICMP_DEST_UNREACHABLE, UNREACH_ADDRESS);
        }
    }

    /// Address of the interface on `at` facing `from`; the first interface
    /// for packets straight from the scanner or without a shared subnet.
    fn ingress(&self, at: usize, from: Option<usize>) -> Ipv6Addr {
        let here = &self.topo.routers[at].interfaces;
        from.and_then(|f| {
            let there = &self.topo.routers[f].interfaces;
            here.iter()
                .find(|i| there.iter().any(|j| i.subnet == j.subnet || i.subnet.contains(j.addr)))
        })
        .unwrap_or(&here[0])
        .addr
    }

    fn reply_source(&self, at: usize, from: Option<usize>, subnet: Option<Ipv6Prefix>) -> Ipv6Addr {
        let router = &self.topo.routers[at];
        match router.reply_source {
            ReplySource::Loopback(addr) => addr,
            ReplySource::Subnet => subnet
                .and_then(|s| router.interfaces.iter().find(|i| i.subnet == s))
                .map(|i| i.addr)
                .unwrap_or_else(|| self.ingress(at, from)),
            ReplySource::Ingress => self.ingress(at, from),
        }
    }

    fn emit(&mut self, hops: u32, packet: Vec<u8>) {
        let arrival = self.now + (hops as u64 + 1) * HOP_DELAY_NS;
        self.seq += 1;
        self.outbox.push(Reverse((arrival, self.seq, packet)));
    }

    fn arrival_hop_limit(hops: u32) -> u8 {
        (ORIGIN_HOP_LIMIT as u32).saturating_sub(hops + 1).max(1) as u8
    }

    fn echo_reply(&mut self, src: Ipv6Addr, request: &[u8], hops: u32) {
        let requester = Ipv6Addr::from(<[u8; 16]>::try_from(&request[8..24]).expect("validated"));
        let icmp = &request[IPV6_HEADER_LEN..];
        let rest: [u8; 4] = icmp[4..8].try_into().expect("echo header");
        let reply = build_icmpv6_packet(
            src,
            requester,
            Self::arrival_hop_limit(hops),
            ICMP_ECHO_REPLY,
            0,
            rest,
            &icmp[8..],
        );
        self.stats.echo_replies += 1;
        self.emit(hops, reply);
    }

    fn error(&mut self, at: usize, src: Ipv6Addr, offending: &[u8], hops: u32, icmp_type: u8, code: u8) {
        if !self.buckets[at].take(self.now) {
            self.stats.errors_suppressed += 1;
            return;
        }
        let requester = Ipv6Addr::from(<[u8; 16]>::try_from(&offending[8..24]).expect("validated"));
        let quoted = &offending[..offending.len().min(MIN_MTU - IPV6_HEADER_LEN - 8)];
        let msg = build_icmpv6_packet(
            src,
            requester,
            Self::arrival_hop_limit(hops),
            icmp_type,
            code,
            [0; 4],
            quoted,
        );
        self.stats.errors_sent += 1;
        self.emit(hops, msg);
    }
}

/// Result of pushing one packet through a fresh simulator.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub emitted: Vec<Emitted>,
    pub stats: SimStats,
}

/// Simulates a single packet entering at the entry router and returns what
/// reaches the scanner.
pub fn deliver(topology: &SimTopology, packet: &[u8]) -> Result<Delivery, SimError> {
    let mut sim = Simulator::new(topology.clone())?;
    sim.inject(0, packet.to_vec())?;
    sim.run();
    Ok(Delivery {
        emitted: sim.take_emitted(),
        stats: sim.stats().clone(),
    })
}

/// One line of a transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Sent {
        t_ns: u64,
        #[serde(with = "hex")]
        packet: Vec<u8>,
    },
    Received {
        t_ns: u64,
        #[serde(with = "hex")]
        packet: Vec<u8>,
    },
    Tokens {
        router: RouterId,
        level_nano: u64,
    },
    Summary(SimStats),
}

/// Everything sent into and received out of a simulation, plus final
/// per-router token levels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn from_parts(
        sent: impl IntoIterator<Item = (u64, Vec<u8>)>,
        received: impl IntoIterator<Item = Emitted>,
        sim: &Simulator,
    ) -> Self {
        let mut events: Vec<_> = sent
            .into_iter()
            .map(|(t_ns, packet)| TranscriptEvent::Sent { t_ns, packet })
            .collect();
        events.extend(received.into_iter().map(|e| TranscriptEvent::Received {
            t_ns: e.time_ns,
            packet: e.packet,
        }));
        events.extend(
            sim.token_levels()
                .into_iter()
                .map(|(router, level_nano)| TranscriptEvent::Tokens { router, level_nano }),
        );
        events.push(TranscriptEvent::Summary(sim.stats().clone()));
        Self { events }
    }

    pub fn sent(&self) -> impl Iterator<Item = (u64, &[u8])> {
        self.events.iter().filter_map(|e| match e {
            TranscriptEvent::Sent { t_ns, packet } => Some((*t_ns, packet.as_slice())),
            _ => None,
        })
    }

    pub fn received(&self) -> impl Iterator<Item = (u64, &[u8])> {
        self.events.iter().filter_map(|e| match e {
            TranscriptEvent::Received { t_ns, packet } => Some((*t_ns, packet.as_slice())),
            _ => None,
        })
    }

    pub fn summary(&self) -> Option<&SimStats> {
        self.events.iter().rev().find_map(|e| match e {
            TranscriptEvent::Summary(s) => Some(s),
            _ => None,
        })
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("transcript event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { events })
    }

    /// Re-runs the recorded inputs against `topology`.
    pub fn replay(&self, topology: &SimTopology) -> Result<Transcript, SimError> {
        let mut sim = Simulator::new(topology.clone())?;
        let sent: Vec<(u64, Vec<u8>)> = self.sent().map(|(t, p)| (t, p.to_vec())).collect();
        for (t, p) in &sent {
            sim.run_until(t.saturating_sub(1));
            sim.inject(*t, p.clone())?;
        }
        sim.run();
        let received = sim.take_emitted();
        Ok(Transcript::from_parts(sent, received, &sim))
    }
}

/// Injects `probes` at fixed `interval_ns` spacing and runs to completion.
pub fn run_trial<I>(topology: &SimTopology, probes: I, interval_ns: u64) -> Result<Transcript, SimError>
where
    I: IntoIterator<Item = Vec<u8>>,
{
    let mut sim = Simulator::new(topology.clone())?;
    let mut sent = Vec::new();
    for (i, p) in probes.into_iter().enumerate() {
        let t = i as u64 * interval_ns;
        sim.run_until(t.saturating_sub(1));
        sim.inject(t, p.clone())?;
        sent.push((t, p));
    }
    sim.run();
    let received = sim.take_emitted();
    Ok(Transcript::from_parts(sent, received, &sim))
}

/// Per-source counts of what a topology emitted, keyed by source address.
pub fn emitted_sources(emitted: &[Emitted]) -> HashMap<Ipv6Addr, u64> {
    let mut m = HashMap::new();
    for e in emitted {
        if let Some((hdr, _, _)) = parse_ipv6(&e.packet, false) {
            *m.entry(hdr.src).or_insert(0) += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::scenario::loop_topology;
    use crate::netsim::topology::{Interface, SimRouter};
    use crate::prefix::parse_prefix;
    use crate::probe::{build_echo_request, classify_icmp, ProbeConfig, ReplyKind};
    use crate::target_gen::{ProbeTarget, Stage};

    const SECRET: u64 = 5;

    fn probe(dst: &str, hop_limit: u8) -> Vec<u8> {
        let cfg = ProbeConfig {
            hop_limit,
            secret: SECRET,
            source_address: "3fff:ffff::1".parse().unwrap(),
            ..ProbeConfig::default()
        };
        let address: Ipv6Addr = dst.parse().unwrap();
        build_echo_request(
            &ProbeTarget {
                address,
                origin: Ipv6Prefix::from_addr(address, 128).unwrap(),
                stage: Stage::Hitlist64,
            },
            &cfg,
        )
    }

    fn iface(addr: &str, subnet: &str) -> Interface {
        Interface {
            addr: addr.parse().unwrap(),
            subnet: parse_prefix(subnet).unwrap(),
        }
    }

    /// Scanner-facing router 1, customer router 2 with two LANs.
    fn two_router() -> SimTopology {
        let p = |s: &str| parse_prefix(s).unwrap();
        let r1 = SimRouter::new(
            1,
            vec![
                iface("2001:db8:ffff::1", "2001:db8:ffff::/64"),
                iface("2001:db8:10::1", "2001:db8:10::/64"),
            ],
        )
        .route(p("2001:db8:20::/48"), NextHop::Router(2))
        .route(p("2001:db8:aa::/48"), NextHop::Router(2));
        let r2 = SimRouter::new(
            2,
            vec![
                iface("2001:db8:10::2", "2001:db8:10::/64"),
                iface("2001:db8:20:1::1", "2001:db8:20:1::/64"),
            ],
        )
        .route(p("2001:db8:aa::/48"), NextHop::Local)
        .route(p("::/0"), NextHop::Router(1));
        let mut t = SimTopology::new(1, vec![r1, r2]);
        t.aliased_prefixes.push(p("2001:db8:aa::/48"));
        t
    }

    fn kinds(d: &Delivery) -> Vec<(ReplyKind, Ipv6Addr, Option<Ipv6Addr>)> {
        d.emitted
            .iter()
            .map(|e| {
                let r = classify_icmp(&e.packet, SECRET).expect("classifiable");
                (r.kind, r.source, r.embedded_target)
            })
            .collect()
    }

    #[test]
    fn sra_reply_comes_from_ingress_interface() {
        let t = two_router();
        let d = deliver(&t, &probe("2001:db8:20:1::", 64)).unwrap();
        let sra: Ipv6Addr = "2001:db8:20:1::".parse().unwrap();
        assert_eq!(
            kinds(&d),
            vec![(ReplyKind::EchoReply, "2001:db8:10::2".parse().unwrap(), Some(sra))]
        );
        // two router hops out, reply crosses two back
        assert_eq!(d.emitted[0].time_ns, 3 * HOP_DELAY_NS);
        assert_eq!(parse_ipv6(&d.emitted[0].packet, false).unwrap().0.hop_limit, 62);
    }

    #[test]
    fn sra_disabled_is_silent() {
        let mut t = two_router();
        t.routers[1].sra_enabled = false;
        let d = deliver(&t, &probe("2001:db8:20:1::", 64)).unwrap();
        assert!(d.emitted.is_empty());
        assert_eq!(d.stats.dropped, 1);
    }

    #[test]
    fn loopback_reply_source() {
        let mut t = two_router();
        t.routers[1].reply_source = ReplySource::Loopback("2001:db8:ff::2".parse().unwrap());
        let d = deliver(&t, &probe("2001:db8:20:1::", 64)).unwrap();
        assert_eq!(kinds(&d)[0].1, "2001:db8:ff::2".parse::<Ipv6Addr>().unwrap());
    }

    #[test]
    fn aliased_prefix_answers_from_destination() {
        let t = two_router();
        let d = deliver(&t, &probe("2001:db8:aa:5::77", 64)).unwrap();
        let dst: Ipv6Addr = "2001:db8:aa:5::77".parse().unwrap();
        assert_eq!(kinds(&d), vec![(ReplyKind::EchoReply, dst, Some(dst))]);
    }

    #[test]
    fn host_on_connected_subnet_is_address_unreachable() {
        let t = two_router();
        let d = deliver(&t, &probe("2001:db8:20:1::99", 64)).unwrap();
        assert_eq!(kinds(&d)[0].0, ReplyKind::DestinationUnreachable(3));
        assert_eq!(kinds(&d)[0].1, "2001:db8:10::2".parse::<Ipv6Addr>().unwrap());
    }

    #[test]
    fn no_route_is_unreachable_code_zero() {
        let t = two_router();
        let d = deliver(&t, &probe("2001:db9::", 64)).unwrap();
        assert_eq!(
            kinds(&d),
            vec![(
                ReplyKind::DestinationUnreachable(0),
                "2001:db8:ffff::1".parse().unwrap(),
                Some("2001:db9::".parse().unwrap())
            )]
        );
    }

    #[test]
    fn own_address_answers() {
        let t = two_router();
        let d = deliver(&t, &probe("2001:db8:10::2", 64)).unwrap();
        assert_eq!(kinds(&d)[0].1, "2001:db8:10::2".parse::<Ipv6Addr>().unwrap());
        assert_eq!(kinds(&d)[0].0, ReplyKind::EchoReply);
    }

    #[test]
    fn zero_rate_suppresses_errors_only() {
        let mut t = two_router();
        for r in &mut t.routers {
            r.error_rate = 0;
        }
        assert!(deliver(&t, &probe("2001:db9::", 64)).unwrap().emitted.is_empty());
        assert!(deliver(&t, &probe("2001:db8:20:1::99", 64)).unwrap().emitted.is_empty());
        assert_eq!(deliver(&t, &probe("2001:db8:20:1::", 64)).unwrap().emitted.len(), 1);
    }

    #[test]
    fn bucket_limits_errors_but_not_echo_replies() {
        let mut t = two_router();
        t.routers[0].error_rate = 1;
        t.routers[0].error_burst = 3;
        let probes = (0..20)
            .flat_map(|i| [probe(&format!("2001:db9::{i:x}"), 64), probe("2001:db8:20:1::", 64)])
            .collect::<Vec<_>>();
        let tr = run_trial(&t, probes, 1_000).unwrap();
        let s = tr.summary().unwrap();
        assert_eq!(s.errors_sent, 3);
        assert_eq!(s.errors_suppressed, 17);
        assert_eq!(s.echo_replies, 20);
    }

    #[test]
    fn hop_limit_expiry_in_plain_loop() {
        for h in [1u8, 2, 3, 8, 64] {
            let t = loop_topology(1, 1);
            let d = deliver(&t, &probe("2001:db8:4000::", h)).unwrap();
            assert_eq!(d.stats.errors_sent, 1, "hop limit {h}");
            assert_eq!(d.stats.events, h as u64, "one event per traversed hop");
            assert_eq!(kinds(&d)[0].0, ReplyKind::TimeExceeded(0));
        }
    }

    #[test]
    fn replication_grows_time_exceeded_exponentially() {
        for h in 2u8..=16 {
            let t = loop_topology(2, 1);
            let d = deliver(&t, &probe("2001:db8:4000::", h)).unwrap();
            assert_eq!(d.stats.errors_sent, 1u64 << (h / 2), "hop limit {h}");
            assert_eq!(d.emitted.len() as u64, d.stats.errors_sent);
        }
    }

    #[test]
    fn event_cap_truncates_and_reports() {
        let t = loop_topology(2, 2);
        let mut sim = Simulator::new(t).unwrap().with_event_cap(1_000);
        sim.inject(0, probe("2001:db8:4000::", 64)).unwrap();
        sim.run();
        assert!(sim.stats().truncated);
        assert_eq!(sim.stats().events, 1_000);
        assert_eq!(sim.pending_events(), 0);
    }

    #[test]
    fn malformed_packets_rejected() {
        let t = two_router();
        assert!(matches!(deliver(&t, &[0x60; 20]), Err(SimError::Malformed(_))));
        let mut p = probe("2001:db8:20:1::", 64);
        p[7] = 0;
        assert!(matches!(deliver(&t, &p), Err(SimError::Malformed(_))));
        let mut p = probe("2001:db8:20:1::", 64);
        p[6] = 17;
        assert!(matches!(deliver(&t, &p), Err(SimError::Malformed(_))));
    }

    #[test]
    fn transcript_is_deterministic_and_replayable() {
        let t = loop_topology(2, 1);
        let probes: Vec<_> = (0..30)
            .map(|i| probe(&format!("2001:db8:{:x}::", 0x4000 + i), 6 + (i % 5) as u8))
            .collect();
        let a = run_trial(&t, probes.clone(), 5_000).unwrap();
        let b = run_trial(&t, probes, 5_000).unwrap();
        assert_eq!(a.to_ndjson(), b.to_ndjson());
        let parsed = Transcript::from_ndjson(&a.to_ndjson()).unwrap();
        assert_eq!(parsed, a);
        assert_eq!(a.replay(&t).unwrap(), a);
        assert_eq!(a.sent().count(), 30);
        assert!(a.received().count() > 30);
    }

    #[test]
    fn without_replication_at_most_one_message_per_request() {
        let t = two_router();
        for dst in [
            "2001:db8:20:1::",
            "2001:db8:20:1::5",
            "2001:db8:20:2::",
            "2001:db9::",
            "2001:db8:aa::1",
        ] {
            for h in [1u8, 2, 64] {
                let d = deliver(&t, &probe(dst, h)).unwrap();
                assert!(d.emitted.len() <= 1, "{dst} hl {h}");
            }
        }
    }
}
