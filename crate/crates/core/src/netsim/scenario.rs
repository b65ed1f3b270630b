//! Ready-made topologies.

use super::topology::{Interface, NextHop, ReplySource, SimRouter, SimTopology};
use crate::prefix::{parse_prefix, Ipv6Prefix};

fn p(s: &str) -> Ipv6Prefix {
    parse_prefix(s).expect("static prefix")
}

fn iface(addr: &str, subnet: &str) -> Interface {
    Interface {
        addr: addr.parse().expect("static address"),
        subnet: p(subnet),
    }
}

/// Large enough that no error is ever suppressed in small experiments.
const GENEROUS: u64 = 1_000_000_000;

/// Provider (router 1, entry) routes the customer's covering
/// `2001:db8::/32` to the customer (router 2). The customer only uses
/// `2001:db8::/48` and points a default route back at the provider, so any
/// other destination inside the /32 bounces between the two until the hop
/// limit runs out.
pub fn loop_topology(provider_replication: u32, customer_replication: u32) -> SimTopology {
    let mut provider = SimRouter::new(
        1,
        vec![
            iface("3fff:0:1::1", "3fff:0:1::/64"),
            iface("3fff:0:12::1", "3fff:0:12::/64"),
        ],
    )
    .route(p("2001:db8::/32"), NextHop::Router(2))
    .route(p("::/0"), NextHop::Default);
    provider.replication_factor = provider_replication;
    provider.error_rate = GENEROUS;
    provider.error_burst = GENEROUS;

    let mut customer = SimRouter::new(
        2,
        vec![
            iface("3fff:0:12::2", "3fff:0:12::/64"),
            iface("2001:db8::1", "2001:db8::/48"),
        ],
    )
    .route(p("::/0"), NextHop::Router(1));
    customer.replication_factor = customer_replication;
    customer.error_rate = GENEROUS;
    customer.error_burst = GENEROUS;

    SimTopology::new(1, vec![provider, customer])
}

/// One gateway with `active` connected /64 LANs and `inactive` /64s it has
/// no route for.
#[derive(Debug, Clone)]
pub struct GatewayScenario {
    pub topology: SimTopology,
    pub active: Vec<Ipv6Prefix>,
    pub inactive: Vec<Ipv6Prefix>,
}

/// The gateway answers from the interface on the probed LAN and rate-limits
/// its errors with `(error_rate, error_burst)`.
pub fn gateway_topology(active: u16, inactive: u16, error_rate: u64, error_burst: u64) -> GatewayScenario {
    let lan = |net: u128, i: u16| Ipv6Prefix::truncate(net | (i as u128) << 64, 64);
    let active_nets: Vec<_> = (0..active).map(|i| lan(0x2001_0db8_000a_u128 << 80, i)).collect();
    let inactive_nets: Vec<_> = (0..inactive).map(|i| lan(0x2001_0db8_000b_u128 << 80, i)).collect();
    let mut interfaces = vec![iface("3fff:0:2::1", "3fff:0:2::/64")];
    interfaces.extend(active_nets.iter().map(|n| Interface {
        addr: (n.bits() | 1).into(),
        subnet: *n,
    }));
    let mut gw = SimRouter::new(1, interfaces);
    gw.reply_source = ReplySource::Subnet;
    gw.error_rate = error_rate;
    gw.error_burst = error_burst;
    GatewayScenario {
        topology: SimTopology::new(1, vec![gw]),
        active: active_nets,
        inactive: inactive_nets,
    }
}

/// Small mixed topology behind one provider:
///
/// * router 2 answers SRA on three subnets, hosts an aliased /48 and loops
///   the rest of its /40 back to the provider;
/// * router 3 has SRA disabled and answers errors from a loopback;
/// * router 4 loops with replication factor 2.
pub fn demo_topology() -> SimTopology {
    let mut provider = SimRouter::new(
        1,
        vec![
            iface("3fff:0:1::1", "3fff:0:1::/64"),
            iface("3fff:0:12::1", "3fff:0:12::/64"),
            iface("3fff:0:13::1", "3fff:0:13::/64"),
            iface("3fff:0:14::1", "3fff:0:14::/64"),
        ],
    )
    .route(p("2001:db8:100::/40"), NextHop::Router(2))
    .route(p("2001:db8:200::/40"), NextHop::Router(3))
    .route(p("2001:db8:300::/40"), NextHop::Router(4))
    .route(p("::/0"), NextHop::Default);
    provider.error_rate = 1_000;
    provider.error_burst = 1_000;

    let mut c2 = SimRouter::new(
        2,
        vec![
            iface("3fff:0:12::2", "3fff:0:12::/64"),
            iface("2001:db8:100::1", "2001:db8:100::/48"),
            iface("2001:db8:101::1", "2001:db8:101::/48"),
            iface("2001:db8:102::1", "2001:db8:102::/48"),
        ],
    )
    .route(p("2001:db8:1ff::/48"), NextHop::Local)
    .route(p("::/0"), NextHop::Router(1));
    c2.error_rate = 20;
    c2.error_burst = 20;

    let mut c3 = SimRouter::new(
        3,
        vec![
            iface("3fff:0:13::2", "3fff:0:13::/64"),
            iface("2001:db8:200::1", "2001:db8:200::/48"),
        ],
    )
    .route(p("2001:db8:200::/40"), NextHop::Local)
    .route(p("::/0"), NextHop::Router(1));
    c3.sra_enabled = false;
    c3.reply_source = ReplySource::Loopback("3fff:0:ff::3".parse().expect("static address"));
    c3.error_rate = 5;
    c3.error_burst = 5;

    let mut c4 = SimRouter::new(
        4,
        vec![
            iface("3fff:0:14::2", "3fff:0:14::/64"),
            iface("2001:db8:300::1", "2001:db8:300::/48"),
        ],
    )
    .route(p("::/0"), NextHop::Router(1));
    c4.replication_factor = 2;
    c4.error_rate = 1_000;
    c4.error_burst = 1_000;

    let mut t = SimTopology::new(1, vec![provider, c2, c3, c4]);
    t.aliased_prefixes.push(p("2001:db8:1ff::/48"));
    t.seed = 1;
    t
}
