//! Declarative topology model and its versioned JSON file format.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::net::Ipv6Addr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::prefix::Ipv6Prefix;

pub const TOPOLOGY_VERSION: u32 = 1;

pub type RouterId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    pub addr: Ipv6Addr,
    pub subnet: Ipv6Prefix,
}

/// Where a route sends matching packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NextHop {
    Router(RouterId),
    /// Deliver on a directly attached subnet.
    Local,
    /// Hand the packet to the world outside the model; it is not seen again.
    Default,
}

impl Serialize for NextHop {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            NextHop::Router(id) => s.serialize_u32(*id),
            NextHop::Local => s.serialize_str("local"),
            NextHop::Default => s.serialize_str("default"),
        }
    }
}

impl<'de> Deserialize<'de> for NextHop {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = NextHop;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a router id, \"local\" or \"default\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<NextHop, E> {
                RouterId::try_from(v)
                    .map(NextHop::Router)
                    .map_err(|_| E::custom("router id out of range"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<NextHop, E> {
                RouterId::try_from(v)
                    .map(NextHop::Router)
                    .map_err(|_| E::custom("router id out of range"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<NextHop, E> {
                match v {
                    "local" => Ok(NextHop::Local),
                    "default" => Ok(NextHop::Default),
                    other => Err(E::custom(format!("unknown next hop `{other}`"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub prefix: Ipv6Prefix,
    pub next_hop: NextHop,
}

/// Source address a router uses for the replies and errors it originates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplySource {
    /// The interface the triggering packet arrived on.
    #[default]
    Ingress,
    /// The interface on the probed subnet (falls back to ingress when the
    /// router has none there).
    Subnet,
    /// A fixed loopback address.
    Loopback(Ipv6Addr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRouter {
    pub id: RouterId,
    pub interfaces: Vec<Interface>,
    #[serde(default)]
    pub routes: Vec<Route>,
    /// ICMPv6 error tokens per second; 0 disables error messages.
    pub error_rate: u64,
    pub error_burst: u64,
    pub sra_enabled: bool,
    #[serde(default = "one")]
    pub replication_factor: u32,
    #[serde(default)]
    pub reply_source: ReplySource,
}

fn one() -> u32 {
    1
}

impl SimRouter {
    /// A router with the given interfaces, SRA on, no routes, a 10/s error
    /// budget with burst 10, and no replication.
    pub fn new(id: RouterId, interfaces: Vec<Interface>) -> Self {
        Self {
            id,
            interfaces,
            routes: Vec::new(),
            error_rate: 10,
            error_burst: 10,
            sra_enabled: true,
            replication_factor: 1,
            reply_source: ReplySource::Ingress,
        }
    }

    pub fn route(mut self, prefix: Ipv6Prefix, next_hop: NextHop) -> Self {
        self.routes.push(Route { prefix, next_hop });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTopology {
    pub version: u32,
    pub routers: Vec<SimRouter>,
    pub entry_router: RouterId,
    #[serde(default)]
    pub aliased_prefixes: Vec<Ipv6Prefix>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error("unsupported topology version {0}")]
    Version(u32),
    #[error("duplicate router id {0}")]
    DuplicateRouter(RouterId),
    #[error("entry router {0} does not exist")]
    MissingEntry(RouterId),
    #[error("router {router}: next hop {next_hop} does not exist")]
    DanglingNextHop { router: RouterId, next_hop: RouterId },
    #[error("router {router}: interface {addr} is outside {subnet}")]
    InterfaceOutsideSubnet {
        router: RouterId,
        addr: Ipv6Addr,
        subnet: Ipv6Prefix,
    },
    #[error("router {0} has no interfaces")]
    NoInterfaces(RouterId),
    #[error("router {0}: replication factor must be at least 1")]
    ZeroReplication(RouterId),
    #[error("topology JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimTopology {
    pub fn new(entry_router: RouterId, routers: Vec<SimRouter>) -> Self {
        Self {
            version: TOPOLOGY_VERSION,
            routers,
            entry_router,
            aliased_prefixes: Vec::new(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.version != TOPOLOGY_VERSION {
            return Err(TopologyError::Version(self.version));
        }
        let mut ids = HashSet::new();
        for r in &self.routers {
            if !ids.insert(r.id) {
                return Err(TopologyError::DuplicateRouter(r.id));
            }
        }
        if !ids.contains(&self.entry_router) {
            return Err(TopologyError::MissingEntry(self.entry_router));
        }
        for r in &self.routers {
            if r.interfaces.is_empty() {
                return Err(TopologyError::NoInterfaces(r.id));
            }
            if r.replication_factor == 0 {
                return Err(TopologyError::ZeroReplication(r.id));
            }
            for i in &r.interfaces {
                if !i.subnet.contains(i.addr) {
                    return Err(TopologyError::InterfaceOutsideSubnet {
                        router: r.id,
                        addr: i.addr,
                        subnet: i.subnet,
                    });
                }
            }
            for route in &r.routes {
                if let NextHop::Router(n) = route.next_hop {
                    if !ids.contains(&n) {
                        return Err(TopologyError::DanglingNextHop {
                            router: r.id,
                            next_hop: n,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let t: SimTopology = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }

    pub fn router(&self, id: RouterId) -> Option<&SimRouter> {
        self.routers.iter().find(|r| r.id == id)
    }

    pub(crate) fn index(&self) -> HashMap<RouterId, usize> {
        self.routers.iter().enumerate().map(|(i, r)| (r.id, i)).collect()
    }
}
