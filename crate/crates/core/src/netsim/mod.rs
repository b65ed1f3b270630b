//! Deterministic IPv6 topology simulator.
//!
//! Routers forward on longest-prefix match over their routes and connected
//! subnets, answer Echo Requests to the Subnet-Router anycast address of
//! their subnets, rate-limit originated ICMPv6 errors with a token bucket on
//! virtual time, and can replicate looping packets.

mod bucket;
pub mod scenario;
mod sim;
mod topology;
mod transport;

pub use bucket::TokenBucket;
pub use sim::{
    deliver, emitted_sources, run_trial, Delivery, Emitted, SimError, SimStats, Simulator, Transcript, TranscriptEvent,
    DEFAULT_EVENT_CAP, HOP_DELAY_NS, ORIGIN_HOP_LIMIT,
};
pub use topology::{
    Interface, NextHop, ReplySource, Route, RouterId, SimRouter, SimTopology, TopologyError, TOPOLOGY_VERSION,
};
pub use transport::SimTransport;
