//! Subnet-Router anycast (SRA) probing toolkit.
//!
//! * [`target_gen`] turns routing data and hitlists into SRA probe targets.
//! * [`probe`] crafts payload-tagged ICMPv6 Echo Requests, paces them through
//!   a [`probe::Transport`] and classifies whatever comes back.
//! * [`netsim`] is a deterministic IPv6 topology simulator implementing SRA
//!   replies, rate-limited ICMPv6 errors, aliased prefixes and routing loops.
//! * [`analysis`] matches replies to probes and derives router observations,
//!   summaries, stability, loop and overlap reports.

pub mod analysis;
pub mod io;
pub mod lpm;
pub mod manifest;
pub mod netsim;
pub mod prefix;
pub mod probe;
pub mod target_gen;

pub use prefix::{parse_prefix, sra_address, Ipv6Prefix, PrefixError};
pub use target_gen::{GenerationConfig, ProbeTarget, Stage};
