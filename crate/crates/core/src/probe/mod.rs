//! Payload-tagged ICMPv6 Echo probing.

mod engine;
#[cfg(target_os = "linux")]
mod live;
mod pacing;
mod packet;
mod payload;
mod transport;

use std::net::Ipv6Addr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use engine::{run_scan, ScanError, ScanStats};
#[cfg(target_os = "linux")]
pub use live::LiveTransport;
pub use pacing::Pacer;
pub use packet::{
    build_echo_request, build_icmpv6_packet, classify_icmp, icmpv6_checksum, parse_ipv6, EchoProbe, Ipv6Header,
    ReplyKind, ReplyRecord, ECHO_REQUEST_LEN, ICMPV6_HEADER_LEN, ICMP_DEST_UNREACHABLE, ICMP_ECHO_REPLY,
    ICMP_ECHO_REQUEST, ICMP_PACKET_TOO_BIG, ICMP_PARAMETER_PROBLEM, ICMP_TIME_EXCEEDED, IPV6_HEADER_LEN,
    NEXT_HEADER_ICMPV6,
};
pub use payload::{decode_payload, encode_payload, PAYLOAD_LEN};
pub use transport::{Captured, Transport, TransportError};

pub const DEFAULT_SEND_RATE: u64 = 200_000;
pub const DEFAULT_HOP_LIMIT: u8 = 64;
pub const DEFAULT_COOLDOWN: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Packets per second, long-run average.
    pub send_rate: u64,
    pub hop_limit: u8,
    /// How long to keep capturing after the final send.
    #[serde(rename = "cooldown_ms", with = "millis")]
    pub cooldown: Duration,
    /// Never written to manifests.
    #[serde(skip)]
    pub secret: u64,
    pub source_address: Ipv6Addr,
    /// Echo identifier: which scan pass a probe belongs to.
    pub scan_tag: u16,
    /// Echo sequence number: shard index of this sender.
    pub shard: u16,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            send_rate: DEFAULT_SEND_RATE,
            hop_limit: DEFAULT_HOP_LIMIT,
            cooldown: DEFAULT_COOLDOWN,
            secret: 0,
            source_address: Ipv6Addr::UNSPECIFIED,
            scan_tag: 0,
            shard: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("send rate must be positive")]
    ZeroRate,
    #[error("hop limit must be between 1 and 255")]
    ZeroHopLimit,
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.send_rate == 0 {
            return Err(ConfigError::ZeroRate);
        }
        if self.hop_limit == 0 {
            return Err(ConfigError::ZeroHopLimit);
        }
        Ok(())
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}
