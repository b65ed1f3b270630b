//! IPv6 / ICMPv6 wire format: Echo Request construction and reply
//! classification.

use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};

use super::payload::{decode_payload, encode_payload, PAYLOAD_LEN};
use super::ProbeConfig;
use crate::target_gen::ProbeTarget;

pub const IPV6_HEADER_LEN: usize = 40;
pub const ICMPV6_HEADER_LEN: usize = 8;
pub const NEXT_HEADER_ICMPV6: u8 = 58;
pub const ECHO_REQUEST_LEN: usize = IPV6_HEADER_LEN + ICMPV6_HEADER_LEN + PAYLOAD_LEN;

pub const ICMP_DEST_UNREACHABLE: u8 = 1;
pub const ICMP_PACKET_TOO_BIG: u8 = 2;
pub const ICMP_TIME_EXCEEDED: u8 = 3;
pub const ICMP_PARAMETER_PROBLEM: u8 = 4;
pub const ICMP_ECHO_REQUEST: u8 = 128;
pub const ICMP_ECHO_REPLY: u8 = 129;

/// One's-complement sum of 16-bit big-endian words, not yet folded.
fn sum_words(data: &[u8], mut acc: u64) -> u64 {
    let mut chunks = data.chunks_exact(2);
    for c in &mut chunks {
        acc += u16::from_be_bytes([c[0], c[1]]) as u64;
    }
    if let [last] = chunks.remainder() {
        acc += (*last as u64) << 8;
    }
    acc
}

fn fold(mut acc: u64) -> u16 {
    while acc >> 16 != 0 {
        acc = (acc & 0xffff) + (acc >> 16);
    }
    acc as u16
}

/// ICMPv6 checksum of `message` (with its checksum field as stored) under the
/// IPv6 pseudo-header. A message carrying a correct checksum sums to zero.
pub fn icmpv6_checksum(src: &Ipv6Addr, dst: &Ipv6Addr, message: &[u8]) -> u16 {
    let mut acc = sum_words(&src.octets(), 0);
    acc = sum_words(&dst.octets(), acc);
    acc += message.len() as u64;
    acc += NEXT_HEADER_ICMPV6 as u64;
    acc = sum_words(message, acc);
    !fold(acc)
}

/// Writes an IPv6 header followed by an ICMPv6 message with a valid checksum.
pub fn build_icmpv6_packet(
    src: Ipv6Addr,
    dst: Ipv6Addr,
    hop_limit: u8,
    icmp_type: u8,
    code: u8,
    rest_of_header: [u8; 4],
    body: &[u8],
) -> Vec<u8> {
    let icmp_len = ICMPV6_HEADER_LEN + body.len();
    let mut pkt = Vec::with_capacity(IPV6_HEADER_LEN + icmp_len);
    pkt.extend_from_slice(&[0x60, 0, 0, 0]);
    pkt.extend_from_slice(&(icmp_len as u16).to_be_bytes());
    pkt.push(NEXT_HEADER_ICMPV6);
    pkt.push(hop_limit);
    pkt.extend_from_slice(&src.octets());
    pkt.extend_from_slice(&dst.octets());
    pkt.extend_from_slice(&[icmp_type, code, 0, 0]);
    pkt.extend_from_slice(&rest_of_header);
    pkt.extend_from_slice(body);
    let csum = icmpv6_checksum(&src, &dst, &pkt[IPV6_HEADER_LEN..]);
    pkt[IPV6_HEADER_LEN + 2..IPV6_HEADER_LEN + 4].copy_from_slice(&csum.to_be_bytes());
    pkt
}

/// A single probe before serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EchoProbe {
    pub target: ProbeTarget,
    pub identifier: u16,
    pub sequence: u16,
    pub payload: Vec<u8>,
}

impl EchoProbe {
    /// Identifier and sequence carry the scan-pass tag and shard index; no
    /// per-target state is kept.
    pub fn new(target: ProbeTarget, cfg: &ProbeConfig) -> Self {
        Self {
            target,
            identifier: cfg.scan_tag,
            sequence: cfg.shard,
            payload: encode_payload(target.address, cfg.secret).to_vec(),
        }
    }

    pub fn to_bytes(&self, cfg: &ProbeConfig) -> Vec<u8> {
        let mut rest = [0u8; 4];
        rest[..2].copy_from_slice(&self.identifier.to_be_bytes());
        rest[2..].copy_from_slice(&self.sequence.to_be_bytes());
        build_icmpv6_packet(
            cfg.source_address,
            self.target.address,
            cfg.hop_limit,
            ICMP_ECHO_REQUEST,
            0,
            rest,
            &self.payload,
        )
    }
}

pub fn build_echo_request(target: &ProbeTarget, cfg: &ProbeConfig) -> Vec<u8> {
    EchoProbe::new(*target, cfg).to_bytes(cfg)
}

/// Fixed IPv6 header fields of a parsed packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ipv6Header {
    pub payload_len: u16,
    pub hop_limit: u8,
    pub src: Ipv6Addr,
    pub dst: Ipv6Addr,
}

/// Parses an IPv6 packet and walks extension headers to the upper layer.
/// Returns the header, the upper-layer protocol and its bytes. With
/// `truncated_ok`, a payload shorter than the declared length is accepted
/// (quoted packets inside ICMPv6 errors are usually cut).
pub fn parse_ipv6(bytes: &[u8], truncated_ok: bool) -> Option<(Ipv6Header, u8, &[u8])> {
    if bytes.len() < IPV6_HEADER_LEN || bytes[0] >> 4 != 6 {
        return None;
    }
    let payload_len = u16::from_be_bytes([bytes[4], bytes[5]]);
    let mut next = bytes[6];
    let header = Ipv6Header {
        payload_len,
        hop_limit: bytes[7],
        src: Ipv6Addr::from(<[u8; 16]>::try_from(&bytes[8..24]).ok()?),
        dst: Ipv6Addr::from(<[u8; 16]>::try_from(&bytes[24..40]).ok()?),
    };
    let declared_end = IPV6_HEADER_LEN + payload_len as usize;
    let end = if declared_end <= bytes.len() {
        declared_end
    } else if truncated_ok {
        bytes.len()
    } else {
        return None;
    };
    let mut rest = &bytes[IPV6_HEADER_LEN..end];
    loop {
        match next {
            // hop-by-hop, routing, destination options
            0 | 43 | 60 => {
                if rest.len() < 8 {
                    return None;
                }
                let len = (rest[1] as usize + 1) * 8;
                if rest.len() < len {
                    return None;
                }
                next = rest[0];
                rest = &rest[len..];
            }
            // fragment: only the first fragment carries the upper header
            44 => {
                if rest.len() < 8 {
                    return None;
                }
                let offset = u16::from_be_bytes([rest[2], rest[3]]) >> 3;
                if offset != 0 {
                    return None;
                }
                next = rest[0];
                rest = &rest[8..];
            }
            _ => return Some((header, next, rest)),
        }
    }
}

/// ICMPv6 message categories a scan can elicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReplyKind {
    EchoReply,
    DestinationUnreachable(u8),
    PacketTooBig,
    TimeExceeded(u8),
    ParameterProblem(u8),
    Other { icmp_type: u8, code: u8 },
}

impl ReplyKind {
    pub fn from_type_code(icmp_type: u8, code: u8) -> Self {
        match icmp_type {
            ICMP_ECHO_REPLY => ReplyKind::EchoReply,
            ICMP_DEST_UNREACHABLE => ReplyKind::DestinationUnreachable(code),
            ICMP_PACKET_TOO_BIG => ReplyKind::PacketTooBig,
            ICMP_TIME_EXCEEDED => ReplyKind::TimeExceeded(code),
            ICMP_PARAMETER_PROBLEM => ReplyKind::ParameterProblem(code),
            _ => ReplyKind::Other { icmp_type, code },
        }
    }

    pub fn icmp_type(&self) -> u8 {
        match self {
            ReplyKind::EchoReply => ICMP_ECHO_REPLY,
            ReplyKind::DestinationUnreachable(_) => ICMP_DEST_UNREACHABLE,
            ReplyKind::PacketTooBig => ICMP_PACKET_TOO_BIG,
            ReplyKind::TimeExceeded(_) => ICMP_TIME_EXCEEDED,
            ReplyKind::ParameterProblem(_) => ICMP_PARAMETER_PROBLEM,
            ReplyKind::Other { icmp_type, .. } => *icmp_type,
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            ReplyKind::EchoReply | ReplyKind::PacketTooBig => 0,
            ReplyKind::DestinationUnreachable(c) | ReplyKind::TimeExceeded(c) | ReplyKind::ParameterProblem(c) => *c,
            ReplyKind::Other { code, .. } => *code,
        }
    }

    /// ICMPv6 error messages are types 0-127.
    pub fn is_error(&self) -> bool {
        self.icmp_type() < 128
    }

    pub fn is_echo_reply(&self) -> bool {
        matches!(self, ReplyKind::EchoReply)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReplyKind::EchoReply => "echo_reply",
            ReplyKind::DestinationUnreachable(_) => "destination_unreachable",
            ReplyKind::PacketTooBig => "packet_too_big",
            ReplyKind::TimeExceeded(_) => "time_exceeded",
            ReplyKind::ParameterProblem(_) => "parameter_problem",
            ReplyKind::Other { .. } => "other",
        }
    }
}

/// Serialized as `name:code`, with the type inserted for unrecognised
/// messages (`other:type:code`).
impl Serialize for ReplyKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ReplyKind::Other { icmp_type, code } => s.collect_str(&format_args!("other:{icmp_type}:{code}")),
            k => s.collect_str(&format_args!("{}:{}", k.name(), k.code())),
        }
    }
}

/// A captured ICMPv6 reply reduced to what the analysis needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ReplyLine", try_from = "ReplyLine")]
pub struct ReplyRecord {
    pub kind: ReplyKind,
    pub source: Ipv6Addr,
    /// Present only when the echoed or quoted payload authenticated.
    pub embedded_target: Option<Ipv6Addr>,
    pub received_hop_limit: u8,
    /// Nanoseconds since the capture epoch (scan start, or virtual time).
    pub timestamp_ns: u64,
}

/// NDJSON line layout of a [`ReplyRecord`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReplyLine {
    ts: u64,
    kind: String,
    #[serde(rename = "type")]
    icmp_type: u8,
    code: u8,
    src: Ipv6Addr,
    embedded_target: Option<Ipv6Addr>,
    hop_limit: u8,
}

impl From<ReplyRecord> for ReplyLine {
    fn from(r: ReplyRecord) -> Self {
        ReplyLine {
            ts: r.timestamp_ns,
            kind: r.kind.name().to_string(),
            icmp_type: r.kind.icmp_type(),
            code: r.kind.code(),
            src: r.source,
            embedded_target: r.embedded_target,
            hop_limit: r.received_hop_limit,
        }
    }
}

impl TryFrom<ReplyLine> for ReplyRecord {
    type Error = String;

    fn try_from(l: ReplyLine) -> Result<Self, Self::Error> {
        let kind = ReplyKind::from_type_code(l.icmp_type, l.code);
        if kind.name() != l.kind {
            return Err(format!(
                "kind `{}` does not match type {} code {}",
                l.kind, l.icmp_type, l.code
            ));
        }
        Ok(ReplyRecord {
            kind,
            source: l.src,
            embedded_target: l.embedded_target,
            received_hop_limit: l.hop_limit,
            timestamp_ns: l.ts,
        })
    }
}

/// Extracts our payload from the Echo Request quoted inside an ICMPv6 error.
fn quoted_target(quoted: &[u8], secret: u64) -> Option<Ipv6Addr> {
    let (_, proto, upper) = parse_ipv6(quoted, true)?;
    if proto != NEXT_HEADER_ICMPV6 || upper.len() < ICMPV6_HEADER_LEN {
        return None;
    }
    if upper[0] != ICMP_ECHO_REQUEST {
        return None;
    }
    decode_payload(&upper[ICMPV6_HEADER_LEN..], secret)
}

/// Classifies a captured packet. Echo Replies and ICMPv6 error messages
/// produce a record (timestamp left at zero for the caller to fill in); other
/// informational messages, non-ICMPv6 and malformed packets produce `None`.
pub fn classify_icmp(packet: &[u8], secret: u64) -> Option<ReplyRecord> {
    let (hdr, proto, icmp) = parse_ipv6(packet, false)?;
    if proto != NEXT_HEADER_ICMPV6 || icmp.len() < ICMPV6_HEADER_LEN {
        return None;
    }
    let (icmp_type, code) = (icmp[0], icmp[1]);
    let body = &icmp[ICMPV6_HEADER_LEN..];
    let embedded_target = match icmp_type {
        ICMP_ECHO_REPLY => decode_payload(body, secret),
        t if t < 128 => quoted_target(body, secret),
        _ => return None,
    };
    Some(ReplyRecord {
        kind: ReplyKind::from_type_code(icmp_type, code),
        source: hdr.src,
        embedded_target,
        received_hop_limit: hdr.hop_limit,
        timestamp_ns: 0,
    })
}
