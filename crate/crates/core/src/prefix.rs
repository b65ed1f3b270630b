//! Canonical IPv6 prefixes.

use std::fmt;
use std::net::Ipv6Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrefixError {
    #[error("malformed IPv6 address `{0}`")]
    Address(String),
    #[error("malformed prefix length `{0}`")]
    Length(String),
    #[error("prefix length {0} out of range (0..=128)")]
    LengthOutOfRange(u32),
    #[error("{addr}/{len} has host bits set below the mask")]
    HostBits { addr: Ipv6Addr, len: u8 },
}

/// An IPv6 prefix in canonical form: every bit below the mask is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ipv6Prefix {
    bits: u128,
    len: u8,
}

/// Network mask for a prefix of length `len`.
#[inline]
pub const fn mask(len: u8) -> u128 {
    if len == 0 {
        0
    } else {
        u128::MAX << (128 - len as u32)
    }
}

impl Ipv6Prefix {
    /// The whole address space.
    pub const ANY: Ipv6Prefix = Ipv6Prefix { bits: 0, len: 0 };

    /// Builds a prefix, rejecting lengths above 128 and set host bits.
    pub fn new(bits: u128, len: u8) -> Result<Self, PrefixError> {
        if len > 128 {
            return Err(PrefixError::LengthOutOfRange(len as u32));
        }
        if bits & !mask(len) != 0 {
            return Err(PrefixError::HostBits {
                addr: Ipv6Addr::from(bits),
                len,
            });
        }
        Ok(Self { bits, len })
    }

    /// Builds a prefix by clearing every host bit of `addr`.
    pub fn truncate(addr: u128, len: u8) -> Self {
        assert!(len <= 128, "prefix length {len} out of range");
        Self {
            bits: addr & mask(len),
            len,
        }
    }

    pub fn from_addr(addr: Ipv6Addr, len: u8) -> Result<Self, PrefixError> {
        Self::new(u128::from(addr), len)
    }

    #[inline]
    pub fn bits(&self) -> u128 {
        self.bits
    }

    #[inline]
    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn network(&self) -> Ipv6Addr {
        Ipv6Addr::from(self.bits)
    }

    /// Last address covered by the prefix.
    pub fn last(&self) -> u128 {
        self.bits | !mask(self.len)
    }

    #[inline]
    pub fn contains_bits(&self, addr: u128) -> bool {
        addr & mask(self.len) == self.bits
    }

    pub fn contains(&self, addr: Ipv6Addr) -> bool {
        self.contains_bits(u128::from(addr))
    }

    /// True when `other` lies entirely inside `self` (including equality).
    pub fn covers(&self, other: &Ipv6Prefix) -> bool {
        self.len <= other.len && self.contains_bits(other.bits)
    }

    /// The enclosing prefix of length `len`; `self` when already shorter.
    pub fn supernet(&self, len: u8) -> Ipv6Prefix {
        if len >= self.len {
            *self
        } else {
            Ipv6Prefix::truncate(self.bits, len)
        }
    }

    /// Number of subnets of length `sub_len` inside this prefix, or `None`
    /// when `sub_len` is shorter than the prefix itself.
    pub fn subnet_count(&self, sub_len: u8) -> Option<u128> {
        if sub_len < self.len || sub_len > 128 {
            return None;
        }
        let diff = (sub_len - self.len) as u32;
        if diff >= 128 {
            None
        } else {
            Some(1u128 << diff)
        }
    }

    /// The `index`-th subnet of length `sub_len`.
    pub fn subnet(&self, sub_len: u8, index: u128) -> Ipv6Prefix {
        debug_assert!(sub_len >= self.len && sub_len <= 128);
        let shift = 128 - sub_len as u32;
        let offset = if shift >= 128 { 0 } else { index << shift };
        Ipv6Prefix {
            bits: self.bits | (offset & !mask(self.len)),
            len: sub_len,
        }
    }
}

/// The Subnet-Router anycast address of a prefix: the prefix with every host
/// bit zero.
#[inline]
pub fn sra_address(prefix: &Ipv6Prefix) -> Ipv6Addr {
    Ipv6Addr::from(prefix.bits & mask(prefix.len))
}

/// Parses `addr[/len]`. A bare address is a /128. Host bits must be clear.
pub fn parse_prefix(text: &str) -> Result<Ipv6Prefix, PrefixError> {
    let text = text.trim();
    let (addr_part, len) = match text.split_once('/') {
        Some((a, l)) => {
            let len: u32 = l.trim().parse().map_err(|_| PrefixError::Length(l.to_string()))?;
            if len > 128 {
                return Err(PrefixError::LengthOutOfRange(len));
            }
            (a, len as u8)
        }
        None => (text, 128),
    };
    let addr: Ipv6Addr = addr_part
        .trim()
        .parse()
        .map_err(|_| PrefixError::Address(addr_part.to_string()))?;
    Ipv6Prefix::from_addr(addr, len)
}

impl FromStr for Ipv6Prefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_prefix(s)
    }
}

impl fmt::Display for Ipv6Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network(), self.len)
    }
}

impl Serialize for Ipv6Prefix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ipv6Prefix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_prefix(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_documentation_prefix() {
        let p = parse_prefix("2001:db8::/32").unwrap();
        assert_eq!(p.network(), "2001:db8::".parse::<Ipv6Addr>().unwrap());
        assert_eq!(p.len(), 32);
    }

    #[test]
    fn parses_default_route() {
        let p = parse_prefix("::/0").unwrap();
        assert_eq!(p.bits(), 0);
        assert_eq!(p.len(), 0);
    }

    #[test]
    fn bare_address_is_host_route() {
        let p = parse_prefix("2001:db8::1").unwrap();
        assert_eq!(p.len(), 128);
    }

    #[test]
    fn rejects_host_bits() {
        assert!(matches!(
            parse_prefix("2001:db8::1/32"),
            Err(PrefixError::HostBits { len: 32, .. })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            parse_prefix("2001:db8::/129"),
            Err(PrefixError::LengthOutOfRange(129))
        ));
        assert!(matches!(parse_prefix("2001:zz8::/32"), Err(PrefixError::Address(_))));
        assert!(matches!(parse_prefix("2001:db8::/x"), Err(PrefixError::Length(_))));
        assert!(parse_prefix("10.0.0.0/8").is_err());
    }

    #[test]
    fn sra_examples() {
        let p = parse_prefix("2001:db8:1::/48").unwrap();
        assert_eq!(sra_address(&p), "2001:db8:1::".parse::<Ipv6Addr>().unwrap());
        assert_eq!(sra_address(&Ipv6Prefix::ANY), Ipv6Addr::UNSPECIFIED);
        let p = parse_prefix("2001:db8::/32").unwrap();
        assert_eq!(sra_address(&p), "2001:db8::".parse::<Ipv6Addr>().unwrap());
    }

    #[test]
    fn subnets() {
        let p = parse_prefix("2001:db8::/32").unwrap();
        assert_eq!(p.subnet_count(48), Some(65536));
        assert_eq!(p.subnet(48, 0xabcd).to_string(), "2001:db8:abcd::/48");
        assert_eq!(p.subnet_count(16), None);
        assert_eq!(Ipv6Prefix::ANY.subnet_count(128), None);
        assert_eq!(Ipv6Prefix::ANY.subnet_count(127), Some(1 << 127));
    }

    proptest! {
        #[test]
        fn truncate_is_canonical(addr in any::<u128>(), len in 0u8..=128) {
            let p = Ipv6Prefix::truncate(addr, len);
            prop_assert!(Ipv6Prefix::new(p.bits(), len).is_ok());
            prop_assert!(p.contains_bits(addr));
            prop_assert_eq!(parse_prefix(&p.to_string()).unwrap(), p);
        }

        #[test]
        fn supernet_covers(addr in any::<u128>(), len in 0u8..=128, up in 0u8..=128) {
            let p = Ipv6Prefix::truncate(addr, len);
            let s = p.supernet(up);
            prop_assert!(s.covers(&p));
        }
    }
}
