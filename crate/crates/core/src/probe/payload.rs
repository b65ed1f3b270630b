//! Authenticated probe payloads.
//!
//! Layout: the 16-byte target address followed by an 8-byte tag, the first
//! eight bytes of SHA-256 over `address || secret` (secret big-endian).

use std::net::Ipv6Addr;

use sha2::{Digest, Sha256};

pub const PAYLOAD_LEN: usize = 24;
const TAG_LEN: usize = 8;

fn tag(address: &[u8; 16], secret: u64) -> [u8; TAG_LEN] {
    let mut h = Sha256::new();
    h.update(address);
    h.update(secret.to_be_bytes());
    let digest = h.finalize();
    let mut out = [0u8; TAG_LEN];
    out.copy_from_slice(&digest[..TAG_LEN]);
    out
}

pub fn encode_payload(target: Ipv6Addr, secret: u64) -> [u8; PAYLOAD_LEN] {
    let addr = target.octets();
    let mut out = [0u8; PAYLOAD_LEN];
    out[..16].copy_from_slice(&addr);
    out[16..].copy_from_slice(&tag(&addr, secret));
    out
}

/// Recovers the target address from the first [`PAYLOAD_LEN`] bytes of
/// `bytes`. Anything shorter, or with a tag that does not verify under
/// `secret`, yields `None`.
pub fn decode_payload(bytes: &[u8], secret: u64) -> Option<Ipv6Addr> {
    if bytes.len() < PAYLOAD_LEN {
        return None;
    }
    let mut addr = [0u8; 16];
    addr.copy_from_slice(&bytes[..16]);
    if bytes[16..PAYLOAD_LEN] != tag(&addr, secret) {
        return None;
    }
    Some(Ipv6Addr::from(addr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_address_zero_secret() {
        let p = encode_payload(Ipv6Addr::UNSPECIFIED, 0);
        assert_eq!(&p[..16], &[0u8; 16]);
        let mut input = [0u8; 24];
        input[..16].copy_from_slice(&[0u8; 16]);
        let digest = Sha256::digest(input);
        assert_eq!(&p[16..], &digest[..8]);
        assert_eq!(decode_payload(&p, 0), Some(Ipv6Addr::UNSPECIFIED));
    }

    #[test]
    fn wrong_secret_is_rejected() {
        // every ordered pair of distinct secrets in a small set
        let secrets = [0u64, 1, 2, 0xdead_beef, u64::MAX];
        let addr: Ipv6Addr = "2001:db8:1::".parse().unwrap();
        for &s1 in &secrets {
            let p = encode_payload(addr, s1);
            for &s2 in &secrets {
                assert_eq!(decode_payload(&p, s2).is_some(), s1 == s2);
            }
        }
    }

    #[test]
    fn truncated_is_absent() {
        let p = encode_payload("2001:db8::".parse().unwrap(), 5);
        assert_eq!(decode_payload(&p[..23], 5), None);
        assert_eq!(decode_payload(&[], 5), None);
    }

    #[test]
    fn trailing_bytes_are_ignored() {
        let addr: Ipv6Addr = "2001:db8::".parse().unwrap();
        let mut v = encode_payload(addr, 5).to_vec();
        v.extend_from_slice(&[0xff; 10]);
        assert_eq!(decode_payload(&v, 5), Some(addr));
    }

    proptest! {
        #[test]
        fn round_trip(addr in any::<u128>(), secret in any::<u64>()) {
            let a = Ipv6Addr::from(addr);
            prop_assert_eq!(decode_payload(&encode_payload(a, secret), secret), Some(a));
        }

        #[test]
        fn distinct_targets_distinct_payloads(x in any::<u128>(), y in any::<u128>(), s in any::<u64>()) {
            prop_assume!(x != y);
            prop_assert_ne!(encode_payload(Ipv6Addr::from(x), s), encode_payload(Ipv6Addr::from(y), s));
        }
    }
}
