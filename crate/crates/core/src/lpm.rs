//! Longest-prefix-match tables.

use std::collections::HashMap;
use std::io::Read;
use std::net::Ipv6Addr;

use crate::prefix::{mask, parse_prefix, Ipv6Prefix, PrefixError};

/// Label returned for addresses no entry covers.
pub const UNKNOWN: &str = "unknown";

/// Prefix → value map answering longest-prefix-match queries.
///
/// One hash map per prefix length present; a lookup probes the lengths from
/// most to least specific.
#[derive(Debug, Clone)]
pub struct PrefixTable<V = String> {
    // sorted by descending prefix length
    levels: Vec<(u8, HashMap<u128, V>)>,
    len: usize,
}

impl<V> Default for PrefixTable<V> {
    fn default() -> Self {
        Self {
            levels: Vec::new(),
            len: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: {source}")]
    Prefix { line: usize, source: PrefixError },
    #[error("line {line}: expected `prefix,label`")]
    Shape { line: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl<V> PrefixTable<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Inserts or replaces the value for `prefix`, returning the old one.
    pub fn insert(&mut self, prefix: Ipv6Prefix, value: V) -> Option<V> {
        let pos = match self.levels.binary_search_by(|(l, _)| prefix.len().cmp(l)) {
            Ok(i) => i,
            Err(i) => {
                self.levels.insert(i, (prefix.len(), HashMap::new()));
                i
            }
        };
        let old = self.levels[pos].1.insert(prefix.bits(), value);
        if old.is_none() {
            self.len += 1;
        }
        old
    }

    pub fn get(&self, prefix: &Ipv6Prefix) -> Option<&V> {
        let pos = self.levels.binary_search_by(|(l, _)| prefix.len().cmp(l)).ok()?;
        self.levels[pos].1.get(&prefix.bits())
    }

    /// Most specific entry covering `addr`.
    pub fn lookup_bits(&self, addr: u128) -> Option<(Ipv6Prefix, &V)> {
        self.levels.iter().find_map(|(len, map)| {
            let key = addr & mask(*len);
            map.get(&key).map(|v| (Ipv6Prefix::truncate(key, *len), v))
        })
    }

    pub fn lookup(&self, addr: Ipv6Addr) -> Option<(Ipv6Prefix, &V)> {
        self.lookup_bits(u128::from(addr))
    }

    pub fn contains(&self, addr: Ipv6Addr) -> bool {
        self.lookup(addr).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Ipv6Prefix, &V)> {
        self.levels
            .iter()
            .flat_map(|(len, map)| map.iter().map(move |(bits, v)| (Ipv6Prefix::truncate(*bits, *len), v)))
    }
}

impl<V: AsRef<str>> PrefixTable<V> {
    /// Longest-prefix-match label, or [`UNKNOWN`].
    pub fn label(&self, addr: Ipv6Addr) -> &str {
        self.lookup(addr).map(|(_, v)| v.as_ref()).unwrap_or(UNKNOWN)
    }
}

impl PrefixTable<String> {
    /// Reads `prefix,label` rows. A leading `prefix,label` header row is
    /// skipped.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, TableError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut table = PrefixTable::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
            if rec.len() != 2 {
                return Err(TableError::Shape { line });
            }
            if i == 0 && &rec[0] == "prefix" {
                continue;
            }
            let prefix = parse_prefix(&rec[0]).map_err(|source| TableError::Prefix { line, source })?;
            table.insert(prefix, rec[1].to_string());
        }
        Ok(table)
    }
}

impl<V> FromIterator<(Ipv6Prefix, V)> for PrefixTable<V> {
    fn from_iter<T: IntoIterator<Item = (Ipv6Prefix, V)>>(iter: T) -> Self {
        let mut t = PrefixTable::new();
        for (p, v) in iter {
            t.insert(p, v);
        }
        t
    }
}

impl FromIterator<Ipv6Prefix> for PrefixTable<()> {
    fn from_iter<T: IntoIterator<Item = Ipv6Prefix>>(iter: T) -> Self {
        iter.into_iter().map(|p| (p, ())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Ipv6Prefix {
        parse_prefix(s).unwrap()
    }

    #[test]
    fn containment_default_and_nesting() {
        let mut t = PrefixTable::new();
        t.insert(p("2001:db8::/32"), "AS64500".to_string());
        assert_eq!(t.label("2001:db8:1::1".parse().unwrap()), "AS64500");
        assert_eq!(t.label("2001:db9::1".parse().unwrap()), UNKNOWN);
        t.insert(p("2001:db8:1::/48"), "AS64501".to_string());
        assert_eq!(t.label("2001:db8:1::1".parse().unwrap()), "AS64501");
        assert_eq!(t.label("2001:db8:2::1".parse().unwrap()), "AS64500");
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn default_route_and_host_route() {
        let t: PrefixTable<&str> = [(p("::/0"), "any"), (p("2001:db8::1"), "host")].into_iter().collect();
        assert_eq!(t.label("2001:db8::1".parse().unwrap()), "host");
        assert_eq!(t.label("2001:db8::2".parse().unwrap()), "any");
    }

    #[test]
    fn csv_loading() {
        let data = "prefix,label\n2001:db8::/32,AS64500\n# comment\n2001:db8:1::/48, DE\n";
        let t = PrefixTable::from_csv(data.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.label("2001:db8:1::5".parse().unwrap()), "DE");
        let bad = "2001:db8::/32,AS1\n2001:db8::1/32,AS2\n";
        match PrefixTable::from_csv(bad.as_bytes()) {
            Err(TableError::Prefix { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    fn entries() -> impl Strategy<Value = Vec<(Ipv6Prefix, u32)>> {
        proptest::collection::vec(
            (any::<u16>(), 16u8..=64, any::<u32>()).prop_map(|(hi, len, v)| {
                (
                    Ipv6Prefix::truncate(((0x2001u128 << 16) | hi as u128) << 96 | (hi as u128) << 64, len),
                    v,
                )
            }),
            0..40,
        )
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(es in entries(), probes in proptest::collection::vec(any::<u64>(), 1..40)) {
            let mut t = PrefixTable::new();
            let mut last: HashMap<Ipv6Prefix, u32> = HashMap::new();
            for (p, v) in &es {
                t.insert(*p, *v);
                last.insert(*p, *v);
            }
            // probe near the inserted prefixes as well as at random
            let mut addrs: Vec<u128> = es.iter().map(|(p, _)| p.bits() | 1).collect();
            addrs.extend(probes.iter().map(|&x| (0x2001u128 << 112) | (x as u128) << 48));
            for a in addrs {
                let brute = last
                    .iter()
                    .filter(|(p, _)| p.contains_bits(a))
                    .max_by_key(|(p, _)| p.len())
                    .map(|(p, v)| (*p, *v));
                let got = t.lookup_bits(a).map(|(p, v)| (p, *v));
                prop_assert_eq!(got, brute);
            }
        }
    }
}
