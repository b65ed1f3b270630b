use std::collections::{HashMap, HashSet};
use std::hash::Hash;
use std::net::Ipv6Addr;

use serde::Serialize;

use crate::lpm::{PrefixTable, UNKNOWN};

/// More sets than this would make the exclusive-intersection table
/// impractically wide.
pub const MAX_SETS: usize = 16;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("need at least two sets, got {0}")]
    TooFewSets(usize),
    #[error("at most {MAX_SETS} sets are supported, got {0}")]
    TooManySets(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOverlap {
    pub a: String,
    pub b: String,
    pub intersection: u64,
    /// `|A ∩ B| / |A|`
    pub fraction_of_a: f64,
    /// `|A ∩ B| / |B|`
    pub fraction_of_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapTable {
    pub names: Vec<String>,
    pub sizes: Vec<u64>,
    pub union: u64,
    /// Exclusive-intersection cardinality for every nonempty subset of
    /// sets, indexed by membership bitmask (bit `i` = `names[i]`). Index 0
    /// is unused and always 0.
    pub exclusive: Vec<u64>,
    pub pairwise: Vec<PairOverlap>,
}

impl OverlapTable {
    pub fn members(&self, mask: usize) -> Vec<&str> {
        self.names
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, n)| n.as_str())
            .collect()
    }

    /// One row per nonempty subset: a 0/1 column per set plus the count.
    pub fn exclusive_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push("count");
        w.write_record(&header).expect("in-memory write");
        for mask in 1..self.exclusive.len() {
            let mut row: Vec<String> = (0..self.names.len()).map(|i| (mask >> i & 1).to_string()).collect();
            row.push(self.exclusive[mask].to_string());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn pairwise_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.pairwise {
            w.serialize(p).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// UpSet-style exclusive intersections plus pairwise overlaps.
pub fn compare_datasets<T: Eq + Hash>(sets: &[(String, HashSet<T>)]) -> Result<OverlapTable, CompareError> {
    if sets.len() < 2 {
        return Err(CompareError::TooFewSets(sets.len()));
    }
    if sets.len() > MAX_SETS {
        return Err(CompareError::TooManySets(sets.len()));
    }
    let mut membership: HashMap<&T, usize> = HashMap::new();
    for (i, (_, set)) in sets.iter().enumerate() {
        for x in set {
            *membership.entry(x).or_default() |= 1 << i;
        }
    }
    let mut exclusive = vec![0u64; 1 << sets.len()];
    for mask in membership.values() {
        exclusive[*mask] += 1;
    }
    let mut pairwise = Vec::new();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let both = (1 << i) | (1 << j);
            let intersection: u64 = exclusive
                .iter()
                .enumerate()
                .filter(|(m, _)| m & both == both)
                .map(|(_, c)| c)
                .sum();
            let frac = |n: usize| if n == 0 { 0.0 } else { intersection as f64 / n as f64 };
            pairwise.push(PairOverlap {
                a: sets[i].0.clone(),
                b: sets[j].0.clone(),
                intersection,
                fraction_of_a: frac(sets[i].1.len()),
                fraction_of_b: frac(sets[j].1.len()),
            });
        }
    }
    Ok(OverlapTable {
        names: sets.iter().map(|(n, _)| n.clone()).collect(),
        sizes: sets.iter().map(|(_, s)| s.len() as u64).collect(),
        union: membership.len() as u64,
        exclusive,
        pairwise,
    })
}

/// The same comparison after mapping addresses to labels (ASNs);
/// addresses without a label are left out.
pub fn compare_by_label<V: AsRef<str>>(
    sets: &[(String, HashSet<Ipv6Addr>)],
    table: &PrefixTable<V>,
) -> Result<OverlapTable, CompareError> {
    let labelled: Vec<(String, HashSet<String>)> = sets
        .iter()
        .map(|(name, s)| {
            let labels = s
                .iter()
                .map(|a| table.label(*a))
                .filter(|l| *l != UNKNOWN)
                .map(str::to_string)
                .collect();
            (name.clone(), labels)
        })
        .collect();
    compare_datasets(&labelled)
}
